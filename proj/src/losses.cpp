#include "aait/losses.hpp"

#include "aait/common.hpp"

namespace aait {

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "logit") return LossKind::logit;
  if (s == "ce" || s == "cross_entropy" || s == "cross-entropy") return LossKind::cross_entropy;
  throw ConfigError("unknown loss kind: " + s);
}

std::string to_string(LossKind k) { return k == LossKind::logit ? "logit" : "cross_entropy"; }

Var targeted_loss(const Var& logits, const std::vector<int>& targets, LossKind kind) {
  const Shape& s = logits->val.shape();
  if (int(targets.size()) != s.n) throw DomainError("targeted_loss: target count mismatch");
  for (int t : targets)
    if (t < 0 || t >= s.c)
      throw DomainError("targeted_loss: target index " + std::to_string(t) + " out of range [0," +
                        std::to_string(s.c - 1) + "]");
  if (kind == LossKind::logit) return neg(mean_all(gather_classes(logits, targets)));
  return mean_all(cross_entropy_vec(logits, targets));
}

float targeted_loss_value(const Tensor& logits, const std::vector<int>& targets, LossKind kind) {
  Var l = make_const(logits);
  return targeted_loss(l, targets, kind)->val[0];
}

}  // namespace aait
