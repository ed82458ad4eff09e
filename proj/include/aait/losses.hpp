#ifndef AAIT_LOSSES_HPP
#define AAIT_LOSSES_HPP

#include <string>
#include <vector>

#include "aait/graph.hpp"

namespace aait {

enum class LossKind { logit, cross_entropy };

LossKind loss_kind_from_string(const std::string& s);
std::string to_string(LossKind k);

// Targeted classification loss over a logit batch (N, classes, 1, 1).
// logit:          mean of -logits[y_t]  (drives the target logit up)
// cross_entropy:  mean CE against y_t
// Both consume raw logits, never probabilities.
Var targeted_loss(const Var& logits, const std::vector<int>& targets, LossKind kind);

// Value-only convenience for plain tensors.
float targeted_loss_value(const Tensor& logits, const std::vector<int>& targets, LossKind kind);

}  // namespace aait

#endif
