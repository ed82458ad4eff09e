#include "aait/search.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace aait {

namespace {
constexpr float kLeakySlope = 0.2f;
}

Critic::Critic(uint64_t seed) {
  Rng rng(seed);
  c1_ = Conv2d(params_, "c1", 3, 16, 3, 2, 1, rng);
  c2_ = Conv2d(params_, "c2", 16, 32, 3, 2, 1, rng);
  c3_ = Conv2d(params_, "c3", 32, 64, 3, 2, 1, rng);
  head_ = Linear(params_, "head", 64, 1, rng);
  head_.w->val.zero();
  head_.b->val.zero();
}

Var Critic::forward(const Var& x) {
  Var h = leaky_relu(c1_(x), kLeakySlope);
  h = leaky_relu(c2_(h), kLeakySlope);
  h = leaky_relu(c3_(h), kLeakySlope);
  return head_(global_avg_pool(h));
}

namespace {

Tensor leaky_mask(const Tensor& preact) {
  Tensor m(preact.shape());
  for (long i = 0; i < preact.size(); ++i) m[i] = preact[i] > 0.f ? 1.f : kLeakySlope;
  return m;
}

}  // namespace

Var Critic::forward_traced(const Var& x, PrimalTrace* trace) {
  Var z1 = c1_(x);
  trace->masks.push_back(leaky_mask(z1->val));
  Var h = leaky_relu(z1, kLeakySlope);
  Var z2 = c2_(h);
  trace->masks.push_back(leaky_mask(z2->val));
  h = leaky_relu(z2, kLeakySlope);
  Var z3 = c3_(h);
  trace->masks.push_back(leaky_mask(z3->val));
  h = leaky_relu(z3, kLeakySlope);
  return head_(global_avg_pool(h));
}

Var Critic::tangent_score(const Var& v, const PrimalTrace& trace) {
  // biases drop out of the directional derivative; masks enter as constants
  Var t = mul_const(conv2d(v, c1_.w, nullptr, c1_.stride, c1_.pad), trace.masks[0]);
  t = mul_const(conv2d(t, c2_.w, nullptr, c2_.stride, c2_.pad), trace.masks[1]);
  t = mul_const(conv2d(t, c3_.w, nullptr, c3_.stride, c3_.pad), trace.masks[2]);
  return linear(global_avg_pool(t), head_.w, nullptr);
}

std::pair<std::vector<int>, std::vector<int>> split_indices(int n, Rng& rng) {
  if (n < 2) throw DomainError("split_batch: need at least two images");
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  const int half = (n + 1) / 2;
  return {std::vector<int>(order.begin(), order.begin() + half),
          std::vector<int>(order.begin() + half, order.end())};
}

std::pair<Tensor, Tensor> split_batch(const Tensor& batch, Rng& rng) {
  auto [ia, ib] = split_indices(batch.shape().n, rng);
  const Shape& s = batch.shape();
  Tensor a(Shape(int(ia.size()), s.c, s.h, s.w)), b(Shape(int(ib.size()), s.c, s.h, s.w));
  for (size_t i = 0; i < ia.size(); ++i) a.set_slice_n(int(i), batch.slice_n(ia[i], 1));
  for (size_t i = 0; i < ib.size(); ++i) b.set_slice_n(int(i), batch.slice_n(ib[i], 1));
  return {std::move(a), std::move(b)};
}

float critic_distance(Critic& critic, const Tensor& a_transformed, const Tensor& b) {
  if (a_transformed.shape().n == 0 || b.shape().n == 0)
    throw DomainError("critic_distance: empty batch");
  Var da = critic.forward(make_const(a_transformed));
  Var db = critic.forward(make_const(b));
  return float(da->val.sum() / da->val.size() - db->val.sum() / db->val.size());
}

CriticStats critic_update(Critic& critic, Adam& optim, const Tensor& a_transformed,
                          const Tensor& b, float gp_coefficient, Rng& rng) {
  const int na = a_transformed.shape().n, nb = b.shape().n;
  if (na == 0 || nb == 0) throw DomainError("critic_update: empty batch");
  const int pairs = std::min(na, nb);
  const Shape& s = a_transformed.shape();
  const long per = s.per_image();

  // interpolates between paired rows
  Tensor xhat(Shape(pairs, s.c, s.h, s.w));
  for (int i = 0; i < pairs; ++i) {
    const float e = float(rng.uniform());
    const float* pa = a_transformed.data() + long(i) * per;
    const float* pb = b.data() + long(i) * per;
    float* dst = xhat.data() + long(i) * per;
    for (long j = 0; j < per; ++j) dst[j] = e * pa[j] + (1.f - e) * pb[j];
  }

  // input gradient of the critic at the interpolates
  critic.params().set_trainable(false);
  Var xv = make_leaf(xhat, true);
  Critic::PrimalTrace trace;
  Var scores = critic.forward_traced(xv, &trace);
  backward(sum_all(scores));
  Tensor g = xv->grad;
  critic.params().set_trainable(true);

  // v carries d penalty / d gradient so the tangent score's parameter
  // gradient equals gp_coefficient * d penalty / d theta
  Tensor v(g.shape());
  double penalty = 0.0;
  for (int i = 0; i < pairs; ++i) {
    const float* gi = g.data() + long(i) * per;
    double sq = 0.0;
    for (long j = 0; j < per; ++j) sq += double(gi[j]) * gi[j];
    const double norm = std::sqrt(std::max(sq, 1e-24));
    penalty += (norm - 1.0) * (norm - 1.0);
    const float coef = float(2.0 * gp_coefficient / pairs * (norm - 1.0) / norm);
    float* vi = v.data() + long(i) * per;
    for (long j = 0; j < per; ++j) vi[j] = coef * gi[j];
  }
  penalty /= pairs;

  // minimize mean D(B) - mean D(A') + gp * penalty
  critic.params().zero_grad();
  Var mean_b = mean_all(critic.forward(make_const(b)));
  Var mean_a = mean_all(critic.forward(make_const(a_transformed)));
  Var gp_term = sum_all(critic.tangent_score(make_const(v), trace));
  Var loss = add(sub(mean_b, mean_a), gp_term);
  backward(loss);
  optim.step();

  CriticStats stats;
  stats.distance = float(mean_a->val[0] - mean_b->val[0]);
  stats.gradient_penalty = float(penalty);
  return stats;
}

float classification_loss(Classifier& model, const Tensor& a_transformed,
                          const std::vector<int>& targets_a, const Tensor& b,
                          const std::vector<int>& targets_b, LossKind kind) {
  return targeted_loss_value(model.logits(a_transformed), targets_a, kind) +
         targeted_loss_value(model.logits(b), targets_b, kind);
}

namespace {

std::string dump_policy_state(const PolicyVars& vars) {
  std::string s;
  char buf[64];
  for (size_t l = 0; l < vars.ops.size(); ++l)
    for (size_t k = 0; k < vars.ops[l].size(); ++k) {
      const auto& op = vars.ops[l][k];
      std::snprintf(buf, sizeof(buf), "[%zu][%zu] %s p=%.4f mu=%.4f\n", l, k,
                    to_string(op.kind).c_str(), op.p->val[0],
                    op.mu ? op.mu->val[0] : 0.5f);
      s += buf;
    }
  return s;
}

}  // namespace

Policy run_search(const TargetedDataset& data, Classifier& model, const SearchConfig& cfg,
                  std::vector<EpochLog>* log) {
  if (data.size() < 2) throw ConfigError("run_search: dataset needs at least two images");
  if (cfg.batch_size < 2) throw ConfigError("run_search: batch_size must be >= 2");
  if (cfg.eta < 0.f) throw ConfigError("run_search: eta must be >= 0");
  if (cfg.temperature <= 0.f) throw ConfigError("run_search: temperature must be > 0");

  Rng rng(cfg.seed);
  Policy init = init_policy(cfg.sub_policies, cfg.ops_per_subpolicy, cfg.vocabulary, rng);
  init.meta = SearchMeta{cfg.eta, cfg.epochs, cfg.temperature, cfg.seed};
  PolicyVars vars = make_policy_vars(init);

  Critic critic(rng.next_u64());
  Adam policy_optim(vars.parameters(), cfg.learning_rate, cfg.beta1, cfg.beta2);
  Adam critic_optim(critic.parameters(), cfg.learning_rate, cfg.beta1, cfg.beta2);

  const Shape& ds = data.images.shape();
  std::vector<int> order(static_cast<size_t>(data.size()));
  std::iota(order.begin(), order.end(), 0);

  const auto t_start = std::chrono::steady_clock::now();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double ep_d = 0.0, ep_l = 0.0;
    int steps = 0;
    for (int start = 0; start + 2 <= data.size(); start += cfg.batch_size) {
      const int count = std::min(cfg.batch_size, data.size() - start);
      if (count < 2) break;
      Tensor xb(Shape(count, ds.c, ds.h, ds.w));
      std::vector<int> yb(static_cast<size_t>(count));
      for (int i = 0; i < count; ++i) {
        xb.set_slice_n(i, data.images.slice_n(order[size_t(start + i)], 1));
        yb[size_t(i)] = data.targets[size_t(order[size_t(start + i)])];
      }
      auto [ia, ib] = split_indices(count, rng);
      Tensor a(Shape(int(ia.size()), ds.c, ds.h, ds.w)), b(Shape(int(ib.size()), ds.c, ds.h, ds.w));
      std::vector<int> ya(ia.size()), yb_targets(ib.size());
      for (size_t i = 0; i < ia.size(); ++i) {
        a.set_slice_n(int(i), xb.slice_n(ia[i], 1));
        ya[i] = yb[size_t(ia[i])];
      }
      for (size_t i = 0; i < ib.size(); ++i) {
        b.set_slice_n(int(i), xb.slice_n(ib[i], 1));
        yb_targets[i] = yb[size_t(ib[i])];
      }

      // transform A with tape-resident policy parameters
      Var a_prime = apply_policy(vars, make_const(a), cfg.chunk_size, cfg.temperature, rng);

      // adversarial critic step on the detached transform
      critic_update(critic, critic_optim, a_prime->val, b, cfg.gp_coefficient, rng);

      // policy step: d + eta * l with the updated critic frozen
      critic.params().set_trainable(false);
      for (auto& p : vars.parameters()) p->zero_grad();
      Var d_var = sub(mean_all(critic.forward(a_prime)),
                      mean_all(critic.forward(make_const(b))));
      Var logits_a = model.forward(a_prime);
      Var loss_a = targeted_loss(logits_a, ya, cfg.loss);
      const float loss_b = targeted_loss_value(model.logits(b), yb_targets, cfg.loss);
      Var objective = add(d_var, mul_scalar(loss_a, cfg.eta));
      backward(objective);
      policy_optim.step();
      vars.clamp_params();
      critic.params().set_trainable(true);

      const float d_val = d_var->val[0];
      const float l_val = loss_a->val[0] + loss_b;
      if (!std::isfinite(d_val) || !std::isfinite(l_val))
        throw NumericError("run_search: non-finite objective at epoch " +
                           std::to_string(epoch + 1) + "\n" + dump_policy_state(vars));
      ep_d += d_val;
      ep_l += l_val;
      ++steps;
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    EpochLog entry{epoch + 1, float(ep_d / steps), float(ep_l / steps),
                   float(ep_d / steps + cfg.eta * ep_l / steps), wall};
    if (log) log->push_back(entry);
    if (cfg.verbose)
      std::fprintf(stderr, "[search] epoch %d/%d d=%.4f l=%.4f objective=%.4f (%.1fs)\n",
                   entry.epoch, cfg.epochs, entry.d, entry.l, entry.objective, wall);
  }

  return vars.snapshot(init);
}

void write_search_log(const std::vector<EpochLog>& log, const std::string& path,
                      const std::string& fingerprint) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f << "# fingerprint=" << fingerprint << "\n";
  f << "epoch,d,l,objective,wallclock_s\n";
  char buf[160];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.6f,%.3f\n", e.epoch, e.d, e.l, e.objective,
                  e.wallclock_s);
    f << buf;
  }
}

float mean_target_logit(Classifier& model, const Policy* policy, const Tensor& images,
                        const std::vector<int>& targets, Rng& rng, int draws) {
  double acc = 0.0;
  int count = 0;
  const int reps = policy ? draws : 1;
  for (int r = 0; r < reps; ++r) {
    Tensor input = images;
    if (policy)
      input = apply_policy(*policy, make_const(images), images.shape().n, GateMode::attack,
                           0.05f, rng)
                  ->val;
    Tensor lg = model.logits(input);
    for (int i = 0; i < lg.shape().n; ++i) {
      acc += lg.at(i, targets[size_t(i)], 0, 0);
      ++count;
    }
  }
  return float(acc / std::max(1, count));
}

}  // namespace aait
