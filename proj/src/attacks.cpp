#include "aait/attacks.hpp"

#include <cmath>
#include <cstdio>

namespace aait {

int AttackConfig::resolved_dim_max(int side) const {
  if (dim_max_size > 0) {
    if (dim_max_size < side)
      throw DomainError("dim_max_size " + std::to_string(dim_max_size) +
                        " smaller than input side " + std::to_string(side));
    return dim_max_size;
  }
  if (side == 299) return 330;
  if (side == 32) return 40;
  return std::max(side + 1, int(std::lround(side * 330.0 / 299.0)));
}

std::string Recipe::name() const {
  std::string stage_name;
  switch (stage) {
    case GradStage::plain:
      stage_name = "";
      break;
    case GradStage::sim:
      stage_name = "si-";
      break;
    case GradStage::admix:
      stage_name = "admix-";
      break;
    case GradStage::aait:
      stage_name = "aait-";
      break;
  }
  std::string base;
  if (dim) base += "d";
  if (tim) base += "t";
  if (mi) base += "mi";
  if (base.empty()) base = "ifgsm";
  return stage_name + base;
}

Recipe parse_recipe(const std::string& text, const Policy* policy) {
  Recipe r;
  if (text == "dtmi") {
    r.dim = r.tim = r.mi = true;
  } else if (text == "si-dtmi") {
    r.dim = r.tim = r.mi = true;
    r.stage = GradStage::sim;
  } else if (text == "admix-dtmi") {
    r.dim = r.tim = r.mi = true;
    r.stage = GradStage::admix;
  } else if (text == "aait-dtmi") {
    r.dim = r.tim = r.mi = true;
    r.stage = GradStage::aait;
  } else if (text == "ifgsm") {
    // nothing
  } else if (text == "mi") {
    r.mi = true;
  } else {
    int stages = 0;
    size_t at = 0;
    while (at <= text.size()) {
      size_t comma = text.find(',', at);
      if (comma == std::string::npos) comma = text.size();
      const std::string tok = text.substr(at, comma - at);
      at = comma + 1;
      if (tok.empty()) continue;
      if (tok == "di" || tok == "dim") r.dim = true;
      else if (tok == "ti" || tok == "tim") r.tim = true;
      else if (tok == "mi") r.mi = true;
      else if (tok == "si" || tok == "sim") { r.stage = GradStage::sim; ++stages; }
      else if (tok == "admix") { r.stage = GradStage::admix; ++stages; }
      else if (tok == "aait") { r.stage = GradStage::aait; ++stages; }
      else throw ConfigError("unknown recipe component: " + tok);
    }
    if (stages > 1)
      throw ConfigError("recipe " + text + ": sim, admix and aait are mutually exclusive");
  }
  if (r.stage == GradStage::aait) {
    if (!policy) throw ConfigError("recipe " + text + " needs a policy file");
    r.policy = policy;
  }
  return r;
}

TiKernel gaussian_kernel(int size, float sigma) {
  if (size < 1 || size % 2 == 0)
    throw DomainError("gaussian_kernel: size must be odd, got " + std::to_string(size));
  if (sigma <= 0.f) throw DomainError("gaussian_kernel: sigma must be positive");
  TiKernel k;
  k.size = size;
  k.weights = Tensor(Shape(1, 1, size, size));
  const int c = size / 2;
  double total = 0.0;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double d2 = double(y - c) * (y - c) + double(x - c) * (x - c);
      const double v = std::exp(-d2 / (2.0 * sigma * sigma));
      k.weights.at(0, 0, y, x) = float(v);
      total += v;
    }
  for (long i = 0; i < k.weights.size(); ++i) k.weights[i] = float(k.weights[i] / total);
  return k;
}

Tensor ti_smooth(const TiKernel& kernel, const Tensor& grad) {
  const Shape& s = grad.shape();
  const int ks = kernel.size, half = ks / 2;
  Tensor out(s);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const float* src = &grad.at(n, c, 0, 0);
      float* dst = &out.at(n, c, 0, 0);
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) {
          double acc = 0.0;
          for (int ky = 0; ky < ks; ++ky) {
            const int iy = y + ky - half;
            if (iy < 0 || iy >= s.h) continue;
            for (int kx = 0; kx < ks; ++kx) {
              const int ix = x + kx - half;
              if (ix < 0 || ix >= s.w) continue;
              acc += double(src[long(iy) * s.w + ix]) * kernel.weights.at(0, 0, ky, kx);
            }
          }
          dst[long(y) * s.w + x] = float(acc);
        }
    }
  return out;
}

Tensor mi_accumulate(const Tensor& g_prev, const Tensor& grad, float decay,
                     std::vector<uint8_t>* zero_flags) {
  if (g_prev.shape() != grad.shape()) throw DomainError("mi_accumulate: shape mismatch");
  const Shape& s = grad.shape();
  const long per = s.per_image();
  Tensor out(s);
  for (int i = 0; i < s.n; ++i) {
    const float* g = grad.data() + long(i) * per;
    const float* p = g_prev.data() + long(i) * per;
    float* dst = out.data() + long(i) * per;
    double l1 = 0.0;
    for (long j = 0; j < per; ++j) l1 += std::fabs(g[j]);
    if (l1 == 0.0) {
      if (zero_flags && i < int(zero_flags->size())) (*zero_flags)[size_t(i)] = 1;
      for (long j = 0; j < per; ++j) dst[j] = decay * p[j];
    } else {
      const float inv = float(1.0 / l1);
      for (long j = 0; j < per; ++j) dst[j] = decay * p[j] + g[j] * inv;
    }
  }
  return out;
}

namespace {

void check_unit_box(const Tensor& x, const char* who) {
  for (long i = 0; i < x.size(); ++i)
    if (x[i] < 0.f || x[i] > 1.f) throw DomainError(std::string(who) + ": input outside [0,1]");
}

// Gradient of the targeted loss at `input`, pulled back to the leaf xv.
// Returns the loss value; the gradient accumulates into xv->grad.
float loss_backward(Classifier& model, const Var& input, const std::vector<int>& targets,
                    LossKind loss_kind) {
  Var logits = model.forward(input);
  Var loss = targeted_loss(logits, targets, loss_kind);
  if (!loss->val.all_finite()) throw NumericError("attack: non-finite loss");
  backward(loss);
  return loss->val[0];
}

}  // namespace

Tensor fgsm(Classifier& model, const Tensor& x, const std::vector<int>& targets, float epsilon,
            LossKind loss) {
  check_unit_box(x, "fgsm");
  Var xv = make_leaf(x, true);
  loss_backward(model, xv, targets, loss);
  if (!xv->grad.all_finite()) throw NumericError("fgsm: non-finite gradient");
  Tensor out(x.shape());
  for (long i = 0; i < x.size(); ++i) {
    const float g = xv->grad[i];
    const float step = g > 0.f ? epsilon : (g < 0.f ? -epsilon : 0.f);
    out[i] = std::clamp(x[i] - step, 0.f, 1.f);
  }
  return out;
}

Var dim_transform(const Var& batch, float probability, int dim_max, Rng& rng) {
  const Shape& s = batch->val.shape();
  if (dim_max < s.h) throw DomainError("dim_transform: dim_max_size below input side");
  if (!rng.bernoulli(probability)) return batch;
  // resize to a random side in [side, dim_max), then randomly zero-pad out
  const int side = s.h + int(rng.uniform_int(uint64_t(std::max(1, dim_max - s.h))));
  const int pad_total = dim_max - side;
  const int top = int(rng.uniform_int(uint64_t(pad_total + 1)));
  const int left = int(rng.uniform_int(uint64_t(pad_total + 1)));
  Var resized = side == s.h ? batch : resize_bilinear(batch, side, side);
  return pad_hw(resized, top, pad_total - top, left, pad_total - left);
}

Tensor sim_gradient(Classifier& model, const Tensor& x, const std::vector<int>& targets,
                    int sim_copies, LossKind loss) {
  if (sim_copies < 1) throw DomainError("sim_gradient: sim_copies must be >= 1");
  Var xv = make_leaf(x, true);
  for (int i = 0; i < sim_copies; ++i)
    loss_backward(model, mul_scalar(xv, std::ldexp(1.f, -i)), targets, loss);
  Tensor g = xv->grad;
  for (long i = 0; i < g.size(); ++i) g[i] /= float(sim_copies);
  return g;
}

Tensor admix_gradient(Classifier& model, const Tensor& x, const std::vector<int>& targets,
                      const Tensor& pool, const std::vector<std::vector<int>>& pool_of,
                      int mixes, float weight, int sim_copies, LossKind loss, Rng& rng) {
  const Shape& s = x.shape();
  if (int(pool_of.size()) != s.n) throw DomainError("admix_gradient: pool index size mismatch");
  for (const auto& cand : pool_of)
    if (cand.empty()) throw DomainError("admix_gradient: empty mixing pool for an image");
  Var xv = make_leaf(x, true);
  for (int m = 0; m < mixes; ++m) {
    Tensor mixed_in(s);
    for (int i = 0; i < s.n; ++i) {
      const auto& cand = pool_of[size_t(i)];
      const int pick = cand[rng.uniform_int(cand.size())];
      mixed_in.set_slice_n(i, pool.slice_n(pick, 1));
    }
    for (long j = 0; j < mixed_in.size(); ++j) mixed_in[j] *= weight;
    Var mixed = add_const(xv, std::move(mixed_in));
    for (int i = 0; i < sim_copies; ++i)
      loss_backward(model, mul_scalar(mixed, std::ldexp(1.f, -i)), targets, loss);
  }
  Tensor g = xv->grad;
  const float inv = 1.f / float(mixes * sim_copies);
  for (long i = 0; i < g.size(); ++i) g[i] *= inv;
  return g;
}

Tensor aait_gradient(Classifier& model, const Policy& policy, const Tensor& x,
                     const std::vector<int>& targets, int copies, LossKind loss, Rng& rng) {
  if (copies < 1) throw DomainError("aait_gradient: copies must be >= 1");
  if (policy.L() == 0) throw DomainError("aait_gradient: empty policy");
  Var xv = make_leaf(x, true);
  for (int i = 0; i < copies; ++i) {
    // each copy is one chunk: one sub-policy draw, one gate draw per op
    Var transformed =
        apply_policy(policy, xv, x.shape().n, GateMode::attack, /*temperature=*/0.05f, rng);
    loss_backward(model, transformed, targets, loss);
    if (!xv->grad.all_finite())
      throw NumericError("aait_gradient: non-finite gradient at copy " + std::to_string(i));
  }
  Tensor g = xv->grad;
  for (long i = 0; i < g.size(); ++i) g[i] /= float(copies);
  return g;
}

AttackResult run_attack(Classifier& model, const Tensor& x, const std::vector<int>& y_true,
                        const std::vector<int>& targets, const AttackConfig& cfg,
                        const Recipe& recipe, const IterCallback& callback) {
  check_unit_box(x, "run_attack");
  const Shape& s = x.shape();
  if (int(targets.size()) != s.n) throw DomainError("run_attack: target count mismatch");
  if (recipe.stage == GradStage::aait && !recipe.policy)
    throw ConfigError("run_attack: aait recipe without policy");
  if (recipe.stage == GradStage::admix && int(y_true.size()) != s.n)
    throw DomainError("run_attack: admix needs true labels");

  Rng rng(cfg.seed);
  const int dim_max = cfg.resolved_dim_max(s.h);
  TiKernel kernel;
  if (recipe.tim) kernel = gaussian_kernel(cfg.ti_kernel_size, cfg.ti_sigma);

  // admix pool: other images of the batch with a different true label
  std::vector<std::vector<int>> pool_of;
  if (recipe.stage == GradStage::admix) {
    pool_of.resize(size_t(s.n));
    for (int i = 0; i < s.n; ++i) {
      for (int j = 0; j < s.n; ++j)
        if (j != i && y_true[size_t(j)] != y_true[size_t(i)]) pool_of[size_t(i)].push_back(j);
      if (pool_of[size_t(i)].empty())
        throw DomainError("run_attack: no admix candidates with a different label for image " +
                          std::to_string(i));
    }
  }

  AttackResult result;
  result.x_adv = x.clone();
  result.zero_grad_seen.assign(size_t(s.n), 0);
  Tensor momentum(s);

  for (int t = 0; t < cfg.iters; ++t) {
    // gradients are taken at the DIM-transformed input; the update applies
    // to the untransformed iterate
    Var xv = make_leaf(result.x_adv, true);
    Var staged = recipe.dim ? dim_transform(xv, cfg.dim_probability, dim_max, rng) : xv;

    float loss_value = 0.f;
    switch (recipe.stage) {
      case GradStage::plain:
        loss_value = loss_backward(model, staged, targets, cfg.loss);
        break;
      case GradStage::sim: {
        for (int i = 0; i < cfg.sim_copies; ++i)
          loss_value += loss_backward(model, mul_scalar(staged, std::ldexp(1.f, -i)), targets,
                                      cfg.loss);
        loss_value /= float(cfg.sim_copies);
        break;
      }
      case GradStage::admix: {
        // mix with detached rows of the same (DIM-transformed) batch so the
        // geometry matches and gradients flow only through the attacked image
        int evals = 0;
        for (int m = 0; m < cfg.admix_mixes; ++m) {
          Tensor mixed_in(staged->val.shape());
          for (int i = 0; i < s.n; ++i) {
            const auto& cand = pool_of[size_t(i)];
            const int pick = cand[rng.uniform_int(cand.size())];
            mixed_in.set_slice_n(i, staged->val.slice_n(pick, 1));
          }
          for (long j = 0; j < mixed_in.size(); ++j) mixed_in[j] *= cfg.admix_weight;
          Var mixed = add_const(staged, std::move(mixed_in));
          for (int i = 0; i < cfg.sim_copies; ++i, ++evals)
            loss_value +=
                loss_backward(model, mul_scalar(mixed, std::ldexp(1.f, -i)), targets, cfg.loss);
        }
        loss_value /= float(std::max(1, evals));
        break;
      }
      case GradStage::aait: {
        for (int i = 0; i < cfg.copies; ++i) {
          Var transformed = apply_policy(*recipe.policy, staged, staged->val.shape().n,
                                         GateMode::attack, 0.05f, rng);
          loss_value += loss_backward(model, transformed, targets, cfg.loss);
        }
        loss_value /= float(cfg.copies);
        break;
      }
    }
    Tensor grad = xv->grad;
    if (!grad.all_finite()) throw NumericError("run_attack: non-finite gradient at iteration " +
                                               std::to_string(t));
    const float scale =
        recipe.stage == GradStage::sim ? 1.f / float(cfg.sim_copies)
        : recipe.stage == GradStage::admix ? 1.f / float(cfg.admix_mixes * cfg.sim_copies)
        : recipe.stage == GradStage::aait ? 1.f / float(cfg.copies)
                                          : 1.f;
    if (scale != 1.f)
      for (long i = 0; i < grad.size(); ++i) grad[i] *= scale;

    Tensor step_grad;
    if (recipe.mi) {
      momentum = mi_accumulate(momentum, grad, cfg.decay, &result.zero_grad_seen);
      step_grad = momentum;
    } else {
      step_grad = std::move(grad);
    }
    if (recipe.tim) step_grad = ti_smooth(kernel, step_grad);

    for (long i = 0; i < result.x_adv.size(); ++i) {
      const float g = step_grad[i];
      const float upd = g > 0.f ? cfg.alpha : (g < 0.f ? -cfg.alpha : 0.f);
      float v = result.x_adv[i] - upd;
      v = std::clamp(v, x[i] - cfg.epsilon, x[i] + cfg.epsilon);
      result.x_adv[i] = std::clamp(v, 0.f, 1.f);
    }
    result.loss_trace.push_back(loss_value);
    if (callback && !callback(t, result.x_adv)) break;
  }
  return result;
}

}  // namespace aait
