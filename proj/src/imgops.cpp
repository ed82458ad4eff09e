#include "aait/imgops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace aait {

namespace {

constexpr float kGateEps = 1e-4f;   // keeps the concrete gate's logit finite at p in {0,1}
constexpr float kSolarTau = 0.1f;   // solarize surrogate sharpness
constexpr float kQuantTau = 0.1f;   // posterize surrogate sharpness
constexpr double kDegToRad = 0.017453292519943295;

struct OpInfo {
  OpFamily fam;
  bool magnitude;
  const char* name;
  float lo, hi;
  bool discretize;
};

const OpInfo& info(OperationKind k) {
  static const OpInfo table[] = {
      {OpFamily::affine, true, "ShearX", -0.3f, 0.3f, false},
      {OpFamily::affine, true, "ShearY", -0.3f, 0.3f, false},
      {OpFamily::affine, true, "TranslateX", -0.45f, 0.45f, false},
      {OpFamily::affine, true, "TranslateY", -0.45f, 0.45f, false},
      {OpFamily::affine, true, "Rotate", -30.f, 30.f, false},
      {OpFamily::affine, false, "Flip", 0.f, 0.f, false},
      {OpFamily::color, true, "Solarize", 0.f, 1.f, true},
      {OpFamily::color, true, "Posterize", 1.f, 8.f, true},
      {OpFamily::color, false, "Invert", 0.f, 0.f, false},
      {OpFamily::color, true, "Contrast", 0.1f, 1.9f, false},
      {OpFamily::color, true, "Color", 0.1f, 1.9f, false},
      {OpFamily::color, true, "Brightness", 0.1f, 1.9f, false},
      {OpFamily::color, true, "Sharpness", 0.1f, 1.9f, false},
      {OpFamily::color, false, "AutoContrast", 0.f, 0.f, false},
      {OpFamily::color, false, "Equalize", 0.f, 0.f, false},
  };
  const int i = int(k);
  if (i < 0 || i >= int(std::size(table))) throw DomainError("invalid operation kind");
  return table[i];
}

// mapped = center + (mu - 0.5) * span, exact identity at mu = 0.5
Var map_magnitude(OperationKind k, const Var& mu) {
  const OpInfo& oi = info(k);
  const float span = oi.hi - oi.lo;
  const float center = 0.5f * (oi.hi + oi.lo);
  return add_scalar(mul_scalar(add_scalar(mu, -0.5f), span), center);
}

Var scalar_const(float x) { return make_scalar(x); }

Var warp(const Var& x, const Var& mat) {
  const Shape& s = x->val.shape();
  return affine_sample(x, mat, s.h, s.w);
}

Var op_shear_x(const Var& mu, const Var& x) {
  Var s = map_magnitude(OperationKind::shear_x, mu);
  Var one = scalar_const(1.f), zero = scalar_const(0.f);
  return warp(x, affine_mat(one, s, zero, zero, one, zero));
}

Var op_shear_y(const Var& mu, const Var& x) {
  Var s = map_magnitude(OperationKind::shear_y, mu);
  Var one = scalar_const(1.f), zero = scalar_const(0.f);
  return warp(x, affine_mat(one, zero, zero, s, one, zero));
}

Var op_translate_x(const Var& mu, const Var& x) {
  // fraction of the side; a shift of t maps to 2t in normalized coordinates
  Var t = mul_scalar(map_magnitude(OperationKind::translate_x, mu), 2.f);
  Var one = scalar_const(1.f), zero = scalar_const(0.f);
  return warp(x, affine_mat(one, zero, t, zero, one, zero));
}

Var op_translate_y(const Var& mu, const Var& x) {
  Var t = mul_scalar(map_magnitude(OperationKind::translate_y, mu), 2.f);
  Var one = scalar_const(1.f), zero = scalar_const(0.f);
  return warp(x, affine_mat(one, zero, zero, zero, one, t));
}

Var op_rotate(const Var& mu, const Var& x) {
  Var rad = mul_scalar(map_magnitude(OperationKind::rotate, mu), float(kDegToRad));
  Var c = vcos(rad), s = vsin(rad);
  Var zero = scalar_const(0.f);
  return warp(x, affine_mat(c, neg(s), zero, s, c, zero));
}

// forward: exact threshold inversion; backward: sigmoid blend surrogate
Var op_solarize(const Var& thr, const Var& x) {
  const float t = thr->val[0];
  Tensor out(x->val.shape());
  const long n = out.size();
  for (long i = 0; i < n; ++i) {
    const float v = x->val[i];
    out[i] = v > t ? 1.f - v : v;
  }
  return make_op(std::move(out), {x, thr}, [](Node& self) {
    Node& px = *self.parents[0];
    Node& pt = *self.parents[1];
    const float t = pt.val[0];
    const long n = self.val.size();
    double dt = 0.0;
    if (px.needs_grad) px.ensure_grad();
    for (long i = 0; i < n; ++i) {
      const float g = self.grad[i];
      if (g == 0.f) continue;
      const float v = px.val[i];
      const float m = 1.f / (1.f + std::exp(-(v - t) / kSolarTau));
      const float dm = m * (1.f - m) / kSolarTau;  // d m / d v; d m / d t = -dm
      if (px.needs_grad) px.grad[i] += g * (1.f + dm * (1.f - 2.f * v) - 2.f * m);
      dt += double(g) * (-dm) * (1.f - 2.f * v);
    }
    if (pt.needs_grad) {
      pt.ensure_grad();
      pt.grad[0] += float(dt);
    }
  });
}

// forward: keep the top `bits` of the 8-bit value; backward: smooth
// staircase in both pixel and (continuous) bit count
Var op_posterize(const Var& bits_cont, const Var& x) {
  const float beta = bits_cont->val[0];
  const int bits = std::clamp(int(std::lround(beta)), 1, 8);
  Tensor out(x->val.shape());
  const long n = out.size();
  if (bits >= 8) {
    out = x->val;  // full depth: exact identity
  } else {
    const int shift = 8 - bits;
    for (long i = 0; i < n; ++i) {
      const int q = int(std::lround(std::clamp(x->val[i], 0.f, 1.f) * 255.f));
      out[i] = float((q >> shift) << shift) / 255.f;
    }
  }
  return make_op(std::move(out), {x, bits_cont}, [](Node& self) {
    Node& px = *self.parents[0];
    Node& pb = *self.parents[1];
    const double beta = pb.val[0];
    const double levels = std::exp2(beta) - 1.0;     // continuous level count
    const double dlevels = std::exp2(beta) * M_LN2;  // d levels / d beta
    const long n = self.val.size();
    double db = 0.0;
    if (px.needs_grad) px.ensure_grad();
    for (long i = 0; i < n; ++i) {
      const float g = self.grad[i];
      if (g == 0.f) continue;
      const double t = double(px.val[i]) * levels;
      const double fr = t - std::floor(t);
      const double sg = 1.0 / (1.0 + std::exp(-(fr - 0.5) / kQuantTau));
      const double soft = std::floor(t) + sg;           // soft_round(t)
      const double dsoft = sg * (1.0 - sg) / kQuantTau;  // d soft_round / d t
      if (px.needs_grad) px.grad[i] += g * float(dsoft);
      // d/d beta of soft_round(x*levels)/levels
      db += double(g) * dlevels * (dsoft * px.val[i] - soft / levels) / levels;
    }
    if (pb.needs_grad) {
      pb.ensure_grad();
      pb.grad[0] += float(db);
    }
  });
}

Var op_invert(const Var& x) { return add_scalar(neg(x), 1.f); }

Var enhance_blend(const Var& x, const Var& base, const Var& factor) {
  // base + factor * (x - base)
  return add(base, mul_b(sub(x, base), factor));
}

Var op_contrast(const Var& mu, const Var& x) {
  Var f = map_magnitude(OperationKind::contrast, mu);
  Var m = mean_per_image(gray_luma(x));  // (N,1,1,1)
  Var centered = add_b(x, neg(m));
  return add_b(mul_b(centered, f), m);
}

Var op_color(const Var& mu, const Var& x) {
  Var f = map_magnitude(OperationKind::color, mu);
  Var g = expand_c(gray_luma(x), x->val.shape().c);
  return enhance_blend(x, g, f);
}

Var op_brightness(const Var& mu, const Var& x) {
  Var f = map_magnitude(OperationKind::brightness, mu);
  return mul_b(x, f);
}

Var op_sharpness(const Var& mu, const Var& x) {
  const Shape& s = x->val.shape();
  Var f = map_magnitude(OperationKind::sharpness, mu);
  Tensor k(Shape(s.c, 1, 3, 3));
  for (int c = 0; c < s.c; ++c) {
    static const float kv[9] = {1, 1, 1, 1, 5, 1, 1, 1, 1};
    for (int i = 0; i < 9; ++i) k.at(c, 0, i / 3, i % 3) = kv[i] / 13.f;
  }
  Var smoothed = conv2d_dw(x, make_const(std::move(k)), nullptr, 1, 1);
  // border pixels stay untouched, as the PIL-family smooth filter does
  Tensor border(s), interior(s);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < s.h; ++y)
        for (int xx = 0; xx < s.w; ++xx) {
          const bool edge = y == 0 || xx == 0 || y == s.h - 1 || xx == s.w - 1;
          border.at(n, c, y, xx) = edge ? 1.f : 0.f;
          interior.at(n, c, y, xx) = edge ? 0.f : 1.f;
        }
  Var base = add(mul_const(x, std::move(border)), mul_const(smoothed, std::move(interior)));
  return enhance_blend(x, base, f);
}

// per-image, per-channel min/max stretch; extrema treated as constants
Var op_auto_contrast(const Var& x) {
  const Shape& s = x->val.shape();
  const long plane = long(s.h) * s.w;
  Tensor out(s);
  Tensor scale(Shape(s.n, s.c, 1, 1));
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const float* src = &x->val.at(n, c, 0, 0);
      float lo = src[0], hi = src[0];
      for (long j = 1; j < plane; ++j) {
        lo = std::min(lo, src[j]);
        hi = std::max(hi, src[j]);
      }
      float* dst = &out.at(n, c, 0, 0);
      if (hi - lo < 1e-6f) {
        std::copy(src, src + plane, dst);
        scale.at(n, c, 0, 0) = 1.f;
      } else {
        const float inv = 1.f / (hi - lo);
        for (long j = 0; j < plane; ++j) dst[j] = (src[j] - lo) * inv;
        scale.at(n, c, 0, 0) = inv;
      }
    }
  auto sp = std::make_shared<Tensor>(std::move(scale));
  return make_op(std::move(out), {x}, [sp](Node& self) {
    Node& px = *self.parents[0];
    if (!px.needs_grad) return;
    px.ensure_grad();
    const Shape& s = px.val.shape();
    const long plane = long(s.h) * s.w;
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c) {
        const float inv = sp->at(n, c, 0, 0);
        const float* g = &self.grad.at(n, c, 0, 0);
        float* dst = &px.grad.at(n, c, 0, 0);
        for (long j = 0; j < plane; ++j) dst[j] += g[j] * inv;
      }
  });
}

// forward: classic 256-bin histogram equalization; backward: identity
Var op_equalize(const Var& x) {
  const Shape& s = x->val.shape();
  const long plane = long(s.h) * s.w;
  Tensor out(s);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const float* src = &x->val.at(n, c, 0, 0);
      int hist[256] = {0};
      for (long j = 0; j < plane; ++j)
        ++hist[int(std::lround(std::clamp(src[j], 0.f, 1.f) * 255.f))];
      long total = 0;
      int last_nonzero = 0;
      for (int b = 0; b < 256; ++b)
        if (hist[b]) {
          total += hist[b];
          last_nonzero = b;
        }
      int lut[256];
      const long step = (total - hist[last_nonzero]) / 255;
      if (step == 0) {
        for (int b = 0; b < 256; ++b) lut[b] = b;
      } else {
        long acc = step / 2;
        for (int b = 0; b < 256; ++b) {
          lut[b] = int(std::min<long>(255, acc / step));
          acc += hist[b];
        }
      }
      float* dst = &out.at(n, c, 0, 0);
      for (long j = 0; j < plane; ++j)
        dst[j] = float(lut[int(std::lround(std::clamp(src[j], 0.f, 1.f) * 255.f))]) / 255.f;
    }
  return make_op(std::move(out), {x}, [](Node& self) {
    Node& px = *self.parents[0];
    if (!px.needs_grad) return;
    px.ensure_grad();
    const long n = self.val.size();
    for (long i = 0; i < n; ++i) px.grad[i] += self.grad[i];
  });
}

}  // namespace

OpFamily family(OperationKind k) { return info(k).fam; }
bool has_magnitude(OperationKind k) { return info(k).magnitude; }
std::string to_string(OperationKind k) { return info(k).name; }

OperationKind operation_from_string(const std::string& s) {
  for (int i = 0; i < 15; ++i)
    if (s == info(OperationKind(i)).name) return OperationKind(i);
  throw ParseError("unknown operation: " + s);
}

MagnitudeMap magnitude_map(OperationKind k) {
  const OpInfo& oi = info(k);
  if (!oi.magnitude) throw DomainError(std::string(oi.name) + " has no magnitude");
  return MagnitudeMap{k, oi.lo, oi.hi, oi.discretize};
}

const std::vector<OperationKind>& affine_vocabulary() {
  static const std::vector<OperationKind> v = {
      OperationKind::shear_x,     OperationKind::shear_y, OperationKind::translate_x,
      OperationKind::translate_y, OperationKind::rotate,  OperationKind::flip};
  return v;
}

const std::vector<OperationKind>& color_vocabulary() {
  static const std::vector<OperationKind> v = {
      OperationKind::solarize,   OperationKind::posterize, OperationKind::invert,
      OperationKind::contrast,   OperationKind::color,     OperationKind::brightness,
      OperationKind::sharpness,  OperationKind::auto_contrast, OperationKind::equalize};
  return v;
}

const std::vector<OperationKind>& full_vocabulary() {
  static const std::vector<OperationKind> v = [] {
    std::vector<OperationKind> all = affine_vocabulary();
    const auto& c = color_vocabulary();
    all.insert(all.end(), c.begin(), c.end());
    return all;
  }();
  return v;
}

Var apply_operation(OperationKind kind, const Var& magnitude, const Var& batch) {
  const OpInfo& oi = info(kind);
  if (oi.magnitude) {
    if (!magnitude || magnitude->val.size() != 1)
      throw DomainError(std::string(oi.name) + ": magnitude must be a scalar");
    const float m = magnitude->val[0];
    if (m < 0.f || m > 1.f)
      throw DomainError(std::string(oi.name) + ": magnitude " + std::to_string(m) +
                        " outside [0,1]");
  }
  switch (kind) {
    case OperationKind::shear_x:
      return clamp01(op_shear_x(magnitude, batch));
    case OperationKind::shear_y:
      return clamp01(op_shear_y(magnitude, batch));
    case OperationKind::translate_x:
      return clamp01(op_translate_x(magnitude, batch));
    case OperationKind::translate_y:
      return clamp01(op_translate_y(magnitude, batch));
    case OperationKind::rotate:
      return clamp01(op_rotate(magnitude, batch));
    case OperationKind::flip:
      return clamp01(flip_h(batch));
    case OperationKind::solarize:
      return clamp01(op_solarize(map_magnitude(kind, magnitude), batch));
    case OperationKind::posterize:
      return clamp01(op_posterize(map_magnitude(kind, magnitude), batch));
    case OperationKind::invert:
      return clamp01(op_invert(batch));
    case OperationKind::contrast:
      return clamp01(op_contrast(magnitude, batch));
    case OperationKind::color:
      return clamp01(op_color(magnitude, batch));
    case OperationKind::brightness:
      return clamp01(op_brightness(magnitude, batch));
    case OperationKind::sharpness:
      return clamp01(op_sharpness(magnitude, batch));
    case OperationKind::auto_contrast:
      return clamp01(op_auto_contrast(batch));
    case OperationKind::equalize:
      return clamp01(op_equalize(batch));
  }
  throw DomainError("invalid operation kind");
}

Tensor apply_operation(OperationKind kind, float magnitude, const Tensor& batch) {
  return apply_operation(kind, make_scalar(magnitude), make_const(batch))->val;
}

Var gated_apply(OperationKind kind, const Var& magnitude, const Var& probability,
                float temperature, const Var& batch, GateMode mode, Rng& rng) {
  if (temperature <= 0.f)
    throw DomainError("gated_apply: temperature must be positive, got " +
                      std::to_string(temperature));
  if (!probability || probability->val.size() != 1)
    throw DomainError("gated_apply: probability must be a scalar");
  const float p = probability->val[0];
  if (p < 0.f || p > 1.f)
    throw DomainError("gated_apply: probability " + std::to_string(p) + " outside [0,1]");

  if (mode == GateMode::attack) {
    if (!rng.bernoulli(p)) return batch;
    return apply_operation(kind, magnitude, batch);
  }

  // concrete relaxation: m = sigmoid((logit(p) + logistic noise) / temperature)
  const double u = rng.uniform_open();
  const float noise = float(std::log(u) - std::log1p(-u));
  Var pc = clamp_ste(probability, kGateEps, 1.f - kGateEps);
  Var z = add_scalar(sub(vlog(pc), vlog(add_scalar(neg(pc), 1.f))), noise);
  Var gate = sigmoid(mul_scalar(z, 1.f / temperature));
  Var transformed = apply_operation(kind, magnitude, batch);
  return add(batch, mul_b(sub(transformed, batch), gate));
}

double finite_difference_check(OperationKind kind, float magnitude, const Tensor& batch,
                               float h) {
  const OpInfo& oi = info(kind);
  if (!oi.magnitude || oi.discretize)
    throw UnsupportedOperation(std::string(oi.name) +
                               ": finite differences need a continuous magnitude");
  const Shape& s = batch.shape();
  const int my = std::max(1, s.h / 4), mx = std::max(1, s.w / 4);
  const int ch = s.h - 2 * my, cw = s.w - 2 * mx;

  auto objective = [&](const Var& mu) {
    Var out = apply_operation(kind, mu, make_const(batch));
    return mean_all(square(crop_hw(out, my, mx, ch, cw)));
  };

  Var mu = make_leaf(Tensor::scalar(magnitude), true);
  Var phi = objective(mu);
  backward(phi);
  const double analytic = mu->grad[0];

  const double lo = objective(make_scalar(magnitude - h))->val[0];
  const double hi = objective(make_scalar(magnitude + h))->val[0];
  const double fd = (hi - lo) / (2.0 * double(h));
  return std::fabs(analytic - fd);
}

}  // namespace aait
