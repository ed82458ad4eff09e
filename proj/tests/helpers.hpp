#ifndef AAIT_TEST_HELPERS_HPP
#define AAIT_TEST_HELPERS_HPP

#include <cmath>
#include <functional>
#include <vector>

#include "aait/graph.hpp"
#include "aait/surrogates.hpp"

namespace aait::testing {

// Hand-built linear model logits = W x + b over flattened pixels; closed
// forms for every attack oracle fall out of it.
class LinearClassifier : public Classifier {
 public:
  LinearClassifier(int classes, int side, Tensor w, Tensor b)
      : classes_(classes), side_(side), w_(make_const(std::move(w))),
        b_(make_const(std::move(b))) {}

  static LinearClassifier random(int classes, int side, Rng& rng) {
    Tensor w(Shape(classes, 3 * side * side, 1, 1));
    w.fill_normal(rng, 0.05f);
    Tensor b(Shape(classes, 1, 1, 1));
    b.fill_normal(rng, 0.01f);
    return LinearClassifier(classes, side, std::move(w), std::move(b));
  }

  Var forward(const Var& x) override { return linear(flatten(x), w_, b_); }
  int num_classes() const override { return classes_; }
  int input_side() const override { return side_; }
  std::string id() const override { return "linear"; }

  const Tensor& weights() const { return w_->val; }
  const Tensor& bias() const { return b_->val; }

 private:
  int classes_, side_;
  Var w_, b_;
};

// Central finite differences of a scalar-valued graph builder against the
// tape gradient. Returns the max absolute deviation over checked entries.
inline double finite_diff_max_dev(const Tensor& x0,
                                  const std::function<Var(const Var&)>& f, float h,
                                  int max_checks = 64) {
  Var x = make_leaf(x0, true);
  Var y = f(x);
  backward(y);
  Tensor analytic = x->grad;

  double worst = 0.0;
  const long n = x0.size();
  const long stride = std::max<long>(1, n / max_checks);
  for (long i = 0; i < n; i += stride) {
    Tensor xp = x0, xm = x0;
    xp[i] += h;
    xm[i] -= h;
    const double fp = f(make_const(xp))->val[0];
    const double fm = f(make_const(xm))->val[0];
    const double fd = (fp - fm) / (2.0 * h);
    worst = std::max(worst, std::fabs(fd - analytic[i]));
  }
  return worst;
}

// Naive double-loop same-padding depthwise convolution; ti_smooth oracle.
inline Tensor naive_conv_same(const Tensor& kernel, const Tensor& g) {
  const Shape& s = g.shape();
  const int ks = kernel.shape().h, half = ks / 2;
  Tensor out(s);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) {
          double acc = 0.0;
          for (int ky = 0; ky < ks; ++ky)
            for (int kx = 0; kx < ks; ++kx) {
              const int iy = y + ky - half, ix = x + kx - half;
              if (iy >= 0 && iy < s.h && ix >= 0 && ix < s.w)
                acc += double(g.at(n, c, iy, ix)) * kernel.at(0, 0, ky, kx);
            }
          out.at(n, c, y, x) = float(acc);
        }
  return out;
}

// Pixel-space inverse-warp rotation with bilinear sampling and zero padding
// around the align-corners image center; imgops rotate oracle.
inline Tensor pixel_rotate(const Tensor& img, double degrees) {
  const Shape& s = img.shape();
  const double rad = degrees * M_PI / 180.0;
  const double ca = std::cos(rad), sa = std::sin(rad);
  const double cx = (s.w - 1) / 2.0, cy = (s.h - 1) / 2.0;
  Tensor out(s);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) {
          const double dx = x - cx, dy = y - cy;
          const double sx = ca * dx - sa * dy + cx;
          const double sy = sa * dx + ca * dy + cy;
          const int x0 = int(std::floor(sx)), y0 = int(std::floor(sy));
          const double wx = sx - x0, wy = sy - y0;
          auto pix = [&](int yy, int xx) -> double {
            return (xx >= 0 && xx < s.w && yy >= 0 && yy < s.h) ? img.at(n, c, yy, xx) : 0.0;
          };
          out.at(n, c, y, x) =
              float((1 - wy) * ((1 - wx) * pix(y0, x0) + wx * pix(y0, x0 + 1)) +
                    wy * ((1 - wx) * pix(y0 + 1, x0) + wx * pix(y0 + 1, x0 + 1)));
        }
  return out;
}

inline Tensor random_image_batch(int n, int side, Rng& rng) {
  Tensor t(Shape(n, 3, side, side));
  t.fill_uniform(rng, 0.f, 1.f);
  return t;
}

// Smooth low-frequency test image; finite differences behave on it.
inline Tensor smooth_image_batch(int n, int side) {
  Tensor t(Shape(n, 3, side, side));
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x)
          t.at(i, c, y, x) =
              0.5f + 0.35f * std::sin(2.2f * (float(x) / side + 0.3f * c + 0.17f * i)) *
                         std::cos(1.7f * float(y) / side);
  return t;
}

}  // namespace aait::testing

#endif
