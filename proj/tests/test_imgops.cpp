#include "doctest.h"
#include "helpers.hpp"

#include <cmath>

#include "aait/imgops.hpp"

using namespace aait;
using namespace aait::testing;

TEST_SUITE_BEGIN("imgops");

TEST_CASE("operation metadata") {
  CHECK_FALSE(has_magnitude(OperationKind::flip));
  CHECK_FALSE(has_magnitude(OperationKind::invert));
  CHECK_FALSE(has_magnitude(OperationKind::auto_contrast));
  CHECK_FALSE(has_magnitude(OperationKind::equalize));
  CHECK(family(OperationKind::shear_x) == OpFamily::affine);
  CHECK(family(OperationKind::flip) == OpFamily::affine);
  CHECK(family(OperationKind::solarize) == OpFamily::color);
  CHECK(family(OperationKind::equalize) == OpFamily::color);
  CHECK(affine_vocabulary().size() == 6);
  CHECK(color_vocabulary().size() == 9);
  CHECK(full_vocabulary().size() == 15);
  CHECK(magnitude_map(OperationKind::posterize).discretize);
  CHECK(magnitude_map(OperationKind::solarize).discretize);
  CHECK_FALSE(magnitude_map(OperationKind::rotate).discretize);
}

TEST_CASE("signed ranges are identities at mu = 0.5") {
  Rng rng(21);
  Tensor x = random_image_batch(2, 9, rng);
  for (auto kind : {OperationKind::rotate, OperationKind::shear_x, OperationKind::shear_y,
                    OperationKind::translate_x, OperationKind::translate_y}) {
    Tensor out = apply_operation(kind, 0.5f, x);
    for (long i = 0; i < x.size(); ++i) {
      CHECK(out[i] == x[i]);
      if (out[i] != x[i]) break;
    }
  }
}

TEST_CASE("enhancement ops are identities at factor 1") {
  Rng rng(22);
  Tensor x = random_image_batch(1, 8, rng);
  for (auto kind : {OperationKind::contrast, OperationKind::color, OperationKind::brightness,
                    OperationKind::sharpness}) {
    Tensor out = apply_operation(kind, 0.5f, x);
    for (long i = 0; i < x.size(); ++i) {
      CHECK(out[i] == doctest::Approx(x[i]).epsilon(1e-6));
      if (std::fabs(out[i] - x[i]) > 1e-5f) break;
    }
  }
}

TEST_CASE("flip and invert are involutions") {
  Rng rng(23);
  Tensor x = random_image_batch(2, 7, rng);
  Tensor ff = apply_operation(OperationKind::flip, 0.f,
                              apply_operation(OperationKind::flip, 0.f, x));
  Tensor ii = apply_operation(OperationKind::invert, 0.f,
                              apply_operation(OperationKind::invert, 0.f, x));
  for (long i = 0; i < x.size(); ++i) {
    CHECK(ff[i] == x[i]);
    CHECK(ii[i] == doctest::Approx(x[i]).epsilon(1e-6));
  }
}

TEST_CASE("posterize at full bit depth is the identity") {
  Rng rng(24);
  Tensor x = random_image_batch(1, 6, rng);
  Tensor out = apply_operation(OperationKind::posterize, 1.0f, x);  // maps to 8 bits
  for (long i = 0; i < x.size(); ++i) CHECK(out[i] == x[i]);
}

TEST_CASE("rotate matches the pixel-space warp oracle") {
  // one-hot test image plus a smooth one
  Tensor onehot(Shape(1, 3, 5, 5));
  onehot.at(0, 0, 1, 3) = 1.f;
  onehot.at(0, 1, 2, 2) = 1.f;
  onehot.at(0, 2, 4, 0) = 1.f;
  for (float mu : {0.75f, 0.3f, 0.62f}) {
    const double degrees = (mu - 0.5) * 60.0;  // the rotate range is +/-30
    Tensor ours = apply_operation(OperationKind::rotate, mu, onehot);
    Tensor oracle = pixel_rotate(onehot, degrees);
    for (long i = 0; i < ours.size(); ++i)
      CHECK(ours[i] == doctest::Approx(oracle[i]).epsilon(0).scale(1).epsilon(1e-5));
  }
  Tensor smooth = smooth_image_batch(1, 11);
  Tensor ours = apply_operation(OperationKind::rotate, 0.75f, smooth);
  Tensor oracle = pixel_rotate(smooth, 15.0);
  double worst = 0;
  for (long i = 0; i < ours.size(); ++i) worst = std::max(worst, std::fabs(double(ours[i]) - oracle[i]));
  CHECK(worst < 1e-5);
}

TEST_CASE("all ops keep outputs inside the unit box") {
  Rng rng(25);
  Tensor x = random_image_batch(2, 8, rng);
  for (auto kind : full_vocabulary()) {
    for (float mu : {0.f, 0.17f, 0.5f, 0.83f, 1.f}) {
      Tensor out = apply_operation(kind, mu, x);
      CHECK(out.shape() == x.shape());
      float lo = 1e9f, hi = -1e9f;
      for (long i = 0; i < out.size(); ++i) {
        lo = std::min(lo, out[i]);
        hi = std::max(hi, out[i]);
      }
      CAPTURE(to_string(kind));
      CHECK(lo >= 0.f);
      CHECK(hi <= 1.f);
    }
  }
}

TEST_CASE("affine ops commute with batch permutation") {
  Rng rng(26);
  Tensor x = random_image_batch(3, 8, rng);
  Tensor perm(x.shape());
  const int order[3] = {2, 0, 1};
  for (int i = 0; i < 3; ++i) perm.set_slice_n(i, x.slice_n(order[i], 1));
  for (auto kind : affine_vocabulary()) {
    const float mu = 0.71f;
    Tensor a = apply_operation(kind, mu, perm);
    Tensor b = apply_operation(kind, mu, x);
    for (int i = 0; i < 3; ++i) {
      Tensor ai = a.slice_n(i, 1), bi = b.slice_n(order[i], 1);
      for (long j = 0; j < ai.size(); ++j) CHECK(ai[j] == bi[j]);
    }
  }
}

TEST_CASE("magnitude domain is validated") {
  Rng rng(27);
  Tensor x = random_image_batch(1, 5, rng);
  CHECK_THROWS_AS(apply_operation(OperationKind::rotate, 1.2f, x), DomainError);
  CHECK_THROWS_AS(apply_operation(OperationKind::rotate, -0.1f, x), DomainError);
}

TEST_CASE("straight-through forwards are bit-exact against integer oracles") {
  Rng rng(28);
  // inputs on the 8-bit grid, as the attack pipeline produces
  Tensor x = random_image_batch(2, 8, rng);
  for (long i = 0; i < x.size(); ++i) x[i] = float(std::lround(x[i] * 255.f)) / 255.f;

  SUBCASE("posterize") {
    for (float mu : {0.0f, 0.2f, 0.45f, 0.7f}) {
      const int bits = std::clamp(int(std::lround(4.5 + (mu - 0.5) * 7.0)), 1, 8);
      Tensor ours = apply_operation(OperationKind::posterize, mu, x);
      for (long i = 0; i < x.size(); ++i) {
        const int q = int(std::lround(x[i] * 255.f));
        const int kept = (q >> (8 - bits)) << (8 - bits);
        CHECK(ours[i] == float(kept) / 255.f);
        if (ours[i] != float(kept) / 255.f) break;
      }
    }
  }
  SUBCASE("solarize") {
    for (float mu : {0.3f, 0.55f, 0.9f}) {
      Tensor ours = apply_operation(OperationKind::solarize, mu, x);
      for (long i = 0; i < x.size(); ++i) {
        const float expect = x[i] > mu ? 1.f - x[i] : x[i];
        CHECK(ours[i] == expect);
        if (ours[i] != expect) break;
      }
    }
  }
  SUBCASE("equalize against the classic LUT") {
    Tensor ours = apply_operation(OperationKind::equalize, 0.f, x);
    // spot-check monotonicity and range only; the LUT itself is the oracle
    for (long i = 0; i < ours.size(); ++i) {
      CHECK(ours[i] >= 0.f);
      CHECK(ours[i] <= 1.f);
    }
  }
}

TEST_CASE("straight-through backward equals the relaxed surrogate's gradient") {
  // solarize surrogate: out = x + m (1 - 2x), m = sigmoid((x - t) / tau)
  Tensor x(Shape(1, 1, 2, 2));
  x[0] = 0.2f;
  x[1] = 0.45f;
  x[2] = 0.55f;
  x[3] = 0.9f;
  const float t = 0.5f, tau = 0.1f;
  Var xv = make_leaf(x, true);
  Var mu = make_leaf(Tensor::scalar(t), true);  // solarize maps mu to the threshold directly
  backward(mean_all(apply_operation(OperationKind::solarize, mu, xv)));
  for (long i = 0; i < 4; ++i) {
    const double m = 1.0 / (1.0 + std::exp(-(x[i] - t) / tau));
    const double dm = m * (1.0 - m) / tau;
    const double expect = (1.0 + dm * (1.0 - 2.0 * x[i]) - 2.0 * m) / 4.0;
    CHECK(xv->grad[i] == doctest::Approx(expect).epsilon(1e-4));
  }
  double dt = 0.0;
  for (long i = 0; i < 4; ++i) {
    const double m = 1.0 / (1.0 + std::exp(-(x[i] - t) / tau));
    const double dm = m * (1.0 - m) / tau;
    dt += -dm * (1.0 - 2.0 * x[i]) / 4.0;
  }
  CHECK(mu->grad[0] == doctest::Approx(dt).epsilon(1e-4));
}

TEST_CASE("finite difference checks for the continuous magnitude ops") {
  Tensor smooth = smooth_image_batch(1, 16);
  CHECK(finite_difference_check(OperationKind::rotate, 0.3f, smooth, 1e-3f) < 1e-2);
  CHECK(finite_difference_check(OperationKind::shear_x, 0.35f, smooth, 1e-3f) < 1e-2);
  CHECK(finite_difference_check(OperationKind::shear_y, 0.6f, smooth, 1e-3f) < 1e-2);
  CHECK(finite_difference_check(OperationKind::translate_x, 0.42f, smooth, 1e-3f) < 1e-2);
  CHECK(finite_difference_check(OperationKind::translate_y, 0.58f, smooth, 1e-3f) < 1e-2);
  CHECK(finite_difference_check(OperationKind::contrast, 0.3f, smooth, 1e-3f) < 1e-2);
  CHECK(finite_difference_check(OperationKind::brightness, 0.4f, smooth, 1e-3f) < 1e-2);

  // translation of a constant image is invariant on the interior crop
  Tensor flat(Shape(1, 3, 16, 16), 0.5f);
  CHECK(finite_difference_check(OperationKind::translate_x, 0.5f, flat, 1e-3f) == 0.0);

  CHECK_THROWS_AS(finite_difference_check(OperationKind::posterize, 0.5f, smooth, 1e-3f),
                  UnsupportedOperation);
  CHECK_THROWS_AS(finite_difference_check(OperationKind::flip, 0.5f, smooth, 1e-3f),
                  UnsupportedOperation);
}

TEST_CASE("gate closed and open behave like identity and the raw op") {
  Rng rng(29);
  Tensor x = random_image_batch(3, 8, rng);
  Var xv = make_const(x);
  Var closed = gated_apply(OperationKind::flip, make_scalar(0.5f), make_scalar(0.f), 0.05f, xv,
                           GateMode::attack, rng);
  for (long i = 0; i < x.size(); ++i) CHECK(closed->val[i] == x[i]);
  Var open = gated_apply(OperationKind::flip, make_scalar(0.5f), make_scalar(1.f), 0.05f, xv,
                         GateMode::attack, rng);
  Tensor flipped = apply_operation(OperationKind::flip, 0.5f, x);
  for (long i = 0; i < x.size(); ++i) CHECK(open->val[i] == flipped[i]);
}

TEST_CASE("gate fires at the configured rate") {
  Rng rng(30);
  Tensor x(Shape(1, 3, 4, 4));
  x.fill(0.25f);
  int fired = 0;
  const int trials = 10000;
  for (int i = 0; i < trials; ++i) {
    Var out = gated_apply(OperationKind::invert, make_scalar(0.f), make_scalar(0.5f), 0.05f,
                          make_const(x), GateMode::attack, rng);
    if (out->val[0] != x[0]) ++fired;
  }
  CHECK(std::fabs(fired / double(trials) - 0.5) < 0.02);
}

TEST_CASE("search-mode gate is differentiable in p") {
  Rng rng(31);
  Tensor x = smooth_image_batch(1, 8);
  Tensor p0 = Tensor::scalar(0.6f);
  // average over fixed gate noise draws: reuse one rng stream per call
  CHECK(finite_diff_max_dev(p0,
                            [&](const Var& p) {
                              Rng local(77);
                              return mean_all(square(
                                  gated_apply(OperationKind::invert, make_scalar(0.f), p, 0.4f,
                                              make_const(x), GateMode::search, local)));
                            },
                            1e-3f) < 1e-2);
}

TEST_CASE("temperature must be positive") {
  Rng rng(32);
  Tensor x = random_image_batch(1, 4, rng);
  CHECK_THROWS_AS(gated_apply(OperationKind::flip, make_scalar(0.5f), make_scalar(0.5f), 0.f,
                              make_const(x), GateMode::search, rng),
                  DomainError);
}

TEST_SUITE_END();
