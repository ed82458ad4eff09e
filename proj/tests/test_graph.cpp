#include "doctest.h"
#include "helpers.hpp"

#include "aait/graph.hpp"
#include "aait/nn.hpp"

using namespace aait;
using namespace aait::testing;

TEST_SUITE_BEGIN("graph");

TEST_CASE("elementwise gradients match finite differences") {
  Rng rng(11);
  Tensor x0(Shape(2, 3, 5, 5));
  x0.fill_uniform(rng, 0.2f, 0.8f);

  auto check = [&](const std::function<Var(const Var&)>& f, double tol = 2e-3) {
    CHECK(finite_diff_max_dev(x0, f, 1e-3f) < tol);
  };

  check([](const Var& x) { return mean_all(square(x)); });
  check([](const Var& x) { return mean_all(vexp(mul_scalar(x, 0.5f))); });
  check([](const Var& x) { return mean_all(vlog(add_scalar(x, 0.5f))); });
  check([](const Var& x) { return mean_all(vsqrt(add_scalar(x, 0.5f))); });
  check([](const Var& x) { return mean_all(sigmoid(x)); });
  check([](const Var& x) { return mean_all(vsin(x)); });
  check([](const Var& x) { return mean_all(vcos(x)); });
  check([](const Var& x) { return mean_all(leaky_relu(add_scalar(x, -0.5f), 0.2f)); });
  check([](const Var& x) { return mean_all(mul(x, add_scalar(x, 1.f))); });
  check([](const Var& x) { return mean_all(sub(square(x), x)); });
  check([&](const Var& x) { return mean_all(gray_luma(x)); });
  check([&](const Var& x) { return mean_all(square(mean_per_image(x))); });
  check([&](const Var& x) { return mean_all(square(flip_h(x))); });
  check([&](const Var& x) { return mean_all(square(crop_hw(x, 1, 1, 3, 3))); });
  check([&](const Var& x) { return mean_all(square(pad_hw(x, 1, 2, 0, 1))); });
  check([&](const Var& x) { return mean_all(square(expand_c(gray_luma(x), 3))); });
  check([&](const Var& x) {
    return mean_all(square(channel_norm(x, {0.4f, 0.5f, 0.6f}, {0.2f, 0.3f, 0.25f})));
  });
}

TEST_CASE("broadcast ops route gradients to both operands") {
  Rng rng(12);
  Tensor x0(Shape(3, 2, 4, 4));
  x0.fill_uniform(rng, 0.f, 1.f);
  Tensor s0(Shape(3, 1, 1, 1));
  s0.fill_uniform(rng, 0.5f, 1.5f);

  Var x = make_leaf(x0, true);
  Var s = make_leaf(s0, true);
  backward(mean_all(square(mul_b(x, s))));

  // d/ds mean((x*s)^2) = 2 s * sum_i x_i^2 / total
  const long per = x0.shape().per_image();
  const long total = x0.size();
  for (int i = 0; i < 3; ++i) {
    double sq = 0.0;
    for (long j = 0; j < per; ++j) sq += double(x0[i * per + j]) * x0[i * per + j];
    CHECK(s->grad[i] == doctest::Approx(2.0 * s0[i] * sq / double(total)).epsilon(1e-4));
  }
  CHECK(x->grad[0] == doctest::Approx(2.0 * x0[0] * s0[0] * s0[0] / double(total)).epsilon(1e-4));
}

TEST_CASE("conv2d matches finite differences in x, w and b") {
  Rng rng(13);
  Tensor x0(Shape(2, 3, 6, 6));
  x0.fill_uniform(rng, -0.5f, 0.5f);
  Tensor w0(Shape(4, 3, 3, 3));
  w0.fill_normal(rng, 0.3f);
  Tensor b0(Shape(4, 1, 1, 1));
  b0.fill_normal(rng, 0.1f);

  for (int stride : {1, 2}) {
    CHECK(finite_diff_max_dev(x0,
                              [&](const Var& x) {
                                return mean_all(square(
                                    conv2d(x, make_const(w0), make_const(b0), stride, 1)));
                              },
                              1e-3f) < 5e-3);
    CHECK(finite_diff_max_dev(w0,
                              [&](const Var& w) {
                                return mean_all(square(
                                    conv2d(make_const(x0), w, make_const(b0), stride, 1)));
                              },
                              1e-3f) < 5e-3);
    CHECK(finite_diff_max_dev(b0,
                              [&](const Var& b) {
                                return mean_all(square(
                                    conv2d(make_const(x0), make_const(w0), b, stride, 1)));
                              },
                              1e-3f) < 5e-3);
  }
}

TEST_CASE("depthwise conv gradients") {
  Rng rng(14);
  Tensor x0(Shape(2, 4, 6, 6));
  x0.fill_uniform(rng, -0.5f, 0.5f);
  Tensor w0(Shape(4, 1, 3, 3));
  w0.fill_normal(rng, 0.3f);
  CHECK(finite_diff_max_dev(x0,
                            [&](const Var& x) {
                              return mean_all(square(conv2d_dw(x, make_const(w0), nullptr, 1, 1)));
                            },
                            1e-3f) < 5e-3);
  CHECK(finite_diff_max_dev(w0,
                            [&](const Var& w) {
                              return mean_all(square(conv2d_dw(make_const(x0), w, nullptr, 2, 1)));
                            },
                            1e-3f) < 5e-3);
}

TEST_CASE("linear, pools and batchnorm gradients") {
  Rng rng(15);
  Tensor x0(Shape(3, 4, 4, 4));
  x0.fill_uniform(rng, -1.f, 1.f);
  Tensor w0(Shape(5, 4, 1, 1));
  w0.fill_normal(rng, 0.4f);
  Tensor b0(Shape(5, 1, 1, 1));
  b0.fill_normal(rng, 0.1f);

  CHECK(finite_diff_max_dev(x0,
                            [&](const Var& x) {
                              return mean_all(square(
                                  linear(global_avg_pool(x), make_const(w0), make_const(b0))));
                            },
                            1e-3f) < 5e-3);
  CHECK(finite_diff_max_dev(x0,
                            [&](const Var& x) { return mean_all(square(maxpool2(x))); },
                            1e-4f) < 5e-3);
  CHECK(finite_diff_max_dev(x0,
                            [&](const Var& x) { return mean_all(square(avgpool2(x))); },
                            1e-3f) < 5e-3);

  Tensor gamma(Shape(4, 1, 1, 1), 1.2f), beta(Shape(4, 1, 1, 1), 0.1f);
  SUBCASE("training mode, x grad") {
    Tensor rm(Shape(4, 1, 1, 1)), rv(Shape(4, 1, 1, 1), 1.f);
    CHECK(finite_diff_max_dev(x0,
                              [&](const Var& x) {
                                Tensor rm2 = rm, rv2 = rv;
                                return mean_all(square(batchnorm(x, make_const(gamma),
                                                                 make_const(beta), rm2, rv2,
                                                                 true)));
                              },
                              1e-3f) < 1e-2);
  }
  SUBCASE("training mode, gamma/beta grads") {
    Tensor rm(Shape(4, 1, 1, 1)), rv(Shape(4, 1, 1, 1), 1.f);
    CHECK(finite_diff_max_dev(gamma,
                              [&](const Var& g) {
                                Tensor rm2 = rm, rv2 = rv;
                                return mean_all(square(
                                    batchnorm(make_const(x0), g, make_const(beta), rm2, rv2,
                                              true)));
                              },
                              1e-3f) < 1e-2);
    CHECK(finite_diff_max_dev(beta,
                              [&](const Var& b) {
                                Tensor rm2 = rm, rv2 = rv;
                                return mean_all(square(
                                    batchnorm(make_const(x0), make_const(gamma), b, rm2, rv2,
                                              true)));
                              },
                              1e-3f) < 1e-2);
  }
  SUBCASE("eval mode") {
    Tensor rm(Shape(4, 1, 1, 1), 0.2f), rv(Shape(4, 1, 1, 1), 0.8f);
    CHECK(finite_diff_max_dev(x0,
                              [&](const Var& x) {
                                return mean_all(square(batchnorm(x, make_const(gamma),
                                                                 make_const(beta), rm, rv,
                                                                 false)));
                              },
                              1e-3f) < 5e-3);
  }
}

TEST_CASE("affine_sample identity is bit exact") {
  Rng rng(16);
  Tensor x0 = random_image_batch(2, 7, rng);
  Tensor ident(Shape(1, 6, 1, 1));
  ident[0] = 1.f;
  ident[4] = 1.f;
  Var out = affine_sample(make_const(x0), make_const(ident), 7, 7);
  for (long i = 0; i < x0.size(); ++i) CHECK(out->val[i] == x0[i]);
}

TEST_CASE("affine_sample gradients in x and matrix") {
  Rng rng(17);
  Tensor x0 = smooth_image_batch(1, 8);
  Tensor m0(Shape(1, 6, 1, 1));
  m0[0] = 0.9f;
  m0[1] = 0.15f;
  m0[2] = 0.05f;
  m0[3] = -0.1f;
  m0[4] = 1.05f;
  m0[5] = -0.03f;
  CHECK(finite_diff_max_dev(x0,
                            [&](const Var& x) {
                              return mean_all(square(affine_sample(x, make_const(m0), 8, 8)));
                            },
                            1e-3f) < 5e-3);
  CHECK(finite_diff_max_dev(m0,
                            [&](const Var& m) {
                              return mean_all(square(affine_sample(make_const(x0), m, 8, 8)));
                            },
                            1e-3f) < 1e-2);
}

TEST_CASE("resize_bilinear round trip shape and gradient") {
  Rng rng(18);
  Tensor x0 = smooth_image_batch(1, 6);
  Var out = resize_bilinear(make_const(x0), 9, 9);
  CHECK(out->val.shape() == Shape(1, 3, 9, 9));
  CHECK(finite_diff_max_dev(x0,
                            [&](const Var& x) { return mean_all(square(resize_bilinear(x, 9, 9))); },
                            1e-3f) < 5e-3);
}

TEST_CASE("gather and cross entropy") {
  Tensor lg(Shape(2, 3, 1, 1));
  lg[0] = 0.f;
  lg[1] = 3.f;
  lg[2] = 0.f;
  lg[3] = 1.f;
  lg[4] = 1.f;
  lg[5] = 1.f;
  Var logits = make_leaf(lg, true);
  Var picked = gather_classes(logits, {1, 0});
  CHECK(picked->val[0] == 3.f);
  CHECK(picked->val[1] == 1.f);

  // uniform logits: CE = ln C
  Var ce = cross_entropy_vec(logits, {1, 0});
  CHECK(ce->val[1] == doctest::Approx(std::log(3.0)).epsilon(1e-5));

  backward(mean_all(cross_entropy_vec(logits, {1, 0})));
  // gradient = (softmax - onehot) / n
  const float p0 = std::exp(0.f) / (std::exp(0.f) + std::exp(3.f) + std::exp(0.f));
  CHECK(logits->grad[0] == doctest::Approx(p0 / 2.f).epsilon(1e-4));

  CHECK_THROWS_AS(gather_classes(make_const(lg), {3, 0}), DomainError);
}

TEST_CASE("concat and slice are inverse") {
  Rng rng(19);
  Tensor a = random_image_batch(2, 4, rng), b = random_image_batch(3, 4, rng);
  Var joined = concat_n({make_const(a), make_const(b)});
  CHECK(joined->val.shape().n == 5);
  Var back = slice_n(joined, 2, 3);
  for (long i = 0; i < b.size(); ++i) CHECK(back->val[i] == b[i]);
}

TEST_CASE("adam converges on a quadratic") {
  Var w = make_leaf(Tensor::scalar(4.f), true);
  Adam opt({w}, 0.1f, 0.9f, 0.999f);
  for (int i = 0; i < 300; ++i) {
    w->zero_grad();
    backward(square(add_scalar(w, -1.5f)));
    opt.step();
  }
  CHECK(w->val[0] == doctest::Approx(1.5f).epsilon(1e-2));
}

TEST_SUITE_END();
