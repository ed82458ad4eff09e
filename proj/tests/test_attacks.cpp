#include "doctest.h"
#include "helpers.hpp"

#include <cmath>

#include "aait/attacks.hpp"

using namespace aait;
using namespace aait::testing;

TEST_SUITE_BEGIN("attacks");

TEST_CASE("gaussian kernel normalization and shape") {
  for (int size : {1, 3, 5, 7})
    for (float sigma : {0.8f, 3.f, 10.f}) {
      TiKernel k = gaussian_kernel(size, sigma);
      CHECK(std::fabs(k.weights.sum() - 1.0) < 1e-9);
      // symmetric under reflection
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
          CHECK(k.weights.at(0, 0, y, x) == k.weights.at(0, 0, size - 1 - y, x));
          CHECK(k.weights.at(0, 0, y, x) == k.weights.at(0, 0, y, size - 1 - x));
        }
    }
  TiKernel unit = gaussian_kernel(1, 2.f);
  CHECK(unit.weights[0] == doctest::Approx(1.0));
  CHECK_THROWS_AS(gaussian_kernel(4, 1.f), DomainError);

  // center entry against the direct formula on the integer grid
  TiKernel k = gaussian_kernel(5, 3.f);
  double total = 0.0;
  for (int y = -2; y <= 2; ++y)
    for (int x = -2; x <= 2; ++x) total += std::exp(-(y * y + x * x) / 18.0);
  CHECK(k.weights.at(0, 0, 2, 2) == doctest::Approx(1.0 / total).epsilon(1e-6));
}

TEST_CASE("ti_smooth equals the double-loop convolution") {
  Rng rng(71);
  TiKernel k = gaussian_kernel(5, 3.f);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor g(Shape(2, 3, 9, 9));
    g.fill_normal(rng, 1.f);
    Tensor ours = ti_smooth(k, g);
    Tensor oracle = naive_conv_same(k.weights, g);
    double worst = 0.0;
    for (long i = 0; i < g.size(); ++i)
      worst = std::max(worst, std::fabs(double(ours[i]) - oracle[i]));
    CHECK(worst < 1e-6);
  }
  // constant field: interior stays constant
  Tensor flat(Shape(1, 1, 9, 9), 0.7f);
  Tensor sm = ti_smooth(k, flat);
  for (int y = 2; y < 7; ++y)
    for (int x = 2; x < 7; ++x) CHECK(sm.at(0, 0, y, x) == doctest::Approx(0.7f).epsilon(1e-6));
  // impulse: kernel stamped at the impulse
  Tensor imp(Shape(1, 1, 9, 9));
  imp.at(0, 0, 4, 4) = 1.f;
  Tensor st = ti_smooth(k, imp);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 5; ++x)
      CHECK(st.at(0, 0, 2 + y, 2 + x) == doctest::Approx(k.weights.at(0, 0, y, x)).epsilon(1e-6));
}

TEST_CASE("mi_accumulate recursion") {
  Tensor z(Shape(1, 1, 1, 1));
  Tensor g1 = z, gm1 = z, g0 = z;
  g1[0] = 1.f;
  gm1[0] = -1.f;
  // scalar sequence (1, -1, 1) at decay 1 -> momentum (1, 0, 1)
  Tensor m = mi_accumulate(z, g1, 1.f);
  CHECK(m[0] == doctest::Approx(1.f));
  m = mi_accumulate(m, gm1, 1.f);
  CHECK(m[0] == doctest::Approx(0.f));
  m = mi_accumulate(m, g1, 1.f);
  CHECK(m[0] == doctest::Approx(1.f));

  // decay 0 is the memoryless normalized gradient
  Tensor g(Shape(2, 1, 2, 2));
  Rng rng(72);
  g.fill_normal(rng, 1.f);
  Tensor prev(g.shape());
  prev.fill(3.f);
  Tensor out = mi_accumulate(prev, g, 0.f);
  for (int i = 0; i < 2; ++i) {
    double l1 = 0.0;
    for (int j = 0; j < 4; ++j) l1 += std::fabs(g[i * 4 + j]);
    for (int j = 0; j < 4; ++j)
      CHECK(out[i * 4 + j] == doctest::Approx(g[i * 4 + j] / l1).epsilon(1e-5));
  }

  // zero gradient keeps decay * prev and raises the flag
  std::vector<uint8_t> flags(2, 0);
  Tensor zg(g.shape());
  Tensor kept = mi_accumulate(prev, zg, 0.5f, &flags);
  CHECK(flags[0] == 1);
  CHECK(kept[0] == doctest::Approx(1.5f));
}

TEST_CASE("fgsm matches the closed form on a linear model") {
  Rng rng(73);
  const int side = 4, classes = 3;
  LinearClassifier model = LinearClassifier::random(classes, side, rng);
  Tensor x(Shape(2, 3, side, side), 0.5f);
  const std::vector<int> y_t = {1, 2};
  const float eps = 16.f / 255.f;
  Tensor adv = fgsm(model, x, y_t, eps, LossKind::logit);
  // d(-logit_t)/dx = -W_t row; step = x - eps*sign(-W_t) = x + eps*sign(W_t)
  const long d = 3 * side * side;
  for (int i = 0; i < 2; ++i)
    for (long j = 0; j < d; ++j) {
      const float w = model.weights()[y_t[size_t(i)] * d + j];
      const float expect = std::clamp(0.5f + (w > 0.f ? eps : (w < 0.f ? -eps : 0.f)), 0.f, 1.f);
      CHECK(adv[i * d + j] == doctest::Approx(expect).epsilon(1e-6));
    }

  // eps = 0 returns x
  Tensor same = fgsm(model, x, y_t, 0.f, LossKind::logit);
  for (long i = 0; i < x.size(); ++i) CHECK(same[i] == x[i]);
}

TEST_CASE("sim gradient equals the closed-form scale average on a linear model") {
  Rng rng(74);
  const int side = 4;
  LinearClassifier model = LinearClassifier::random(3, side, rng);
  Tensor x = random_image_batch(2, side, rng);
  const std::vector<int> y_t = {0, 2};
  const int copies = 4;
  Tensor g = sim_gradient(model, x, y_t, copies, LossKind::logit);
  // d/dx mean_i [-(W (x/2^i) + b)_t] = -(1/m) sum_i W_t / 2^i / n_batch
  const long d = 3 * side * side;
  double scale_sum = 0.0;
  for (int i = 0; i < copies; ++i) scale_sum += std::ldexp(1.0, -i);
  for (int i = 0; i < 2; ++i)
    for (long j = 0; j < d; ++j) {
      const double expect =
          -model.weights()[y_t[size_t(i)] * d + j] * scale_sum / copies / 2.0;
      CHECK(g[i * d + j] == doctest::Approx(expect).epsilon(1e-4));
    }

  // single copy is the plain gradient
  Tensor g1 = sim_gradient(model, x, y_t, 1, LossKind::logit);
  for (int i = 0; i < 2; ++i)
    for (long j = 0; j < d; ++j)
      CHECK(g1[i * d + j] ==
            doctest::Approx(-model.weights()[y_t[size_t(i)] * d + j] / 2.0).epsilon(1e-4));
}

TEST_CASE("admix gradient reductions") {
  Rng rng(75);
  const int side = 4;
  LinearClassifier model = LinearClassifier::random(3, side, rng);
  Tensor x = random_image_batch(2, side, rng);
  Tensor pool = random_image_batch(3, side, rng);
  const std::vector<int> y_t = {1, 0};
  const std::vector<std::vector<int>> pool_of = {{0, 1}, {2}};

  // weight 0 reduces to sim_gradient
  Tensor ga = admix_gradient(model, x, y_t, pool, pool_of, 2, 0.f, 3, LossKind::logit, rng);
  Tensor gs = sim_gradient(model, x, y_t, 3, LossKind::logit);
  for (long i = 0; i < ga.size(); ++i) CHECK(ga[i] == doctest::Approx(gs[i]).epsilon(1e-4));
  CHECK(ga.shape() == x.shape());

  // linear model: gradient is independent of the mixed content, single
  // mix/scale equals the plain gradient
  Tensor g1 = admix_gradient(model, x, y_t, pool, pool_of, 1, 0.2f, 1, LossKind::logit, rng);
  const long d = 3 * side * side;
  for (int i = 0; i < 2; ++i)
    for (long j = 0; j < d; ++j)
      CHECK(g1[i * d + j] ==
            doctest::Approx(-model.weights()[y_t[size_t(i)] * d + j] / 2.0).epsilon(1e-4));

  CHECK_THROWS_AS(
      admix_gradient(model, x, y_t, pool, {{0}, {}}, 1, 0.2f, 1, LossKind::logit, rng),
      DomainError);
}

TEST_CASE("aait gradient with identity and flip policies on a linear model") {
  Rng rng(76);
  const int side = 4;
  LinearClassifier model = LinearClassifier::random(3, side, rng);
  Tensor x = random_image_batch(2, side, rng);
  const std::vector<int> y_t = {2, 1};
  const long d = 3 * side * side;

  Policy identity;
  identity.sub_policies = {SubPolicy{{OperationParams{OperationKind::flip, 0.f, 0.5f}}}};
  Tensor g1 = aait_gradient(model, identity, x, y_t, 1, LossKind::logit, rng);
  Tensor g5 = aait_gradient(model, identity, x, y_t, 5, LossKind::logit, rng);
  for (long i = 0; i < g1.size(); ++i) CHECK(g1[i] == doctest::Approx(g5[i]).epsilon(1e-5));
  for (int i = 0; i < 2; ++i)
    for (long j = 0; j < d; ++j)
      CHECK(g1[i * d + j] ==
            doctest::Approx(-model.weights()[y_t[size_t(i)] * d + j] / 2.0).epsilon(1e-4));

  // always-flip policy: gradient is the flipped weight row
  Policy flipper;
  flipper.sub_policies = {SubPolicy{{OperationParams{OperationKind::flip, 1.f, 0.5f}}}};
  Tensor gf = aait_gradient(model, flipper, x, y_t, 3, LossKind::logit, rng);
  for (int i = 0; i < 2; ++i)
    for (int c = 0; c < 3; ++c)
      for (int yy = 0; yy < side; ++yy)
        for (int xx = 0; xx < side; ++xx) {
          const long widx = y_t[size_t(i)] * d + (long(c) * side + yy) * side + (side - 1 - xx);
          const long gidx = (long(i) * 3 + c) * side * side + long(yy) * side + xx;
          CHECK(gf[gidx] == doctest::Approx(-model.weights()[widx] / 2.0).epsilon(1e-4));
        }
}

TEST_CASE("dim transform geometry and firing rate") {
  Rng rng(77);
  Tensor x = random_image_batch(2, 32, rng);
  // probability 0: identity
  Var same = dim_transform(make_const(x), 0.f, 40, rng);
  for (long i = 0; i < x.size(); ++i) CHECK(same->val[i] == x[i]);
  // firing rate 0.7 within two points over 10000 trials
  int fired = 0;
  const int trials = 10000;
  Tensor tiny = random_image_batch(1, 4, rng);
  for (int t = 0; t < trials; ++t) {
    Var out = dim_transform(make_const(tiny), 0.7f, 6, rng);
    if (out->val.shape().h == 6) ++fired;
  }
  CHECK(std::fabs(fired / double(trials) - 0.7) < 0.02);
  // when it fires the output side is exactly dim_max
  for (int t = 0; t < 50; ++t) {
    Var out = dim_transform(make_const(tiny), 1.f, 6, rng);
    CHECK(out->val.shape().h == 6);
    CHECK(out->val.shape().w == 6);
  }
  CHECK_THROWS_AS(dim_transform(make_const(x), 0.5f, 31, rng), DomainError);
}

TEST_CASE("run_attack reduces to iterated targeted FGSM") {
  Rng rng(78);
  const int side = 5;
  LinearClassifier model = LinearClassifier::random(4, side, rng);
  Tensor x = random_image_batch(3, side, rng);
  const std::vector<int> y_true = {0, 1, 2};
  const std::vector<int> y_t = {1, 2, 3};

  AttackConfig cfg;
  cfg.iters = 20;
  cfg.decay = 0.f;
  cfg.copies = 1;
  cfg.seed = 5;
  Recipe recipe;  // no DIM/TIM, plain stage
  recipe.mi = true;

  AttackResult res = run_attack(model, x, y_true, y_t, cfg, recipe);

  // oracle: iterate x <- clip(x - alpha * sign(grad)) with the closed-form
  // linear gradient
  Tensor ref = x;
  const long d = 3 * side * side;
  for (int t = 0; t < cfg.iters; ++t) {
    for (int i = 0; i < 3; ++i)
      for (long j = 0; j < d; ++j) {
        const float g = -model.weights()[y_t[size_t(i)] * d + j];
        float v = ref[i * d + j] - (g > 0.f ? cfg.alpha : (g < 0.f ? -cfg.alpha : 0.f));
        v = std::clamp(v, x[i * d + j] - cfg.epsilon, x[i * d + j] + cfg.epsilon);
        ref[i * d + j] = std::clamp(v, 0.f, 1.f);
      }
  }
  for (long i = 0; i < x.size(); ++i)
    CHECK(res.x_adv[i] == doctest::Approx(ref[i]).epsilon(1e-6));
}

TEST_CASE("iterates stay inside the epsilon ball and unit box") {
  Rng rng(79);
  LinearClassifier model = LinearClassifier::random(4, 8, rng);
  Tensor x = random_image_batch(4, 8, rng);
  for (long i = 0; i < x.size(); ++i) x[i] = float(std::lround(x[i] * 255.f)) / 255.f;
  const std::vector<int> y_true = {0, 1, 2, 3};
  const std::vector<int> y_t = {1, 2, 3, 0};

  Policy flip_policy;
  flip_policy.sub_policies = {SubPolicy{{OperationParams{OperationKind::flip, 0.7f, 0.5f}}}};

  for (const char* name : {"dtmi", "si-dtmi", "admix-dtmi", "aait-dtmi", "ifgsm"}) {
    Recipe recipe = parse_recipe(name, &flip_policy);
    AttackConfig cfg;
    cfg.iters = 8;
    cfg.seed = 11;
    bool ok = true;
    auto cb = [&](int, const Tensor& adv) {
      for (long i = 0; i < adv.size(); ++i) {
        if (adv[i] < 0.f || adv[i] > 1.f) ok = false;
        if (std::fabs(adv[i] - x[i]) > cfg.epsilon + 1e-9f) ok = false;
      }
      return true;
    };
    run_attack(model, x, y_true, y_t, cfg, recipe, cb);
    CAPTURE(name);
    CHECK(ok);
  }
}

TEST_CASE("loss trace is finite under the logit loss") {
  Rng rng(80);
  LinearClassifier model = LinearClassifier::random(3, 6, rng);
  Tensor x = random_image_batch(2, 6, rng);
  AttackConfig cfg;
  cfg.iters = 12;
  Recipe recipe = parse_recipe("mi", nullptr);
  AttackResult res = run_attack(model, x, {0, 1}, {1, 0}, cfg, recipe);
  CHECK(res.loss_trace.size() == 12);
  for (float v : res.loss_trace) CHECK(std::isfinite(v));
}

TEST_CASE("recipe parsing and validation") {
  Policy p;
  p.sub_policies = {SubPolicy{{OperationParams{OperationKind::flip, 1.f, 0.5f}}}};
  Recipe r = parse_recipe("aait-dtmi", &p);
  CHECK(r.dim);
  CHECK(r.tim);
  CHECK(r.mi);
  CHECK(r.stage == GradStage::aait);
  CHECK_THROWS_AS(parse_recipe("sim,admix", nullptr), ConfigError);
  CHECK_THROWS_AS(parse_recipe("aait-dtmi", nullptr), ConfigError);
  CHECK_THROWS_AS(parse_recipe("dtmi,bogus", nullptr), ConfigError);
  Recipe combo = parse_recipe("di,ti,mi,si", nullptr);
  CHECK(combo.stage == GradStage::sim);
}

TEST_CASE("same seed reproduces the adversary exactly") {
  Rng rng(81);
  LinearClassifier model = LinearClassifier::random(3, 6, rng);
  Tensor x = random_image_batch(3, 6, rng);
  Policy p;
  p.sub_policies = {SubPolicy{{OperationParams{OperationKind::rotate, 0.8f, 0.7f}}}};
  Recipe recipe = parse_recipe("aait-dtmi", &p);
  AttackConfig cfg;
  cfg.iters = 6;
  cfg.seed = 303;
  AttackResult a = run_attack(model, x, {0, 1, 2}, {1, 2, 0}, cfg, recipe);
  AttackResult b = run_attack(model, x, {0, 1, 2}, {1, 2, 0}, cfg, recipe);
  for (long i = 0; i < x.size(); ++i) CHECK(a.x_adv[i] == b.x_adv[i]);
}

TEST_SUITE_END();
