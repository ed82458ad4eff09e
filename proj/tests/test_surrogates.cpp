#include "doctest.h"
#include "helpers.hpp"

#include <cstdio>
#include <filesystem>

#include "aait/dataset.hpp"
#include "aait/surrogates.hpp"

using namespace aait;
using namespace aait::testing;

TEST_SUITE_BEGIN("surrogates");

namespace {

std::string work_path(const std::string& name) {
  std::filesystem::create_directories(AAIT_WORK_DIR);
  return std::string(AAIT_WORK_DIR) + "/" + name;
}

LabeledData tiny_dataset(int n, uint64_t seed) {
  SynthOptions opt;
  opt.count = n;
  opt.seed = seed;
  return generate_synthetic(opt);
}

}  // namespace

TEST_CASE("forward pass is deterministic and finite for all architectures") {
  Rng rng(101);
  Tensor probe = random_image_batch(4, 32, rng);
  for (const char* arch : {"resnet20s", "vgg11s", "mobiles", "tinycnn"}) {
    CnnClassifier model(arch, 10, 32, 42);
    Tensor a = model.logits(probe);
    Tensor b = model.logits(probe);
    CHECK(a.shape() == Shape(4, 10, 1, 1));
    CHECK(a.all_finite());
    for (long i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  }
  CHECK_THROWS_AS(CnnClassifier("nope", 10, 32, 1), ConfigError);
}

TEST_CASE("training reaches the floor, fails with zero epochs, reproduces with a seed") {
  LabeledData train = tiny_dataset(1500, 5);
  LabeledData test = tiny_dataset(300, 6);

  TrainOptions opt;
  opt.epochs = 4;
  opt.batch_size = 64;
  opt.seed = 3;
  opt.verbose = false;
  opt.accuracy_floor = 0.70f;

  auto model = train_surrogate("tinycnn", train, test, opt);
  CHECK(model->recorded_accuracy() >= 0.70f);

  SUBCASE("zero epochs is near chance and fails the floor") {
    TrainOptions zero = opt;
    zero.epochs = 0;
    float seen = -1.f;
    try {
      train_surrogate("tinycnn", train, test, zero);
      FAIL("expected TrainingFailure");
    } catch (const TrainingFailure& e) {
      const std::string msg = e.what();
      const auto at = msg.find("reached only ");
      REQUIRE(at != std::string::npos);
      seen = std::stof(msg.substr(at + 13));
    }
    CHECK(seen >= 0.f);
    CHECK(seen <= 35.f);  // percent, near the 10% chance level
  }

  SUBCASE("same seed twice records the same accuracy") {
    auto again = train_surrogate("tinycnn", train, test, opt);
    CHECK(again->recorded_accuracy() == model->recorded_accuracy());
  }

  SUBCASE("checkpoint round trip reproduces logits and accuracy") {
    const std::string path = work_path("tiny.ckpt");
    model->save(path);
    auto loaded = load_classifier(path);
    Rng rng(102);
    Tensor probe = random_image_batch(6, 32, rng);
    Tensor a = model->logits(probe), b = loaded->logits(probe);
    for (long i = 0; i < a.size(); ++i)
      CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-6));
    auto* cnn = dynamic_cast<CnnClassifier*>(loaded.get());
    REQUIRE(cnn);
    CHECK(cnn->recorded_accuracy() == model->recorded_accuracy());
    CHECK(std::fabs(classifier_accuracy(*loaded, test) - model->recorded_accuracy()) < 1e-3f);
  }

  SUBCASE("corrupted checkpoint is rejected") {
    const std::string path = work_path("corrupt.ckpt");
    model->save(path);
    {
      std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
      f.seekp(200);
      const char junk[4] = {'X', 'X', 'X', 'X'};
      f.write(junk, 4);
    }
    CHECK_THROWS_AS(load_classifier(path), ParseError);
  }
}

TEST_CASE("ensemble logits are the member mean and order invariant") {
  auto m1 = std::make_shared<CnnClassifier>("tinycnn", 10, 32, 1);
  auto m2 = std::make_shared<CnnClassifier>("tinycnn", 10, 32, 2);
  auto m3 = std::make_shared<CnnClassifier>("tinycnn", 10, 32, 3);
  Rng rng(103);
  Tensor probe = random_image_batch(3, 32, rng);

  EnsembleClassifier ens({m1, m2, m3});
  EnsembleClassifier ens_rev({m3, m1, m2});
  Tensor le = ens.logits(probe);
  Tensor lr = ens_rev.logits(probe);
  Tensor l1 = m1->logits(probe), l2 = m2->logits(probe), l3 = m3->logits(probe);
  for (long i = 0; i < le.size(); ++i) {
    CHECK(le[i] == doctest::Approx((l1[i] + l2[i] + l3[i]) / 3.f).epsilon(1e-6));
    CHECK(le[i] == doctest::Approx(lr[i]).epsilon(1e-6));
  }
}

TEST_SUITE_END();
