#ifndef AAIT_SURROGATES_HPP
#define AAIT_SURROGATES_HPP

#include <memory>
#include <string>
#include <vector>

#include "aait/nn.hpp"

namespace aait {

struct TrainingFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Frozen forward map from [0,1] image batches to logits. Preprocessing
// (per-channel normalization) happens inside forward so attacks work in
// plain pixel space.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual Var forward(const Var& images) = 0;
  virtual int num_classes() const = 0;
  virtual int input_side() const = 0;
  virtual std::string id() const = 0;

  Tensor logits(const Tensor& images) { return forward(make_const(images))->val; }
  std::vector<int> predict(const Tensor& images);
};

// Small CIFAR-scale CNN zoo. Architecture ids:
//   resnet20s  - 3x3 stride-2 stem, 3 stages of 3 basic blocks, widths 12/24/48
//   vgg11s     - VGG-style conv/maxpool stack with batchnorm
//   mobiles    - depthwise-separable stack
class CnnClassifier : public Classifier {
 public:
  CnnClassifier(const std::string& arch_id, int classes, int input_side, uint64_t init_seed);

  Var forward(const Var& images) override;
  int num_classes() const override { return classes_; }
  int input_side() const override { return input_side_; }
  std::string id() const override { return arch_id_; }

  void set_training(bool on);
  ParamStore& params() { return params_; }
  float recorded_accuracy() const { return recorded_accuracy_; }
  void set_recorded_accuracy(float a) { recorded_accuracy_ = a; }
  uint64_t seed() const { return seed_; }

  void save(const std::string& path) const;
  static std::unique_ptr<CnnClassifier> load(const std::string& path);

 private:
  std::string arch_id_;
  int classes_, input_side_;
  uint64_t seed_;
  float recorded_accuracy_ = 0.f;
  bool training_ = false;
  ParamStore params_;
  std::vector<float> norm_mean_{0.5f, 0.5f, 0.5f}, norm_sd_{0.25f, 0.25f, 0.25f};

  struct Block;
  std::vector<Block> blocks_;
  Linear head_;
  std::vector<BatchNorm2d*> bns_;

};

class EnsembleClassifier : public Classifier {
 public:
  explicit EnsembleClassifier(std::vector<std::shared_ptr<Classifier>> members);
  Var forward(const Var& images) override;
  int num_classes() const override { return members_[0]->num_classes(); }
  int input_side() const override { return members_[0]->input_side(); }
  std::string id() const override;

 private:
  std::vector<std::shared_ptr<Classifier>> members_;
};

// Thin view over a labeled image set used by training and evaluation.
struct LabeledData {
  Tensor images;            // (N,3,H,W) in [0,1]
  std::vector<int> labels;  // size N
  int size() const { return images.shape().n; }
};

struct TrainOptions {
  int epochs = 15;
  int batch_size = 64;
  float lr = 1e-3f;
  float weight_decay = 1e-4f;
  float accuracy_floor = 0.70f;
  bool augment = true;  // pad-4 random crop + horizontal flip
  uint64_t seed = 1;
  bool verbose = true;
};

// Trains a fresh classifier and records its test accuracy in the instance.
// Throws TrainingFailure when the floor is missed.
std::unique_ptr<CnnClassifier> train_surrogate(const std::string& arch_id,
                                               const LabeledData& train,
                                               const LabeledData& test,
                                               const TrainOptions& opt);

float classifier_accuracy(Classifier& model, const LabeledData& data, int batch_size = 128);

std::unique_ptr<Classifier> load_classifier(const std::string& path);

}  // namespace aait

#endif
