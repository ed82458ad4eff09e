#ifndef AAIT_SEARCH_HPP
#define AAIT_SEARCH_HPP

#include <memory>
#include <string>
#include <vector>

#include "aait/losses.hpp"
#include "aait/nn.hpp"
#include "aait/policy.hpp"
#include "aait/surrogates.hpp"

namespace aait {

struct SearchConfig {
  float eta = 0.3f;  // classification loss coefficient
  int epochs = 20;
  float temperature = 0.05f;
  float learning_rate = 1e-3f;
  float beta1 = 0.f, beta2 = 0.999f;
  int chunk_size = 8;
  float gp_coefficient = 10.f;
  int batch_size = 32;
  LossKind loss = LossKind::logit;
  uint64_t seed = 1;
  int sub_policies = 10;
  int ops_per_subpolicy = 2;
  Vocabulary vocabulary = Vocabulary::affine_only;
  bool verbose = true;
};

// Scalar-output convolutional critic for the Wasserstein estimate: three
// stride-2 conv blocks with leaky relu, global average, linear head. The
// head starts at zero so an untrained critic scores every batch 0.
class Critic {
 public:
  explicit Critic(uint64_t seed);

  Var forward(const Var& x);  // -> (N,1,1,1)
  std::vector<Var> parameters() { return params_.params(); }
  ParamStore& params() { return params_; }

  // d/d(input) of the summed scores, plus the leaky-relu masks of the
  // primal pass (needed to linearize the critic around it).
  struct PrimalTrace {
    std::vector<Tensor> masks;
  };
  Var forward_traced(const Var& x, PrimalTrace* trace);
  // score of the linearized critic applied to tangent v, using a primal
  // trace; shares weight nodes so gradients reach the parameters
  Var tangent_score(const Var& v, const PrimalTrace& trace);

 private:
  ParamStore params_;
  Conv2d c1_, c2_, c3_;
  Linear head_;
};

// Random disjoint halves whose sizes differ by at most one.
std::pair<std::vector<int>, std::vector<int>> split_indices(int n, Rng& rng);
std::pair<Tensor, Tensor> split_batch(const Tensor& batch, Rng& rng);

// mean critic score on transformed A minus mean score on B.
float critic_distance(Critic& critic, const Tensor& a_transformed, const Tensor& b);

struct CriticStats {
  float distance = 0.f;
  float gradient_penalty = 0.f;
};

// One ascent step on distance - gp_coefficient * penalty over interpolates.
CriticStats critic_update(Critic& critic, Adam& optim, const Tensor& a_transformed,
                          const Tensor& b, float gp_coefficient, Rng& rng);

// l = mean J(f(A'), y_A) + mean J(f(B), y_B); the B term carries no
// gradient for the policy parameters.
float classification_loss(Classifier& model, const Tensor& a_transformed,
                          const std::vector<int>& targets_a, const Tensor& b,
                          const std::vector<int>& targets_b, LossKind kind);

struct TargetedDataset {
  Tensor images;             // (N,3,H,W) in [0,1]
  std::vector<int> targets;  // target class per image
  int size() const { return images.shape().n; }
};

struct EpochLog {
  int epoch = 0;
  float d = 0.f;
  float l = 0.f;
  float objective = 0.f;
  double wallclock_s = 0.0;
};

Policy run_search(const TargetedDataset& data, Classifier& model, const SearchConfig& cfg,
                  std::vector<EpochLog>* log = nullptr);

void write_search_log(const std::vector<EpochLog>& log, const std::string& path,
                      const std::string& fingerprint);

// Mean target-class logit under `draws` random policy applications
// (attack-mode gates); pass nullptr for the identity baseline.
float mean_target_logit(Classifier& model, const Policy* policy, const Tensor& images,
                        const std::vector<int>& targets, Rng& rng, int draws = 8);

}  // namespace aait

#endif
