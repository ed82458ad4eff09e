#ifndef AAIT_ATTACKS_HPP
#define AAIT_ATTACKS_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "aait/losses.hpp"
#include "aait/policy.hpp"
#include "aait/surrogates.hpp"

namespace aait {

struct AttackConfig {
  float epsilon = 16.f / 255.f;  // L-inf budget in pixel units
  float alpha = 2.f / 255.f;     // step size
  int iters = 300;
  float decay = 1.0f;  // momentum factor
  int copies = 5;      // policy-transformed copies averaged per step
  float dim_probability = 0.7f;
  int dim_max_size = 0;  // 0 = derive from input side (299 -> 330, 32 -> 40)
  int ti_kernel_size = 5;
  float ti_sigma = 3.0f;
  int sim_copies = 5;
  int admix_mixes = 3;
  float admix_weight = 0.2f;
  LossKind loss = LossKind::logit;
  uint64_t seed = 0;

  int resolved_dim_max(int side) const;
};

enum class GradStage { plain, sim, admix, aait };

struct Recipe {
  bool dim = false;
  bool tim = false;
  bool mi = false;
  GradStage stage = GradStage::plain;
  const Policy* policy = nullptr;  // required when stage == aait

  std::string name() const;
};

// "dtmi", "si-dtmi", "admix-dtmi", "aait-dtmi", "ifgsm", "mi", or a comma
// list of {di,ti,mi,si,admix,aait}. At most one averaging stage.
Recipe parse_recipe(const std::string& text, const Policy* policy);

struct TiKernel {
  int size = 5;
  Tensor weights;  // (1,1,size,size), entries sum to 1
};

TiKernel gaussian_kernel(int size, float sigma);

// Depthwise same-padding convolution of a gradient batch with the kernel.
Tensor ti_smooth(const TiKernel& kernel, const Tensor& grad);

// g_next = decay * g_prev + grad / ||grad||_1 (per image). Images with a
// zero gradient keep decay * g_prev and set their flag.
Tensor mi_accumulate(const Tensor& g_prev, const Tensor& grad, float decay,
                     std::vector<uint8_t>* zero_flags = nullptr);

// Single targeted FGSM step (epsilon-scaled sign descent).
Tensor fgsm(Classifier& model, const Tensor& x, const std::vector<int>& targets, float epsilon,
            LossKind loss);

// Random resize-and-pad. Fires once per call with probability
// dim_probability; output side is dim_max when it fires.
Var dim_transform(const Var& batch, float probability, int dim_max, Rng& rng);

// Average gradient over scale copies x / 2^i.
Tensor sim_gradient(Classifier& model, const Tensor& x, const std::vector<int>& targets,
                    int sim_copies, LossKind loss);

// Average gradient over admixed inputs (x + weight * other) / 2^i. The pool
// must hold images whose true class differs from the corresponding x row;
// pool_of[i] lists candidate pool rows for image i.
Tensor admix_gradient(Classifier& model, const Tensor& x, const std::vector<int>& targets,
                      const Tensor& pool, const std::vector<std::vector<int>>& pool_of,
                      int mixes, float weight, int sim_copies, LossKind loss, Rng& rng);

// Average gradient over `copies` policy-transformed copies (attack mode,
// whole batch as one chunk), differentiating through the transform.
Tensor aait_gradient(Classifier& model, const Policy& policy, const Tensor& x,
                     const std::vector<int>& targets, int copies, LossKind loss, Rng& rng);

struct AttackResult {
  Tensor x_adv;
  std::vector<float> loss_trace;        // stage loss per iteration
  std::vector<uint8_t> zero_grad_seen;  // per image
};

// Called after each iterate update; return false to abort early.
using IterCallback = std::function<bool(int iter, const Tensor& x_adv)>;

AttackResult run_attack(Classifier& model, const Tensor& x, const std::vector<int>& y_true,
                        const std::vector<int>& targets, const AttackConfig& cfg,
                        const Recipe& recipe, const IterCallback& callback = nullptr);

}  // namespace aait

#endif
