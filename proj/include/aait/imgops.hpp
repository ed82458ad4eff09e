#ifndef AAIT_IMGOPS_HPP
#define AAIT_IMGOPS_HPP

#include <string>
#include <vector>

#include "aait/graph.hpp"
#include "aait/rng.hpp"

namespace aait {

// Differentiable image operations. Every op maps [0,1] images to [0,1]
// images and is differentiable with respect to the input batch and (where
// it has one) the normalized magnitude. Posterize, Solarize and Equalize
// run the exact discrete op forward and a relaxed surrogate backward.
enum class OperationKind {
  shear_x,
  shear_y,
  translate_x,
  translate_y,
  rotate,
  flip,
  solarize,
  posterize,
  invert,
  contrast,
  color,
  brightness,
  sharpness,
  auto_contrast,
  equalize,
};

enum class OpFamily { affine, color };

struct UnsupportedOperation : DomainError {
  using DomainError::DomainError;
};

OpFamily family(OperationKind k);
bool has_magnitude(OperationKind k);
std::string to_string(OperationKind k);
OperationKind operation_from_string(const std::string& s);

// Normalized magnitude in [0,1] mapped affinely onto [lo, hi]; signed ops
// use a symmetric range so 0.5 lands exactly on the identity.
struct MagnitudeMap {
  OperationKind kind;
  float lo = 0.f, hi = 0.f;
  bool discretize = false;

  double map(double magnitude) const {
    return 0.5 * (hi + lo) + (magnitude - 0.5) * double(hi - lo);
  }
};

MagnitudeMap magnitude_map(OperationKind k);

const std::vector<OperationKind>& affine_vocabulary();
const std::vector<OperationKind>& color_vocabulary();
const std::vector<OperationKind>& full_vocabulary();

// magnitude is a scalar variable in [0,1] (checked on its value).
Var apply_operation(OperationKind kind, const Var& magnitude, const Var& batch);

// value-only convenience
Tensor apply_operation(OperationKind kind, float magnitude, const Tensor& batch);

enum class GateMode { search, attack };

// Applies the op through a Bernoulli(probability) gate drawn once for the
// whole given batch (the caller's chunk). Attack mode draws a hard gate;
// search mode blends with a relaxed-Bernoulli (concrete) gate at the given
// temperature so d/d(probability) exists.
Var gated_apply(OperationKind kind, const Var& magnitude, const Var& probability,
                float temperature, const Var& batch, GateMode mode, Rng& rng);

// Max deviation between the tape's magnitude gradient of a smooth interior
// image functional and its central finite difference. Continuous ops only.
double finite_difference_check(OperationKind kind, float magnitude, const Tensor& batch, float h);

}  // namespace aait

#endif
