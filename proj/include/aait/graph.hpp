#ifndef AAIT_GRAPH_HPP
#define AAIT_GRAPH_HPP

#include <functional>
#include <memory>
#include <vector>

#include "aait/tensor.hpp"

namespace aait {

// Tape node for reverse-mode autodiff. Graphs are built by the free
// functions below; backward(root) accumulates into .grad of every node on
// a path to a leaf with requires_grad. Reductions accumulate in double so
// results do not depend on unfortunate summation orders.
class Node {
 public:
  Tensor val;
  Tensor grad;  // allocated lazily by backward()
  bool requires_grad = false;
  bool needs_grad = false;  // requires_grad or any ancestor of one
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;  // pulls this->grad into parents

  void ensure_grad() {
    if (grad.empty() || grad.shape() != val.shape()) grad = Tensor(val.shape());
  }
  void zero_grad() {
    if (!grad.empty()) grad.zero();
  }
};

using Var = std::shared_ptr<Node>;

Var make_leaf(Tensor v, bool requires_grad);
Var make_const(Tensor v);
Var make_scalar(float x);

// Reverse pass from a scalar root (seeds d root = 1).
void backward(const Var& root);

// ---- elementwise, same shape ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var neg(const Var& a);
Var add_scalar(const Var& a, float s);
Var mul_scalar(const Var& a, float s);
Var square(const Var& a);
Var vexp(const Var& a);
Var vlog(const Var& a);  // input clamped to >= 1e-12
Var vsqrt(const Var& a);
Var vsin(const Var& a);
Var vcos(const Var& a);
Var sigmoid(const Var& a);
Var relu(const Var& a);
Var leaky_relu(const Var& a, float slope);
// clamp to [0,1]; gradient passes where the input already lies inside
Var clamp01(const Var& a);
// clamp values for the forward pass but let gradients through everywhere
Var clamp_ste(const Var& a, float lo, float hi);
// elementwise multiply / add by a constant tensor (no grad into the constant)
Var mul_const(const Var& a, Tensor k);
Var add_const(const Var& a, Tensor k);

// ---- broadcasting: s has shape (1,1,1,1) or (N,1,1,1) ----
Var mul_b(const Var& x, const Var& s);
Var add_b(const Var& x, const Var& s);
// expand (N,1,H,W) across channels
Var expand_c(const Var& x, int channels);

// ---- reductions / shaping ----
Var sum_all(const Var& a);     // -> (1,1,1,1)
Var mean_all(const Var& a);    // -> (1,1,1,1)
Var mean_per_image(const Var& a);  // -> (N,1,1,1)
Var concat_n(const std::vector<Var>& parts);
Var slice_n(const Var& a, int start, int count);
Var flatten(const Var& a);  // (N,C,H,W) -> (N,C*H*W,1,1)
Var crop_hw(const Var& a, int top, int left, int h, int w);
Var pad_hw(const Var& a, int top, int bottom, int left, int right);  // zero fill
Var flip_h(const Var& a);
// luma map 0.299 R + 0.587 G + 0.114 B -> (N,1,H,W); requires C == 3
Var gray_luma(const Var& a);
// per-channel (x - mean) / std with constant statistics
Var channel_norm(const Var& a, const std::vector<float>& mean, const std::vector<float>& sd);
// stack six scalars into a (1,6,1,1) affine matrix
Var affine_mat(const Var& a, const Var& b, const Var& c, const Var& d, const Var& e, const Var& f);

// ---- dense / conv layers ----
Var linear(const Var& x, const Var& w, const Var& b);  // x (N,K,1,1), w (M,K,1,1), b (M,1,1,1)
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);  // w (O,C,kh,kw); b may be null
Var conv2d_dw(const Var& x, const Var& w, const Var& b, int stride, int pad);  // depthwise, w (C,1,kh,kw)
Var maxpool2(const Var& x);
Var avgpool2(const Var& x);
Var global_avg_pool(const Var& x);  // -> (N,C,1,1)
Var batchnorm(const Var& x, const Var& gamma, const Var& beta, Tensor& run_mean, Tensor& run_var,
              bool training, float momentum = 0.1f, float eps = 1e-5f);

// ---- sampling ----
// Inverse-warp bilinear sampler: for each output pixel with normalized
// coordinates (u,v) in [-1,1] (align-corners), samples the input at
// (m0*u + m1*v + m2, m3*u + m4*v + m5), zeros outside the canvas.
// Differentiable in x and in the matrix entries.
Var affine_sample(const Var& x, const Var& mat, int out_h, int out_w);
Var resize_bilinear(const Var& x, int out_h, int out_w);

// ---- classification heads ----
Var gather_classes(const Var& logits, const std::vector<int>& idx);      // -> (N,1,1,1)
Var cross_entropy_vec(const Var& logits, const std::vector<int>& idx);   // per-image CE -> (N,1,1,1)

// ---- helpers ----
inline Tensor& value(const Var& v) { return v->val; }
std::vector<float> to_vector(const Var& v);

// Escape hatch for modules that define their own primitives (e.g. the
// straight-through image ops): wires parents and needs_grad bookkeeping.
Var make_op(Tensor val, std::vector<Var> parents, std::function<void(Node&)> backprop);

}  // namespace aait

#endif
