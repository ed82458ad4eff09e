#ifndef AAIT_NN_HPP
#define AAIT_NN_HPP

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "aait/graph.hpp"
#include "aait/rng.hpp"

namespace aait {

// Named trainable tensors. Layers register their weights here so training,
// checkpointing and freezing all see the same list.
class ParamStore {
 public:
  Var add(const std::string& name, Tensor init) {
    Var v = make_leaf(std::move(init), true);
    names_.push_back(name);
    params_.push_back(v);
    return v;
  }
  const std::vector<Var>& params() const { return params_; }
  const std::vector<std::string>& names() const { return names_; }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }
  void set_trainable(bool on) {
    for (auto& p : params_) {
      p->requires_grad = on;
      p->needs_grad = on;
    }
  }

 private:
  std::vector<std::string> names_;
  std::vector<Var> params_;
};

class Adam {
 public:
  Adam(std::vector<Var> params, float lr, float beta1 = 0.9f, float beta2 = 0.999f,
       float eps = 1e-8f, float weight_decay = 0.f)
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps),
        weight_decay_(weight_decay) {
    for (auto& p : params_) {
      m_.emplace_back(p->val.shape());
      v_.emplace_back(p->val.shape());
    }
  }

  void set_lr(float lr) { lr_ = lr; }
  float lr() const { return lr_; }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(double(beta1_), t_);
    const double bc2 = 1.0 - std::pow(double(beta2_), t_);
    for (size_t k = 0; k < params_.size(); ++k) {
      Node& p = *params_[k];
      if (p.grad.empty()) continue;  // never touched by backward
      const long n = p.val.size();
      for (long i = 0; i < n; ++i) {
        float g = p.grad[i] + weight_decay_ * p.val[i];
        m_[k][i] = beta1_ * m_[k][i] + (1.f - beta1_) * g;
        v_[k][i] = beta2_ * v_[k][i] + (1.f - beta2_) * g * g;
        const double mhat = m_[k][i] / bc1;
        const double vhat = v_[k][i] / bc2;
        p.val[i] -= float(lr_ * mhat / (std::sqrt(vhat) + eps_));
      }
    }
  }

 private:
  std::vector<Var> params_;
  std::vector<Tensor> m_, v_;
  float lr_, beta1_, beta2_, eps_, weight_decay_;
  long t_ = 0;
};

// ---- layers ----

struct Conv2d {
  Var w, b;
  int stride = 1, pad = 1;

  Conv2d() = default;
  Conv2d(ParamStore& ps, const std::string& name, int in_c, int out_c, int k, int stride_,
         int pad_, Rng& rng, bool bias = true)
      : stride(stride_), pad(pad_) {
    Tensor wt(Shape(out_c, in_c, k, k));
    wt.fill_normal(rng, std::sqrt(2.f / float(in_c * k * k)));
    w = ps.add(name + ".w", std::move(wt));
    if (bias) b = ps.add(name + ".b", Tensor(Shape(out_c, 1, 1, 1)));
  }
  Var operator()(const Var& x) const { return conv2d(x, w, b, stride, pad); }
};

struct DepthwiseConv2d {
  Var w, b;
  int stride = 1, pad = 1;

  DepthwiseConv2d() = default;
  DepthwiseConv2d(ParamStore& ps, const std::string& name, int channels, int k, int stride_,
                  int pad_, Rng& rng)
      : stride(stride_), pad(pad_) {
    Tensor wt(Shape(channels, 1, k, k));
    wt.fill_normal(rng, std::sqrt(2.f / float(k * k)));
    w = ps.add(name + ".w", std::move(wt));
    b = ps.add(name + ".b", Tensor(Shape(channels, 1, 1, 1)));
  }
  Var operator()(const Var& x) const { return conv2d_dw(x, w, b, stride, pad); }
};

struct Linear {
  Var w, b;

  Linear() = default;
  Linear(ParamStore& ps, const std::string& name, int in_f, int out_f, Rng& rng) {
    Tensor wt(Shape(out_f, in_f, 1, 1));
    wt.fill_normal(rng, std::sqrt(1.f / float(in_f)));
    w = ps.add(name + ".w", std::move(wt));
    b = ps.add(name + ".b", Tensor(Shape(out_f, 1, 1, 1)));
  }
  Var operator()(const Var& x) const { return linear(x, w, b); }
};

struct BatchNorm2d {
  Var gamma, beta;
  Tensor run_mean, run_var;
  bool training = true;

  BatchNorm2d() = default;
  BatchNorm2d(ParamStore& ps, const std::string& name, int channels)
      : run_mean(Shape(channels, 1, 1, 1)), run_var(Shape(channels, 1, 1, 1), 1.f) {
    gamma = ps.add(name + ".gamma", Tensor(Shape(channels, 1, 1, 1), 1.f));
    beta = ps.add(name + ".beta", Tensor(Shape(channels, 1, 1, 1)));
  }
  Var operator()(const Var& x) {
    return batchnorm(x, gamma, beta, run_mean, run_var, training);
  }
};

}  // namespace aait

#endif
