#ifndef AAIT_TENSOR_HPP
#define AAIT_TENSOR_HPP

#include <cstring>
#include <string>
#include <vector>

#include "aait/common.hpp"
#include "aait/rng.hpp"

namespace aait {

// Everything in the toolkit is rank 4 (N, C, H, W). Logit batches are
// (N, classes, 1, 1) and scalars are (1, 1, 1, 1).
struct Shape {
  int n = 1, c = 1, h = 1, w = 1;

  Shape() = default;
  Shape(int n_, int c_, int h_, int w_) : n(n_), c(c_), h(h_), w(w_) {}

  long size() const { return long(n) * c * h * w; }
  long per_image() const { return long(c) * h * w; }
  bool operator==(const Shape& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
  bool operator!=(const Shape& o) const { return !(*this == o); }
  std::string str() const;
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape s) : shape_(s), v_(size_t(s.size()), 0.f) {}
  Tensor(Shape s, float fill) : shape_(s), v_(size_t(s.size()), fill) {}

  static Tensor scalar(float x) { return Tensor(Shape(1, 1, 1, 1), x); }

  const Shape& shape() const { return shape_; }
  long size() const { return shape_.size(); }
  bool empty() const { return v_.empty(); }

  float* data() { return v_.data(); }
  const float* data() const { return v_.data(); }

  float& operator[](long i) { return v_[size_t(i)]; }
  float operator[](long i) const { return v_[size_t(i)]; }

  long index(int n, int c, int h, int w) const {
    return ((long(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  float& at(int n, int c, int h, int w) { return v_[size_t(index(n, c, h, w))]; }
  const float& at(int n, int c, int h, int w) const { return v_[size_t(index(n, c, h, w))]; }

  void fill(float x) { std::fill(v_.begin(), v_.end(), x); }
  void zero() { fill(0.f); }

  Tensor clone() const { return *this; }

  bool all_finite() const;
  float max_abs() const;
  double sum() const;  // double accumulation

  void fill_uniform(Rng& rng, float lo, float hi) {
    for (auto& x : v_) x = float(rng.uniform(lo, hi));
  }
  void fill_normal(Rng& rng, float stddev) {
    for (auto& x : v_) x = float(rng.normal() * stddev);
  }

  // Rows [start, start+count) along N.
  Tensor slice_n(int start, int count) const;
  void set_slice_n(int start, const Tensor& rows);

 private:
  Shape shape_;
  std::vector<float> v_;
};

Tensor concat_n(const std::vector<Tensor>& parts);

}  // namespace aait

#endif
