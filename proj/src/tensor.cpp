#include "aait/tensor.hpp"

#include <cmath>
#include <cstdio>

namespace aait {

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", (unsigned long long)v);
  return buf;
}

std::string Shape::str() const {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "(%d,%d,%d,%d)", n, c, h, w);
  return buf;
}

bool Tensor::all_finite() const {
  for (float x : v_)
    if (!std::isfinite(x)) return false;
  return true;
}

float Tensor::max_abs() const {
  float m = 0.f;
  for (float x : v_) m = std::max(m, std::fabs(x));
  return m;
}

double Tensor::sum() const {
  double s = 0.0;
  for (float x : v_) s += x;
  return s;
}

Tensor Tensor::slice_n(int start, int count) const {
  if (start < 0 || count < 0 || start + count > shape_.n)
    throw DomainError("slice_n out of range for " + shape_.str());
  Tensor out(Shape(count, shape_.c, shape_.h, shape_.w));
  long per = shape_.per_image();
  std::memcpy(out.data(), data() + long(start) * per, size_t(count) * per * sizeof(float));
  return out;
}

void Tensor::set_slice_n(int start, const Tensor& rows) {
  if (rows.shape().c != shape_.c || rows.shape().h != shape_.h || rows.shape().w != shape_.w)
    throw DomainError("set_slice_n shape mismatch");
  if (start < 0 || start + rows.shape().n > shape_.n) throw DomainError("set_slice_n out of range");
  long per = shape_.per_image();
  std::memcpy(data() + long(start) * per, rows.data(), size_t(rows.shape().n) * per * sizeof(float));
}

Tensor concat_n(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DomainError("concat_n: empty list");
  Shape s = parts[0].shape();
  int total = 0;
  for (const auto& p : parts) {
    if (p.shape().c != s.c || p.shape().h != s.h || p.shape().w != s.w)
      throw DomainError("concat_n shape mismatch");
    total += p.shape().n;
  }
  Tensor out(Shape(total, s.c, s.h, s.w));
  int at = 0;
  for (const auto& p : parts) {
    out.set_slice_n(at, p);
    at += p.shape().n;
  }
  return out;
}

}  // namespace aait
