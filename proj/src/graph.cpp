#include "aait/graph.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace aait {

namespace {

Var make_node(Tensor v, std::vector<Var> parents, std::function<void(Node&)> backprop) {
  auto n = std::make_shared<Node>();
  n->val = std::move(v);
  n->parents = std::move(parents);
  for (const auto& p : n->parents)
    if (p->needs_grad) n->needs_grad = true;
  if (n->needs_grad) n->backprop = std::move(backprop);
  return n;
}

void check_same_shape(const Var& a, const Var& b, const char* who) {
  if (a->val.shape() != b->val.shape())
    throw DomainError(std::string(who) + ": shape mismatch " + a->val.shape().str() + " vs " +
                      b->val.shape().str());
}

// elementwise unary helper: f(x) with df given x and y
template <typename F, typename DF>
Var unary(const Var& a, F f, DF df) {
  Tensor out(a->val.shape());
  const long n = a->val.size();
  for (long i = 0; i < n; ++i) out[i] = f(a->val[i]);
  return make_node(std::move(out), {a}, [df](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.needs_grad) return;
    pa.ensure_grad();
    const long n = self.val.size();
    for (long i = 0; i < n; ++i) pa.grad[i] += self.grad[i] * df(pa.val[i], self.val[i]);
  });
}

}  // namespace

Var make_leaf(Tensor v, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->val = std::move(v);
  n->requires_grad = requires_grad;
  n->needs_grad = requires_grad;
  return n;
}

Var make_const(Tensor v) { return make_leaf(std::move(v), false); }

Var make_scalar(float x) { return make_const(Tensor::scalar(x)); }

void backward(const Var& root) {
  if (root->val.size() != 1) throw DomainError("backward: root must be scalar");
  if (!root->needs_grad) return;
  // postorder topological sort
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    bool descended = false;
    while (idx < node->parents.size()) {
      Node* p = node->parents[idx++].get();
      if (p->needs_grad && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
        descended = true;
        break;
      }
    }
    if (descended) continue;
    order.push_back(node);
    stack.pop_back();
  }
  for (Node* n : order) n->ensure_grad();
  root->grad.fill(1.f);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop) n->backprop(*n);
  }
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor out(a->val.shape());
  const long n = out.size();
  for (long i = 0; i < n; ++i) out[i] = a->val[i] + b->val[i];
  return make_node(std::move(out), {a, b}, [](Node& self) {
    for (int k = 0; k < 2; ++k) {
      Node& p = *self.parents[k];
      if (!p.needs_grad) continue;
      p.ensure_grad();
      const long n = self.val.size();
      for (long i = 0; i < n; ++i) p.grad[i] += self.grad[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor out(a->val.shape());
  const long n = out.size();
  for (long i = 0; i < n; ++i) out[i] = a->val[i] - b->val[i];
  return make_node(std::move(out), {a, b}, [](Node& self) {
    const long n = self.val.size();
    Node& pa = *self.parents[0];
    if (pa.needs_grad) {
      pa.ensure_grad();
      for (long i = 0; i < n; ++i) pa.grad[i] += self.grad[i];
    }
    Node& pb = *self.parents[1];
    if (pb.needs_grad) {
      pb.ensure_grad();
      for (long i = 0; i < n; ++i) pb.grad[i] -= self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Tensor out(a->val.shape());
  const long n = out.size();
  for (long i = 0; i < n; ++i) out[i] = a->val[i] * b->val[i];
  return make_node(std::move(out), {a, b}, [](Node& self) {
    const long n = self.val.size();
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.needs_grad) {
      pa.ensure_grad();
      for (long i = 0; i < n; ++i) pa.grad[i] += self.grad[i] * pb.val[i];
    }
    if (pb.needs_grad) {
      pb.ensure_grad();
      for (long i = 0; i < n; ++i) pb.grad[i] += self.grad[i] * pa.val[i];
    }
  });
}

Var neg(const Var& a) {
  return unary(a, [](float x) { return -x; }, [](float, float) { return -1.f; });
}

Var add_scalar(const Var& a, float s) {
  return unary(a, [s](float x) { return x + s; }, [](float, float) { return 1.f; });
}

Var mul_scalar(const Var& a, float s) {
  return unary(a, [s](float x) { return x * s; }, [s](float, float) { return s; });
}

Var square(const Var& a) {
  return unary(a, [](float x) { return x * x; }, [](float x, float) { return 2.f * x; });
}

Var vexp(const Var& a) {
  return unary(a, [](float x) { return std::exp(x); }, [](float, float y) { return y; });
}

Var vlog(const Var& a) {
  return unary(a, [](float x) { return std::log(std::max(x, 1e-12f)); },
               [](float x, float) { return 1.f / std::max(x, 1e-12f); });
}

Var vsqrt(const Var& a) {
  return unary(a, [](float x) { return std::sqrt(std::max(x, 0.f)); },
               [](float, float y) { return 0.5f / std::max(y, 1e-12f); });
}

Var vsin(const Var& a) {
  return unary(a, [](float x) { return std::sin(x); },
               [](float x, float) { return std::cos(x); });
}

Var vcos(const Var& a) {
  return unary(a, [](float x) { return std::cos(x); },
               [](float x, float) { return -std::sin(x); });
}

Var sigmoid(const Var& a) {
  return unary(a, [](float x) { return 1.f / (1.f + std::exp(-x)); },
               [](float, float y) { return y * (1.f - y); });
}

Var relu(const Var& a) {
  return unary(a, [](float x) { return x > 0.f ? x : 0.f; },
               [](float x, float) { return x > 0.f ? 1.f : 0.f; });
}

Var leaky_relu(const Var& a, float slope) {
  return unary(a, [slope](float x) { return x > 0.f ? x : slope * x; },
               [slope](float x, float) { return x > 0.f ? 1.f : slope; });
}

Var clamp01(const Var& a) {
  return unary(a, [](float x) { return std::min(1.f, std::max(0.f, x)); },
               [](float x, float) { return (x >= 0.f && x <= 1.f) ? 1.f : 0.f; });
}

Var clamp_ste(const Var& a, float lo, float hi) {
  return unary(a, [lo, hi](float x) { return std::min(hi, std::max(lo, x)); },
               [](float, float) { return 1.f; });
}

Var mul_const(const Var& a, Tensor k) {
  if (a->val.shape() != k.shape()) throw DomainError("mul_const: shape mismatch");
  Tensor out(a->val.shape());
  const long n = out.size();
  for (long i = 0; i < n; ++i) out[i] = a->val[i] * k[i];
  auto kp = std::make_shared<Tensor>(std::move(k));
  return make_node(std::move(out), {a}, [kp](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.needs_grad) return;
    pa.ensure_grad();
    const long n = self.val.size();
    for (long i = 0; i < n; ++i) pa.grad[i] += self.grad[i] * (*kp)[i];
  });
}

Var add_const(const Var& a, Tensor k) {
  if (a->val.shape() != k.shape()) throw DomainError("add_const: shape mismatch");
  Tensor out(a->val.shape());
  const long n = out.size();
  for (long i = 0; i < n; ++i) out[i] = a->val[i] + k[i];
  return make_node(std::move(out), {a}, [](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.needs_grad) return;
    pa.ensure_grad();
    const long n = self.val.size();
    for (long i = 0; i < n; ++i) pa.grad[i] += self.grad[i];
  });
}

namespace {

// s broadcast over x: shape (1,1,1,1) or (N,1,1,1)
void check_bcast(const Var& x, const Var& s, const char* who) {
  const Shape& ss = s->val.shape();
  if (ss.c != 1 || ss.h != 1 || ss.w != 1 || (ss.n != 1 && ss.n != x->val.shape().n))
    throw DomainError(std::string(who) + ": broadcast shape " + ss.str() + " incompatible with " +
                      x->val.shape().str());
}

}  // namespace

Var mul_b(const Var& x, const Var& s) {
  check_bcast(x, s, "mul_b");
  const Shape& xs = x->val.shape();
  const bool per_image = s->val.shape().n != 1;
  const long per = xs.per_image();
  Tensor out(xs);
  for (int i = 0; i < xs.n; ++i) {
    const float f = s->val[per_image ? i : 0];
    const float* src = x->val.data() + long(i) * per;
    float* dst = out.data() + long(i) * per;
    for (long j = 0; j < per; ++j) dst[j] = src[j] * f;
  }
  return make_node(std::move(out), {x, s}, [per_image](Node& self) {
    Node& px = *self.parents[0];
    Node& ps = *self.parents[1];
    const Shape& xs = px.val.shape();
    const long per = xs.per_image();
    if (px.needs_grad) {
      px.ensure_grad();
      for (int i = 0; i < xs.n; ++i) {
        const float f = ps.val[per_image ? i : 0];
        const float* g = self.grad.data() + long(i) * per;
        float* dst = px.grad.data() + long(i) * per;
        for (long j = 0; j < per; ++j) dst[j] += g[j] * f;
      }
    }
    if (ps.needs_grad) {
      ps.ensure_grad();
      for (int i = 0; i < xs.n; ++i) {
        const float* g = self.grad.data() + long(i) * per;
        const float* xv = px.val.data() + long(i) * per;
        double acc = 0.0;
        for (long j = 0; j < per; ++j) acc += double(g[j]) * xv[j];
        ps.grad[per_image ? i : 0] += float(acc);
      }
    }
  });
}

Var add_b(const Var& x, const Var& s) {
  check_bcast(x, s, "add_b");
  const Shape& xs = x->val.shape();
  const bool per_image = s->val.shape().n != 1;
  const long per = xs.per_image();
  Tensor out(xs);
  for (int i = 0; i < xs.n; ++i) {
    const float f = s->val[per_image ? i : 0];
    const float* src = x->val.data() + long(i) * per;
    float* dst = out.data() + long(i) * per;
    for (long j = 0; j < per; ++j) dst[j] = src[j] + f;
  }
  return make_node(std::move(out), {x, s}, [per_image](Node& self) {
    Node& px = *self.parents[0];
    Node& ps = *self.parents[1];
    const Shape& xs = px.val.shape();
    const long per = xs.per_image();
    if (px.needs_grad) {
      px.ensure_grad();
      const long n = self.val.size();
      for (long i = 0; i < n; ++i) px.grad[i] += self.grad[i];
    }
    if (ps.needs_grad) {
      ps.ensure_grad();
      for (int i = 0; i < xs.n; ++i) {
        const float* g = self.grad.data() + long(i) * per;
        double acc = 0.0;
        for (long j = 0; j < per; ++j) acc += g[j];
        ps.grad[per_image ? i : 0] += float(acc);
      }
    }
  });
}

Var expand_c(const Var& x, int channels) {
  const Shape& xs = x->val.shape();
  if (xs.c != 1) throw DomainError("expand_c: input must have one channel");
  Tensor out(Shape(xs.n, channels, xs.h, xs.w));
  const long plane = long(xs.h) * xs.w;
  for (int i = 0; i < xs.n; ++i) {
    const float* src = x->val.data() + long(i) * plane;
    for (int c = 0; c < channels; ++c)
      std::memcpy(out.data() + (long(i) * channels + c) * plane, src, size_t(plane) * sizeof(float));
  }
  return make_node(std::move(out), {x}, [](Node& self) {
    Node& px = *self.parents[0];
    if (!px.needs_grad) return;
    px.ensure_grad();
    const Shape& os = self.val.shape();
    const long plane = long(os.h) * os.w;
    for (int i = 0; i < os.n; ++i) {
      float* dst = px.grad.data() + long(i) * plane;
      for (int c = 0; c < os.c; ++c) {
        const float* g = self.grad.data() + (long(i) * os.c + c) * plane;
        for (long j = 0; j < plane; ++j) dst[j] += g[j];
      }
    }
  });
}

Var sum_all(const Var& a) {
  Tensor out = Tensor::scalar(float(a->val.sum()));
  return make_node(std::move(out), {a}, [](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.needs_grad) return;
    pa.ensure_grad();
    const float g = self.grad[0];
    const long n = pa.val.size();
    for (long i = 0; i < n; ++i) pa.grad[i] += g;
  });
}

Var mean_all(const Var& a) { return mul_scalar(sum_all(a), 1.f / float(a->val.size())); }

Var mean_per_image(const Var& a) {
  const Shape& s = a->val.shape();
  const long per = s.per_image();
  Tensor out(Shape(s.n, 1, 1, 1));
  for (int i = 0; i < s.n; ++i) {
    const float* src = a->val.data() + long(i) * per;
    double acc = 0.0;
    for (long j = 0; j < per; ++j) acc += src[j];
    out[i] = float(acc / double(per));
  }
  return make_node(std::move(out), {a}, [](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.needs_grad) return;
    pa.ensure_grad();
    const Shape& s = pa.val.shape();
    const long per = s.per_image();
    for (int i = 0; i < s.n; ++i) {
      const float g = self.grad[i] / float(per);
      float* dst = pa.grad.data() + long(i) * per;
      for (long j = 0; j < per; ++j) dst[j] += g;
    }
  });
}

Var concat_n(const std::vector<Var>& parts) {
  if (parts.empty()) throw DomainError("concat_n: empty list");
  std::vector<Tensor> vals;
  vals.reserve(parts.size());
  for (const auto& p : parts) vals.push_back(p->val);
  Tensor out = concat_n(vals);
  std::vector<Var> parents(parts.begin(), parts.end());
  return make_node(std::move(out), std::move(parents), [](Node& self) {
    int at = 0;
    for (auto& pv : self.parents) {
      Node& p = *pv;
      const int rows = p.val.shape().n;
      if (p.needs_grad) {
        p.ensure_grad();
        const long per = p.val.shape().per_image();
        const float* g = self.grad.data() + long(at) * per;
        float* dst = p.grad.data();
        for (long j = 0; j < long(rows) * per; ++j) dst[j] += g[j];
      }
      at += rows;
    }
  });
}

Var slice_n(const Var& a, int start, int count) {
  Tensor out = a->val.slice_n(start, count);
  return make_node(std::move(out), {a}, [start](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.needs_grad) return;
    pa.ensure_grad();
    const long per = pa.val.shape().per_image();
    float* dst = pa.grad.data() + long(start) * per;
    const long n = self.val.size();
    for (long j = 0; j < n; ++j) dst[j] += self.grad[j];
  });
}

Var flatten(const Var& a) {
  const Shape& s = a->val.shape();
  Tensor out(Shape(s.n, int(s.per_image()), 1, 1));
  std::memcpy(out.data(), a->val.data(), size_t(out.size()) * sizeof(float));
  return make_node(std::move(out), {a}, [](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.needs_grad) return;
    pa.ensure_grad();
    const long n = self.val.size();
    for (long i = 0; i < n; ++i) pa.grad[i] += self.grad[i];
  });
}

Var crop_hw(const Var& a, int top, int left, int h, int w) {
  const Shape& s = a->val.shape();
  if (top < 0 || left < 0 || top + h > s.h || left + w > s.w)
    throw DomainError("crop_hw out of range");
  Tensor out(Shape(s.n, s.c, h, w));
  for (int i = 0; i < s.n; ++i)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < h; ++y)
        std::memcpy(&out.at(i, c, y, 0), &a->val.at(i, c, top + y, left),
                    size_t(w) * sizeof(float));
  return make_node(std::move(out), {a}, [top, left](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.needs_grad) return;
    pa.ensure_grad();
    const Shape& os = self.val.shape();
    for (int i = 0; i < os.n; ++i)
      for (int c = 0; c < os.c; ++c)
        for (int y = 0; y < os.h; ++y) {
          const float* g = &self.grad.at(i, c, y, 0);
          float* dst = &pa.grad.at(i, c, top + y, left);
          for (int x = 0; x < os.w; ++x) dst[x] += g[x];
        }
  });
}

Var pad_hw(const Var& a, int top, int bottom, int left, int right) {
  const Shape& s = a->val.shape();
  Tensor out(Shape(s.n, s.c, s.h + top + bottom, s.w + left + right));
  for (int i = 0; i < s.n; ++i)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < s.h; ++y)
        std::memcpy(&out.at(i, c, y + top, left), &a->val.at(i, c, y, 0),
                    size_t(s.w) * sizeof(float));
  return make_node(std::move(out), {a}, [top, left](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.needs_grad) return;
    pa.ensure_grad();
    const Shape& is = pa.val.shape();
    for (int i = 0; i < is.n; ++i)
      for (int c = 0; c < is.c; ++c)
        for (int y = 0; y < is.h; ++y) {
          const float* g = &self.grad.at(i, c, y + top, left);
          float* dst = &pa.grad.at(i, c, y, 0);
          for (int x = 0; x < is.w; ++x) dst[x] += g[x];
        }
  });
}

Var flip_h(const Var& a) {
  const Shape& s = a->val.shape();
  Tensor out(s);
  for (int i = 0; i < s.n; ++i)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) out.at(i, c, y, x) = a->val.at(i, c, y, s.w - 1 - x);
  return make_node(std::move(out), {a}, [](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.needs_grad) return;
    pa.ensure_grad();
    const Shape& s = pa.val.shape();
    for (int i = 0; i < s.n; ++i)
      for (int c = 0; c < s.c; ++c)
        for (int y = 0; y < s.h; ++y)
          for (int x = 0; x < s.w; ++x)
            pa.grad.at(i, c, y, s.w - 1 - x) += self.grad.at(i, c, y, x);
  });
}

Var gray_luma(const Var& a) {
  const Shape& s = a->val.shape();
  if (s.c != 3) throw DomainError("gray_luma: expected 3 channels");
  static const float kW[3] = {0.299f, 0.587f, 0.114f};
  Tensor out(Shape(s.n, 1, s.h, s.w));
  const long plane = long(s.h) * s.w;
  for (int i = 0; i < s.n; ++i) {
    float* dst = out.data() + long(i) * plane;
    for (int c = 0; c < 3; ++c) {
      const float* src = a->val.data() + (long(i) * 3 + c) * plane;
      for (long j = 0; j < plane; ++j) dst[j] += kW[c] * src[j];
    }
  }
  return make_node(std::move(out), {a}, [](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.needs_grad) return;
    pa.ensure_grad();
    const Shape& s = pa.val.shape();
    const long plane = long(s.h) * s.w;
    for (int i = 0; i < s.n; ++i) {
      const float* g = self.grad.data() + long(i) * plane;
      for (int c = 0; c < 3; ++c) {
        float* dst = pa.grad.data() + (long(i) * 3 + c) * plane;
        for (long j = 0; j < plane; ++j) dst[j] += kW[c] * g[j];
      }
    }
  });
}

Var channel_norm(const Var& a, const std::vector<float>& mean, const std::vector<float>& sd) {
  const Shape& s = a->val.shape();
  if (int(mean.size()) != s.c || int(sd.size()) != s.c)
    throw DomainError("channel_norm: statistics size mismatch");
  Tensor out(s);
  const long plane = long(s.h) * s.w;
  for (int i = 0; i < s.n; ++i)
    for (int c = 0; c < s.c; ++c) {
      const float* src = a->val.data() + (long(i) * s.c + c) * plane;
      float* dst = out.data() + (long(i) * s.c + c) * plane;
      const float m = mean[c], inv = 1.f / sd[c];
      for (long j = 0; j < plane; ++j) dst[j] = (src[j] - m) * inv;
    }
  auto sdp = std::make_shared<std::vector<float>>(sd);
  return make_node(std::move(out), {a}, [sdp](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.needs_grad) return;
    pa.ensure_grad();
    const Shape& s = pa.val.shape();
    const long plane = long(s.h) * s.w;
    for (int i = 0; i < s.n; ++i)
      for (int c = 0; c < s.c; ++c) {
        const float inv = 1.f / (*sdp)[c];
        const float* g = self.grad.data() + (long(i) * s.c + c) * plane;
        float* dst = pa.grad.data() + (long(i) * s.c + c) * plane;
        for (long j = 0; j < plane; ++j) dst[j] += g[j] * inv;
      }
  });
}

Var affine_mat(const Var& a, const Var& b, const Var& c, const Var& d, const Var& e,
               const Var& f) {
  const Var parts[6] = {a, b, c, d, e, f};
  Tensor out(Shape(1, 6, 1, 1));
  for (int k = 0; k < 6; ++k) {
    if (parts[k]->val.size() != 1) throw DomainError("affine_mat: entries must be scalars");
    out[k] = parts[k]->val[0];
  }
  return make_node(std::move(out), {a, b, c, d, e, f}, [](Node& self) {
    for (int k = 0; k < 6; ++k) {
      Node& p = *self.parents[k];
      if (!p.needs_grad) continue;
      p.ensure_grad();
      p.grad[0] += self.grad[k];
    }
  });
}

Var gather_classes(const Var& logits, const std::vector<int>& idx) {
  const Shape& s = logits->val.shape();
  if (int(idx.size()) != s.n) throw DomainError("gather_classes: index count mismatch");
  for (int i : idx)
    if (i < 0 || i >= s.c) throw DomainError("gather_classes: class index out of range");
  Tensor out(Shape(s.n, 1, 1, 1));
  for (int i = 0; i < s.n; ++i) out[i] = logits->val.at(i, idx[size_t(i)], 0, 0);
  auto ip = std::make_shared<std::vector<int>>(idx);
  return make_node(std::move(out), {logits}, [ip](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.needs_grad) return;
    pa.ensure_grad();
    const Shape& s = pa.val.shape();
    for (int i = 0; i < s.n; ++i) pa.grad.at(i, (*ip)[size_t(i)], 0, 0) += self.grad[i];
  });
}

Var cross_entropy_vec(const Var& logits, const std::vector<int>& idx) {
  const Shape& s = logits->val.shape();
  if (int(idx.size()) != s.n) throw DomainError("cross_entropy_vec: index count mismatch");
  for (int i : idx)
    if (i < 0 || i >= s.c) throw DomainError("cross_entropy_vec: class index out of range");
  Tensor out(Shape(s.n, 1, 1, 1));
  Tensor probs(s);  // softmax cached for backward
  for (int i = 0; i < s.n; ++i) {
    const float* z = &logits->val.at(i, 0, 0, 0);
    float m = z[0];
    for (int c = 1; c < s.c; ++c) m = std::max(m, z[c]);
    double denom = 0.0;
    for (int c = 0; c < s.c; ++c) denom += std::exp(double(z[c]) - m);
    const double logz = std::log(denom) + m;
    out[i] = float(logz - z[idx[size_t(i)]]);
    for (int c = 0; c < s.c; ++c)
      probs.at(i, c, 0, 0) = float(std::exp(double(z[c]) - logz));
  }
  auto ip = std::make_shared<std::vector<int>>(idx);
  auto pp = std::make_shared<Tensor>(std::move(probs));
  return make_node(std::move(out), {logits}, [ip, pp](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.needs_grad) return;
    pa.ensure_grad();
    const Shape& s = pa.val.shape();
    for (int i = 0; i < s.n; ++i) {
      const float g = self.grad[i];
      for (int c = 0; c < s.c; ++c) {
        float p = pp->at(i, c, 0, 0);
        pa.grad.at(i, c, 0, 0) += g * (p - (c == (*ip)[size_t(i)] ? 1.f : 0.f));
      }
    }
  });
}

std::vector<float> to_vector(const Var& v) {
  return std::vector<float>(v->val.data(), v->val.data() + v->val.size());
}

Var make_op(Tensor val, std::vector<Var> parents, std::function<void(Node&)> backprop) {
  return make_node(std::move(val), std::move(parents), std::move(backprop));
}

}  // namespace aait
