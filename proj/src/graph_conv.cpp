#include <cblas.h>
#include <omp.h>

#include <cmath>
#include <cstring>

#include "aait/graph.hpp"

namespace aait {

namespace {

// Convs parallelize over images; BLAS gets one thread so the two-level
// parallelism does not oversubscribe. Static schedules keep the image ->
// thread assignment (and therefore float accumulation order) fixed.
struct BlasSingleThread {
  BlasSingleThread() { openblas_set_num_threads(1); }
};

int conv_threads() {
  static BlasSingleThread once;
  return std::min(omp_get_max_threads(), 8);
}

Var make_node(Tensor v, std::vector<Var> parents, std::function<void(Node&)> backprop) {
  auto n = std::make_shared<Node>();
  n->val = std::move(v);
  n->parents = std::move(parents);
  for (const auto& p : n->parents)
    if (p->needs_grad) n->needs_grad = true;
  if (n->needs_grad) n->backprop = std::move(backprop);
  return n;
}

struct ConvDims {
  int n, c, h, w, o, kh, kw, oh, ow, stride, pad;
  long ckk() const { return long(c) * kh * kw; }
  long np() const { return long(n) * oh * ow; }
};

ConvDims conv_dims(const Shape& xs, const Shape& ws, int stride, int pad) {
  ConvDims d;
  d.n = xs.n;
  d.c = xs.c;
  d.h = xs.h;
  d.w = xs.w;
  d.o = ws.n;
  d.kh = ws.h;
  d.kw = ws.w;
  d.stride = stride;
  d.pad = pad;
  d.oh = (xs.h + 2 * pad - ws.h) / stride + 1;
  d.ow = (xs.w + 2 * pad - ws.w) / stride + 1;
  if (ws.c != xs.c) throw DomainError("conv2d: channel mismatch");
  if (d.oh <= 0 || d.ow <= 0) throw DomainError("conv2d: kernel larger than padded input");
  return d;
}

// col for ONE image: (CKK, OH*OW) row-major. Small enough to stay in cache.
void im2col_one(const float* img, const ConvDims& d, float* col) {
  const long p = long(d.oh) * d.ow;
  const long plane = long(d.h) * d.w;
  for (int c = 0; c < d.c; ++c) {
    const float* src = img + long(c) * plane;
    for (int ky = 0; ky < d.kh; ++ky)
      for (int kx = 0; kx < d.kw; ++kx) {
        float* dst = col + ((long(c) * d.kh + ky) * d.kw + kx) * p;
        for (int oy = 0; oy < d.oh; ++oy) {
          const int iy = oy * d.stride - d.pad + ky;
          float* drow = dst + long(oy) * d.ow;
          if (iy < 0 || iy >= d.h) {
            std::memset(drow, 0, size_t(d.ow) * sizeof(float));
            continue;
          }
          const float* srow = src + long(iy) * d.w;
          if (d.stride == 1) {
            const int x0 = std::max(0, d.pad - kx);
            const int x1 = std::min(d.ow, d.w + d.pad - kx);
            for (int ox = 0; ox < x0; ++ox) drow[ox] = 0.f;
            if (x1 > x0)
              std::memcpy(drow + x0, srow + x0 - d.pad + kx, size_t(x1 - x0) * sizeof(float));
            for (int ox = x1; ox < d.ow; ++ox) drow[ox] = 0.f;
          } else {
            for (int ox = 0; ox < d.ow; ++ox) {
              const int ix = ox * d.stride - d.pad + kx;
              drow[ox] = (ix >= 0 && ix < d.w) ? srow[ix] : 0.f;
            }
          }
        }
      }
  }
}

void col2im_add_one(const float* col, const ConvDims& d, float* dimg) {
  const long p = long(d.oh) * d.ow;
  const long plane = long(d.h) * d.w;
  for (int c = 0; c < d.c; ++c) {
    float* dst = dimg + long(c) * plane;
    for (int ky = 0; ky < d.kh; ++ky)
      for (int kx = 0; kx < d.kw; ++kx) {
        const float* src = col + ((long(c) * d.kh + ky) * d.kw + kx) * p;
        for (int oy = 0; oy < d.oh; ++oy) {
          const int iy = oy * d.stride - d.pad + ky;
          if (iy < 0 || iy >= d.h) continue;
          float* drow = dst + long(iy) * d.w;
          const float* srow = src + long(oy) * d.ow;
          for (int ox = 0; ox < d.ow; ++ox) {
            const int ix = ox * d.stride - d.pad + kx;
            if (ix >= 0 && ix < d.w) drow[ix] += srow[ox];
          }
        }
      }
  }
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  const ConvDims d = conv_dims(x->val.shape(), w->val.shape(), stride, pad);
  const long ckk = d.ckk(), p = long(d.oh) * d.ow;
  const long in_plane = long(d.c) * d.h * d.w;
  if (b && b->val.size() != d.o) throw DomainError("conv2d: bias size mismatch");
  Tensor out(Shape(d.n, d.o, d.oh, d.ow));
  const int nth = conv_threads();
#pragma omp parallel num_threads(nth)
  {
    std::vector<float> col(size_t(ckk * p));
#pragma omp for schedule(static)
    for (int i = 0; i < d.n; ++i) {
      im2col_one(x->val.data() + i * in_plane, d, col.data());
      float* dst = out.data() + long(i) * d.o * p;
      cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, d.o, int(p), int(ckk), 1.f,
                  w->val.data(), int(ckk), col.data(), int(p), 0.f, dst, int(p));
      if (b)
        for (int j = 0; j < d.o; ++j) {
          const float bj = b->val[j];
          float* row = dst + long(j) * p;
          for (long k = 0; k < p; ++k) row[k] += bj;
        }
    }
  }
  std::vector<Var> parents = b ? std::vector<Var>{x, w, b} : std::vector<Var>{x, w};
  return make_node(std::move(out), std::move(parents), [d](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    const long ckk = d.ckk(), p = long(d.oh) * d.ow;
    const long in_plane = long(d.c) * d.h * d.w;
    const bool want_dx = px.needs_grad, want_dw = pw.needs_grad;
    if (want_dx) px.ensure_grad();
    if (want_dw) pw.ensure_grad();
    const int nth = conv_threads();
    std::vector<std::vector<float>> dw_acc;
    dw_acc.resize(size_t(nth));
#pragma omp parallel num_threads(nth)
    {
      const int tid = omp_get_thread_num();
      std::vector<float> col(size_t(ckk * p));
      std::vector<float> dcol(want_dx ? size_t(ckk * p) : 0);
      if (want_dw) dw_acc[size_t(tid)].assign(size_t(d.o) * ckk, 0.f);
#pragma omp for schedule(static)
      for (int i = 0; i < d.n; ++i) {
        const float* g = self.grad.data() + long(i) * d.o * p;
        if (want_dw) {
          im2col_one(px.val.data() + i * in_plane, d, col.data());
          cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasTrans, d.o, int(ckk), int(p), 1.f, g,
                      int(p), col.data(), int(p), 1.f, dw_acc[size_t(tid)].data(), int(ckk));
        }
        if (want_dx) {
          cblas_sgemm(CblasRowMajor, CblasTrans, CblasNoTrans, int(ckk), int(p), d.o, 1.f,
                      pw.val.data(), int(ckk), g, int(p), 0.f, dcol.data(), int(p));
          col2im_add_one(dcol.data(), d, px.grad.data() + i * in_plane);
        }
      }
    }
    if (want_dw) {
      for (int t = 0; t < nth; ++t) {
        if (dw_acc[size_t(t)].empty()) continue;
        const float* src = dw_acc[size_t(t)].data();
        float* dst = pw.grad.data();
        const long sz = long(d.o) * ckk;
        for (long k = 0; k < sz; ++k) dst[k] += src[k];
      }
    }
    if (self.parents.size() > 2) {
      Node& pb = *self.parents[2];
      if (pb.needs_grad) {
        pb.ensure_grad();
        for (int j = 0; j < d.o; ++j) {
          double acc = 0.0;
          for (int i = 0; i < d.n; ++i) {
            const float* g = self.grad.data() + (long(i) * d.o + j) * p;
            for (long k = 0; k < p; ++k) acc += g[k];
          }
          pb.grad[j] += float(acc);
        }
      }
    }
  });
}

Var conv2d_dw(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  const Shape& xs = x->val.shape();
  const Shape& ws = w->val.shape();
  if (ws.n != xs.c || ws.c != 1) throw DomainError("conv2d_dw: weight must be (C,1,kh,kw)");
  const int oh = (xs.h + 2 * pad - ws.h) / stride + 1;
  const int ow = (xs.w + 2 * pad - ws.w) / stride + 1;
  Tensor out(Shape(xs.n, xs.c, oh, ow));
  for (int n = 0; n < xs.n; ++n)
    for (int c = 0; c < xs.c; ++c) {
      const float* img = &x->val.at(n, c, 0, 0);
      const float* ker = &w->val.at(c, 0, 0, 0);
      const float bc = b ? b->val[c] : 0.f;
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          double acc = bc;
          for (int ky = 0; ky < ws.h; ++ky) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= xs.h) continue;
            for (int kx = 0; kx < ws.w; ++kx) {
              const int ix = ox * stride - pad + kx;
              if (ix >= 0 && ix < xs.w) acc += double(img[long(iy) * xs.w + ix]) * ker[ky * ws.w + kx];
            }
          }
          out.at(n, c, oy, ox) = float(acc);
        }
    }
  std::vector<Var> parents = b ? std::vector<Var>{x, w, b} : std::vector<Var>{x, w};
  const int kh = ws.h, kw = ws.w;
  return make_node(std::move(out), std::move(parents), [stride, pad, kh, kw](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    const Shape& xs = px.val.shape();
    const Shape& os = self.val.shape();
    if (px.needs_grad) px.ensure_grad();
    if (pw.needs_grad) pw.ensure_grad();
    for (int n = 0; n < xs.n; ++n)
      for (int c = 0; c < xs.c; ++c) {
        const float* img = &px.val.at(n, c, 0, 0);
        const float* ker = &pw.val.at(c, 0, 0, 0);
        const float* g = &self.grad.at(n, c, 0, 0);
        for (int oy = 0; oy < os.h; ++oy)
          for (int ox = 0; ox < os.w; ++ox) {
            const float gv = g[long(oy) * os.w + ox];
            if (gv == 0.f) continue;
            for (int ky = 0; ky < kh; ++ky) {
              const int iy = oy * stride - pad + ky;
              if (iy < 0 || iy >= xs.h) continue;
              for (int kx = 0; kx < kw; ++kx) {
                const int ix = ox * stride - pad + kx;
                if (ix < 0 || ix >= xs.w) continue;
                if (px.needs_grad) px.grad.at(n, c, iy, ix) += gv * ker[ky * kw + kx];
                if (pw.needs_grad) pw.grad.at(c, 0, ky, kx) += gv * img[long(iy) * xs.w + ix];
              }
            }
          }
      }
    if (self.parents.size() > 2) {
      Node& pb = *self.parents[2];
      if (pb.needs_grad) {
        pb.ensure_grad();
        for (int c = 0; c < xs.c; ++c) {
          double acc = 0.0;
          for (int n = 0; n < os.n; ++n) {
            const float* g = &self.grad.at(n, c, 0, 0);
            for (long k = 0; k < long(os.h) * os.w; ++k) acc += g[k];
          }
          pb.grad[c] += float(acc);
        }
      }
    }
  });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  const Shape& xs = x->val.shape();
  const Shape& ws = w->val.shape();
  if (xs.h != 1 || xs.w != 1) throw DomainError("linear: input must be (N,K,1,1)");
  if (ws.c != xs.c) throw DomainError("linear: weight size mismatch");
  const int n = xs.n, k = xs.c, m = ws.n;
  Tensor out(Shape(n, m, 1, 1));
  cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasTrans, n, m, k, 1.f, x->val.data(), k,
              w->val.data(), k, 0.f, out.data(), m);
  if (b) {
    if (b->val.size() != m) throw DomainError("linear: bias size mismatch");
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) out[long(i) * m + j] += b->val[j];
  }
  std::vector<Var> parents = b ? std::vector<Var>{x, w, b} : std::vector<Var>{x, w};
  return make_node(std::move(out), std::move(parents), [n, k, m](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    if (px.needs_grad) {
      px.ensure_grad();
      cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, n, k, m, 1.f, self.grad.data(), m,
                  pw.val.data(), k, 1.f, px.grad.data(), k);
    }
    if (pw.needs_grad) {
      pw.ensure_grad();
      cblas_sgemm(CblasRowMajor, CblasTrans, CblasNoTrans, m, k, n, 1.f, self.grad.data(), m,
                  px.val.data(), k, 1.f, pw.grad.data(), k);
    }
    if (self.parents.size() > 2) {
      Node& pb = *self.parents[2];
      if (pb.needs_grad) {
        pb.ensure_grad();
        for (int j = 0; j < m; ++j) {
          double acc = 0.0;
          for (int i = 0; i < n; ++i) acc += self.grad[long(i) * m + j];
          pb.grad[j] += float(acc);
        }
      }
    }
  });
}

Var maxpool2(const Var& x) {
  const Shape& s = x->val.shape();
  const int oh = s.h / 2, ow = s.w / 2;
  Tensor out(Shape(s.n, s.c, oh, ow));
  auto arg = std::make_shared<std::vector<int>>(size_t(out.size()));
  long k = 0;
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox, ++k) {
          float best = -1e30f;
          int besti = 0;
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const long idx = x->val.index(n, c, oy * 2 + dy, ox * 2 + dx);
              if (x->val[idx] > best) {
                best = x->val[idx];
                besti = int(idx);
              }
            }
          out[k] = best;
          (*arg)[size_t(k)] = besti;
        }
  return make_node(std::move(out), {x}, [arg](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.needs_grad) return;
    pa.ensure_grad();
    const long n = self.val.size();
    for (long i = 0; i < n; ++i) pa.grad[(*arg)[size_t(i)]] += self.grad[i];
  });
}

Var avgpool2(const Var& x) {
  const Shape& s = x->val.shape();
  const int oh = s.h / 2, ow = s.w / 2;
  Tensor out(Shape(s.n, s.c, oh, ow));
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox)
          out.at(n, c, oy, ox) =
              0.25f * (x->val.at(n, c, oy * 2, ox * 2) + x->val.at(n, c, oy * 2, ox * 2 + 1) +
                       x->val.at(n, c, oy * 2 + 1, ox * 2) + x->val.at(n, c, oy * 2 + 1, ox * 2 + 1));
  return make_node(std::move(out), {x}, [](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.needs_grad) return;
    pa.ensure_grad();
    const Shape& os = self.val.shape();
    for (int n = 0; n < os.n; ++n)
      for (int c = 0; c < os.c; ++c)
        for (int oy = 0; oy < os.h; ++oy)
          for (int ox = 0; ox < os.w; ++ox) {
            const float g = 0.25f * self.grad.at(n, c, oy, ox);
            pa.grad.at(n, c, oy * 2, ox * 2) += g;
            pa.grad.at(n, c, oy * 2, ox * 2 + 1) += g;
            pa.grad.at(n, c, oy * 2 + 1, ox * 2) += g;
            pa.grad.at(n, c, oy * 2 + 1, ox * 2 + 1) += g;
          }
  });
}

Var global_avg_pool(const Var& x) {
  const Shape& s = x->val.shape();
  const long plane = long(s.h) * s.w;
  Tensor out(Shape(s.n, s.c, 1, 1));
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const float* src = &x->val.at(n, c, 0, 0);
      double acc = 0.0;
      for (long j = 0; j < plane; ++j) acc += src[j];
      out.at(n, c, 0, 0) = float(acc / double(plane));
    }
  return make_node(std::move(out), {x}, [](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.needs_grad) return;
    pa.ensure_grad();
    const Shape& s = pa.val.shape();
    const long plane = long(s.h) * s.w;
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c) {
        const float g = self.grad.at(n, c, 0, 0) / float(plane);
        float* dst = &pa.grad.at(n, c, 0, 0);
        for (long j = 0; j < plane; ++j) dst[j] += g;
      }
  });
}

Var batchnorm(const Var& x, const Var& gamma, const Var& beta, Tensor& run_mean, Tensor& run_var,
              bool training, float momentum, float eps) {
  const Shape& s = x->val.shape();
  if (gamma->val.size() != s.c || beta->val.size() != s.c)
    throw DomainError("batchnorm: parameter size mismatch");
  const long plane = long(s.h) * s.w;
  const long m = long(s.n) * plane;
  Tensor out(s);

  if (!training) {
    for (int c = 0; c < s.c; ++c) {
      const float inv = 1.f / std::sqrt(run_var[c] + eps);
      const float g = gamma->val[c], b = beta->val[c], mu = run_mean[c];
      for (int n = 0; n < s.n; ++n) {
        const float* src = &x->val.at(n, c, 0, 0);
        float* dst = &out.at(n, c, 0, 0);
        for (long j = 0; j < plane; ++j) dst[j] = g * (src[j] - mu) * inv + b;
      }
    }
    return make_node(std::move(out), {x, gamma, beta},
                     [rv = run_var, rm = run_mean, eps](Node& self) {
                       Node& px = *self.parents[0];
                       Node& pg = *self.parents[1];
                       Node& pb = *self.parents[2];
                       const Shape& s = px.val.shape();
                       const long plane = long(s.h) * s.w;
                       for (int c = 0; c < s.c; ++c) {
                         const float inv = 1.f / std::sqrt(rv[c] + eps);
                         const float g = pg.val[c];
                         double dg = 0.0, db = 0.0;
                         for (int n = 0; n < s.n; ++n) {
                           const float* gr = &self.grad.at(n, c, 0, 0);
                           const float* xv = &px.val.at(n, c, 0, 0);
                           if (px.needs_grad) {
                             px.ensure_grad();
                             float* dst = &px.grad.at(n, c, 0, 0);
                             for (long j = 0; j < plane; ++j) dst[j] += gr[j] * g * inv;
                           }
                           for (long j = 0; j < plane; ++j) {
                             dg += double(gr[j]) * (xv[j] - rm[c]) * inv;
                             db += gr[j];
                           }
                         }
                         if (pg.needs_grad) {
                           pg.ensure_grad();
                           pg.grad[c] += float(dg);
                         }
                         if (pb.needs_grad) {
                           pb.ensure_grad();
                           pb.grad[c] += float(db);
                         }
                       }
                     });
  }

  // training mode: batch statistics
  auto mean = std::make_shared<std::vector<float>>(size_t(s.c));
  auto ivar = std::make_shared<std::vector<float>>(size_t(s.c));
  for (int c = 0; c < s.c; ++c) {
    double acc = 0.0;
    for (int n = 0; n < s.n; ++n) {
      const float* src = &x->val.at(n, c, 0, 0);
      for (long j = 0; j < plane; ++j) acc += src[j];
    }
    const float mu = float(acc / double(m));
    double vacc = 0.0;
    for (int n = 0; n < s.n; ++n) {
      const float* src = &x->val.at(n, c, 0, 0);
      for (long j = 0; j < plane; ++j) {
        const double dlt = src[j] - mu;
        vacc += dlt * dlt;
      }
    }
    const float var = float(vacc / double(m));
    (*mean)[c] = mu;
    (*ivar)[c] = 1.f / std::sqrt(var + eps);
    run_mean[c] = (1.f - momentum) * run_mean[c] + momentum * mu;
    run_var[c] = (1.f - momentum) * run_var[c] + momentum * var;
    const float g = gamma->val[c], b = beta->val[c];
    for (int n = 0; n < s.n; ++n) {
      const float* src = &x->val.at(n, c, 0, 0);
      float* dst = &out.at(n, c, 0, 0);
      for (long j = 0; j < plane; ++j) dst[j] = g * (src[j] - mu) * (*ivar)[c] + b;
    }
  }
  return make_node(std::move(out), {x, gamma, beta}, [mean, ivar](Node& self) {
    Node& px = *self.parents[0];
    Node& pg = *self.parents[1];
    Node& pb = *self.parents[2];
    const Shape& s = px.val.shape();
    const long plane = long(s.h) * s.w;
    const long m = long(s.n) * plane;
    for (int c = 0; c < s.c; ++c) {
      const float mu = (*mean)[c], inv = (*ivar)[c], g = pg.val[c];
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int n = 0; n < s.n; ++n) {
        const float* gr = &self.grad.at(n, c, 0, 0);
        const float* xv = &px.val.at(n, c, 0, 0);
        for (long j = 0; j < plane; ++j) {
          sum_dy += gr[j];
          sum_dy_xhat += double(gr[j]) * (xv[j] - mu) * inv;
        }
      }
      if (pg.needs_grad) {
        pg.ensure_grad();
        pg.grad[c] += float(sum_dy_xhat);
      }
      if (pb.needs_grad) {
        pb.ensure_grad();
        pb.grad[c] += float(sum_dy);
      }
      if (px.needs_grad) {
        px.ensure_grad();
        const float k1 = float(sum_dy / double(m));
        const float k2 = float(sum_dy_xhat / double(m));
        for (int n = 0; n < s.n; ++n) {
          const float* gr = &self.grad.at(n, c, 0, 0);
          const float* xv = &px.val.at(n, c, 0, 0);
          float* dst = &px.grad.at(n, c, 0, 0);
          for (long j = 0; j < plane; ++j) {
            const float xhat = (xv[j] - mu) * inv;
            dst[j] += g * inv * (gr[j] - k1 - xhat * k2);
          }
        }
      }
    }
  });
}

namespace {

struct SampleGeom {
  // px = aj*j + ai*i + c0, py = bj*j + bi*i + c1 (double precision)
  double aj, ai, c0, bj, bi, c1;
};

// Ratios are formed directly ((in-1)/(out-1), not via the normalized grid)
// so an identity matrix at equal sizes yields px == j bit-exactly.
SampleGeom sample_geom(const float* m, int in_h, int in_w, int out_h, int out_w) {
  const double rxw = out_w > 1 ? double(in_w - 1) / double(out_w - 1) : 0.0;
  const double rxh = out_h > 1 ? double(in_w - 1) / double(out_h - 1) : 0.0;
  const double ryw = out_w > 1 ? double(in_h - 1) / double(out_w - 1) : 0.0;
  const double ryh = out_h > 1 ? double(in_h - 1) / double(out_h - 1) : 0.0;
  const double hx = (in_w - 1) / 2.0, hy = (in_h - 1) / 2.0;
  const double uoff = out_w > 1 ? 1.0 : 0.0;
  const double voff = out_h > 1 ? 1.0 : 0.0;
  SampleGeom g;
  g.aj = m[0] * rxw;
  g.ai = m[1] * rxh;
  g.c0 = (double(m[2]) + 1.0 - double(m[0]) * uoff - double(m[1]) * voff) * hx;
  g.bj = m[3] * ryw;
  g.bi = m[4] * ryh;
  g.c1 = (double(m[5]) + 1.0 - double(m[3]) * uoff - double(m[4]) * voff) * hy;
  return g;
}

}  // namespace

Var affine_sample(const Var& x, const Var& mat, int out_h, int out_w) {
  const Shape& s = x->val.shape();
  if (mat->val.size() != 6) throw DomainError("affine_sample: matrix must have 6 entries");
  const SampleGeom g = sample_geom(mat->val.data(), s.h, s.w, out_h, out_w);
  Tensor out(Shape(s.n, s.c, out_h, out_w));
  for (int i = 0; i < out_h; ++i)
    for (int j = 0; j < out_w; ++j) {
      const double px = g.aj * j + g.ai * i + g.c0;
      const double py = g.bj * j + g.bi * i + g.c1;
      const int x0 = int(std::floor(px)), y0 = int(std::floor(py));
      const float wx = float(px - x0), wy = float(py - y0);
      for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c) {
          auto pix = [&](int yy, int xx) -> float {
            return (xx >= 0 && xx < s.w && yy >= 0 && yy < s.h) ? x->val.at(n, c, yy, xx) : 0.f;
          };
          const float v00 = pix(y0, x0), v01 = pix(y0, x0 + 1);
          const float v10 = pix(y0 + 1, x0), v11 = pix(y0 + 1, x0 + 1);
          out.at(n, c, i, j) = (1.f - wy) * ((1.f - wx) * v00 + wx * v01) +
                               wy * ((1.f - wx) * v10 + wx * v11);
        }
    }
  return make_node(std::move(out), {x, mat}, [out_h, out_w](Node& self) {
    Node& px_node = *self.parents[0];
    Node& pm = *self.parents[1];
    const Shape& s = px_node.val.shape();
    const SampleGeom g = sample_geom(pm.val.data(), s.h, s.w, out_h, out_w);
    const double su = out_w > 1 ? 2.0 / (out_w - 1) : 0.0;
    const double sv = out_h > 1 ? 2.0 / (out_h - 1) : 0.0;
    const double hx = (s.w - 1) / 2.0, hy = (s.h - 1) / 2.0;
    if (px_node.needs_grad) px_node.ensure_grad();
    if (pm.needs_grad) pm.ensure_grad();
    double dm[6] = {0, 0, 0, 0, 0, 0};
    for (int i = 0; i < out_h; ++i)
      for (int j = 0; j < out_w; ++j) {
        const double px = g.aj * j + g.ai * i + g.c0;
        const double py = g.bj * j + g.bi * i + g.c1;
        const int x0 = int(std::floor(px)), y0 = int(std::floor(py));
        const float wx = float(px - x0), wy = float(py - y0);
        double dpx = 0.0, dpy = 0.0;
        for (int n = 0; n < s.n; ++n)
          for (int c = 0; c < s.c; ++c) {
            const float gr = self.grad.at(n, c, i, j);
            if (gr == 0.f) continue;
            auto pix = [&](int yy, int xx) -> float {
              return (xx >= 0 && xx < s.w && yy >= 0 && yy < s.h) ? px_node.val.at(n, c, yy, xx)
                                                                  : 0.f;
            };
            const float v00 = pix(y0, x0), v01 = pix(y0, x0 + 1);
            const float v10 = pix(y0 + 1, x0), v11 = pix(y0 + 1, x0 + 1);
            if (px_node.needs_grad) {
              auto splat = [&](int yy, int xx, float wgt) {
                if (xx >= 0 && xx < s.w && yy >= 0 && yy < s.h)
                  px_node.grad.at(n, c, yy, xx) += gr * wgt;
              };
              splat(y0, x0, (1.f - wy) * (1.f - wx));
              splat(y0, x0 + 1, (1.f - wy) * wx);
              splat(y0 + 1, x0, wy * (1.f - wx));
              splat(y0 + 1, x0 + 1, wy * wx);
            }
            if (pm.needs_grad) {
              dpx += double(gr) * ((1.f - wy) * (v01 - v00) + wy * (v11 - v10));
              dpy += double(gr) * ((1.f - wx) * (v10 - v00) + wx * (v11 - v01));
            }
          }
        if (pm.needs_grad) {
          const double u = su * j - (out_w > 1 ? 1.0 : 0.0);
          const double v = sv * i - (out_h > 1 ? 1.0 : 0.0);
          dm[0] += dpx * u * hx;
          dm[1] += dpx * v * hx;
          dm[2] += dpx * hx;
          dm[3] += dpy * u * hy;
          dm[4] += dpy * v * hy;
          dm[5] += dpy * hy;
        }
      }
    if (pm.needs_grad)
      for (int k = 0; k < 6; ++k) pm.grad[k] += float(dm[k]);
  });
}

Var resize_bilinear(const Var& x, int out_h, int out_w) {
  Tensor ident(Shape(1, 6, 1, 1));
  ident[0] = 1.f;
  ident[4] = 1.f;
  return affine_sample(x, make_const(std::move(ident)), out_h, out_w);
}

}  // namespace aait
