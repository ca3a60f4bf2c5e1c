#include "tabunas/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tabunas/errors.hpp"

namespace tabunas {

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(shape), data_(std::move(values)) {
  if (data_.size() != shape_.size()) {
    throw ShapeError("tensor value count " + std::to_string(data_.size()) +
                     " does not match shape size " + std::to_string(shape_.size()));
  }
}

Tensor Tensor::slice(int first, int count) const {
  if (first < 0 || count < 0 || first + count > shape_.n) throw ShapeError("batch slice out of range");
  Shape s = shape_;
  s.n = count;
  const std::size_t per = static_cast<std::size_t>(shape_.c) * shape_.plane();
  std::vector<double> v(data_.begin() + static_cast<std::ptrdiff_t>(first * per),
                        data_.begin() + static_cast<std::ptrdiff_t>((first + count) * per));
  return Tensor(s, std::move(v));
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

namespace ops {
namespace {

void require(bool cond, const char* what) {
  if (!cond) throw ShapeError(what);
}

// Output columns ow for which ow*stride + kw - pad lies in [0, width).
inline void column_range(int out_w, int width, int stride, int kw, int pad, int& lo, int& hi) {
  const int off = kw - pad;
  lo = off >= 0 ? 0 : (-off + stride - 1) / stride;
  const int last = width - 1 - off;  // need ow*stride <= last
  hi = last < 0 ? 0 : std::min(out_w, last / stride + 1);
}

struct ConvGeometry {
  int n, cin, h, w, cout, k, stride, groups, cin_g, cout_g, pad, oh, ow;
};

ConvGeometry geometry(const Shape& x, const Shape& wt, int stride, int groups) {
  require(stride >= 1 && groups >= 1, "conv2d: stride and groups must be positive");
  require(x.c % groups == 0 && wt.n % groups == 0, "conv2d: channels not divisible by groups");
  require(wt.c == x.c / groups, "conv2d: weight input channels mismatch");
  require(wt.h == wt.w && wt.h % 2 == 1, "conv2d: kernel must be square and odd");
  ConvGeometry g{};
  g.n = x.n;
  g.cin = x.c;
  g.h = x.h;
  g.w = x.w;
  g.cout = wt.n;
  g.k = wt.h;
  g.stride = stride;
  g.groups = groups;
  g.cin_g = x.c / groups;
  g.cout_g = wt.n / groups;
  g.pad = g.k / 2;
  g.oh = (x.h + 2 * g.pad - g.k) / stride + 1;
  g.ow = (x.w + 2 * g.pad - g.k) / stride + 1;
  return g;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride, int groups) {
  const ConvGeometry g = geometry(x.shape(), weight.shape(), stride, groups);
  const bool has_bias = bias.size() > 0;
  require(!has_bias || static_cast<int>(bias.size()) == g.cout, "conv2d: bias size mismatch");
  Tensor y(Shape{g.n, g.cout, g.oh, g.ow});
  for (int n = 0; n < g.n; ++n) {
    for (int oc = 0; oc < g.cout; ++oc) {
      double* out = y.plane(n, oc);
      if (has_bias) std::fill(out, out + y.shape().plane(), bias[oc]);
      const int grp = oc / g.cout_g;
      for (int icg = 0; icg < g.cin_g; ++icg) {
        const double* in = x.plane(n, grp * g.cin_g + icg);
        const double* wk = weight.data() + (static_cast<std::size_t>(oc) * g.cin_g + icg) * g.k * g.k;
        for (int kh = 0; kh < g.k; ++kh) {
          for (int kw = 0; kw < g.k; ++kw) {
            const double wv = wk[kh * g.k + kw];
            int lo, hi;
            column_range(g.ow, g.w, g.stride, kw, g.pad, lo, hi);
            for (int oh = 0; oh < g.oh; ++oh) {
              const int ih = oh * g.stride + kh - g.pad;
              if (ih < 0 || ih >= g.h) continue;
              const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(ih) * g.w + (kw - g.pad);
              double* orow = out + static_cast<std::size_t>(oh) * g.ow;
              for (int ow = lo; ow < hi; ++ow) orow[ow] += wv * in[base + ow * g.stride];
            }
          }
        }
      }
    }
  }
  return y;
}

void conv2d_backward(const Tensor& x, const Tensor& weight, int stride, int groups,
                     const Tensor& dy, Tensor& dx, Tensor& dweight, Tensor& dbias) {
  const ConvGeometry g = geometry(x.shape(), weight.shape(), stride, groups);
  require(dy.shape() == (Shape{g.n, g.cout, g.oh, g.ow}), "conv2d_backward: dy shape mismatch");
  const bool has_bias = dbias.size() > 0;
  for (int n = 0; n < g.n; ++n) {
    for (int oc = 0; oc < g.cout; ++oc) {
      const double* gout = dy.plane(n, oc);
      if (has_bias) {
        double s = 0.0;
        for (std::size_t i = 0; i < dy.shape().plane(); ++i) s += gout[i];
        dbias[oc] += s;
      }
      const int grp = oc / g.cout_g;
      for (int icg = 0; icg < g.cin_g; ++icg) {
        const double* in = x.plane(n, grp * g.cin_g + icg);
        double* gin = dx.plane(n, grp * g.cin_g + icg);
        const std::size_t woff = (static_cast<std::size_t>(oc) * g.cin_g + icg) * g.k * g.k;
        const double* wk = weight.data() + woff;
        double* gwk = dweight.data() + woff;
        for (int kh = 0; kh < g.k; ++kh) {
          for (int kw = 0; kw < g.k; ++kw) {
            const double wv = wk[kh * g.k + kw];
            double acc = 0.0;
            int lo, hi;
            column_range(g.ow, g.w, g.stride, kw, g.pad, lo, hi);
            for (int oh = 0; oh < g.oh; ++oh) {
              const int ih = oh * g.stride + kh - g.pad;
              if (ih < 0 || ih >= g.h) continue;
              const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(ih) * g.w + (kw - g.pad);
              const double* drow = gout + static_cast<std::size_t>(oh) * g.ow;
              for (int ow = lo; ow < hi; ++ow) {
                const std::ptrdiff_t at = base + ow * g.stride;
                acc += drow[ow] * in[at];
                gin[at] += wv * drow[ow];
              }
            }
            gwk[kh * g.k + kw] += acc;
          }
        }
      }
    }
  }
}

Tensor relu(const Tensor& x) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return y;
}

void relu_backward(const Tensor& x, const Tensor& dy, Tensor& dx) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > 0.0) dx[i] += dy[i];
  }
}

Tensor sigmoid(const Tensor& x) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
  return y;
}

void sigmoid_backward(const Tensor& y, const Tensor& dy, Tensor& dx) {
  for (std::size_t i = 0; i < y.size(); ++i) dx[i] += dy[i] * y[i] * (1.0 - y[i]);
}

Tensor global_avg_pool(const Tensor& x) {
  const Shape& s = x.shape();
  Tensor y(Shape{s.n, s.c, 1, 1});
  const double inv = 1.0 / static_cast<double>(s.plane());
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const double* p = x.plane(n, c);
      double sum = 0.0;
      for (std::size_t i = 0; i < s.plane(); ++i) sum += p[i];
      y.at(n, c, 0, 0) = sum * inv;
    }
  }
  return y;
}

void global_avg_pool_backward(const Tensor& dy, Tensor& dx) {
  const Shape& s = dx.shape();
  const double inv = 1.0 / static_cast<double>(s.plane());
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const double g = dy.at(n, c, 0, 0) * inv;
      double* p = dx.plane(n, c);
      for (std::size_t i = 0; i < s.plane(); ++i) p[i] += g;
    }
  }
}

Tensor channel_scale(const Tensor& x, const Tensor& gate) {
  const Shape& s = x.shape();
  require(gate.shape() == (Shape{s.n, s.c, 1, 1}), "channel_scale: gate shape mismatch");
  Tensor y(s);
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const double g = gate.at(n, c, 0, 0);
      const double* p = x.plane(n, c);
      double* q = y.plane(n, c);
      for (std::size_t i = 0; i < s.plane(); ++i) q[i] = p[i] * g;
    }
  }
  return y;
}

void channel_scale_backward(const Tensor& x, const Tensor& gate, const Tensor& dy, Tensor& dx,
                            Tensor& dgate) {
  const Shape& s = x.shape();
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const double g = gate.at(n, c, 0, 0);
      const double* p = x.plane(n, c);
      const double* d = dy.plane(n, c);
      double* q = dx.plane(n, c);
      double acc = 0.0;
      for (std::size_t i = 0; i < s.plane(); ++i) {
        q[i] += d[i] * g;
        acc += d[i] * p[i];
      }
      dgate.at(n, c, 0, 0) += acc;
    }
  }
}

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "add: shape mismatch");
  Tensor y(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) y[i] = a[i] + b[i];
  return y;
}

void add_backward(const Tensor& dy, Tensor& da, Tensor& db) {
  for (std::size_t i = 0; i < dy.size(); ++i) {
    da[i] += dy[i];
    db[i] += dy[i];
  }
}

Tensor align_add(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  require(sa.n == sb.n && sa.h == sb.h && sa.w == sb.w, "align_add: spatial shape mismatch");
  Tensor y = a;
  const int shared = std::min(sa.c, sb.c);
  for (int n = 0; n < sa.n; ++n) {
    for (int c = 0; c < shared; ++c) {
      const double* p = b.plane(n, c);
      double* q = y.plane(n, c);
      for (std::size_t i = 0; i < sa.plane(); ++i) q[i] += p[i];
    }
  }
  return y;
}

void align_add_backward(const Tensor& dy, Tensor& da, Tensor& db) {
  const Shape& sa = da.shape();
  const int shared = std::min(sa.c, db.shape().c);
  for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i];
  for (int n = 0; n < sa.n; ++n) {
    for (int c = 0; c < shared; ++c) {
      const double* d = dy.plane(n, c);
      double* q = db.plane(n, c);
      for (std::size_t i = 0; i < sa.plane(); ++i) q[i] += d[i];
    }
  }
}

Tensor upsample2x(const Tensor& x) {
  const Shape& s = x.shape();
  Tensor y(Shape{s.n, s.c, 2 * s.h, 2 * s.w});
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const double* p = x.plane(n, c);
      double* q = y.plane(n, c);
      for (int h = 0; h < 2 * s.h; ++h) {
        for (int w = 0; w < 2 * s.w; ++w) {
          q[static_cast<std::size_t>(h) * 2 * s.w + w] = p[static_cast<std::size_t>(h / 2) * s.w + w / 2];
        }
      }
    }
  }
  return y;
}

void upsample2x_backward(const Tensor& dy, Tensor& dx) {
  const Shape& s = dx.shape();
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const double* d = dy.plane(n, c);
      double* q = dx.plane(n, c);
      for (int h = 0; h < 2 * s.h; ++h) {
        for (int w = 0; w < 2 * s.w; ++w) {
          q[static_cast<std::size_t>(h / 2) * s.w + w / 2] += d[static_cast<std::size_t>(h) * 2 * s.w + w];
        }
      }
    }
  }
}

}  // namespace ops
}  // namespace tabunas
