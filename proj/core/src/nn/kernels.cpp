#include "drd/nn/kernels.hpp"

#include <cblas.h>
#if defined(__SSE2__)
#include <immintrin.h>
#endif

#include <algorithm>
#include <cstddef>
#include <cstring>
#include <limits>

namespace drd::nn {

#if defined(__SSE2__)
DenormalsAreZero::DenormalsAreZero() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040u); }  // FTZ | DAZ
DenormalsAreZero::~DenormalsAreZero() { _mm_setcsr(saved_); }
#else
DenormalsAreZero::DenormalsAreZero() = default;
DenormalsAreZero::~DenormalsAreZero() = default;
#endif

namespace {

// Row-major C = alpha op(A) op(B) + beta C.
void gemm(bool ta, bool tb, int m, int n, int k, float alpha, const float* a, int lda, const float* b, int ldb,
          float beta, float* c, int ldc) {
  cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda,
              b, ldb, beta, c, ldc);
}

void gemm(bool ta, bool tb, int m, int n, int k, double alpha, const double* a, int lda, const double* b, int ldb,
          double beta, double* c, int ldc) {
  cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda,
              b, ldb, beta, c, ldc);
}

void require(bool ok, const char* what) {
  if (!ok) throw InvalidArgument(what);
}

void require_rank4(const std::vector<int>& s, const char* what) {
  if (s.size() != 4) throw InvalidArgument(std::string(what) + ": expected NCHW tensor, got " + shape_string(s));
}

// Bound on the im2col scratch so wide decoder convs on large batches stay
// within a few tens of megabytes.
constexpr std::size_t kColBudgetBytes = std::size_t{48} << 20;

template <typename T>
struct ConvDims {
  int n, cin, h, w, cout, k, ho, wo;
  std::size_t rows() const { return static_cast<std::size_t>(cin) * k * k; }
  std::size_t spatial() const { return static_cast<std::size_t>(ho) * wo; }
  int chunk() const {
    const std::size_t per_sample = rows() * spatial() * sizeof(T);
    const std::size_t c = std::max<std::size_t>(1, kColBudgetBytes / std::max<std::size_t>(per_sample, 1));
    return static_cast<int>(std::min<std::size_t>(c, static_cast<std::size_t>(n)));
  }
};

template <typename T>
ConvDims<T> conv_dims(const Tensor<T>& x, const Tensor<T>& weight, Conv2dGeometry g) {
  require_rank4(x.shape(), "conv2d input");
  require_rank4(weight.shape(), "conv2d weight");
  require(weight.dim(2) == weight.dim(3), "conv2d: square kernels only");
  if (x.dim(1) != weight.dim(1)) {
    throw InvalidArgument("conv2d: channel mismatch, input " + shape_string(x.shape()) + " weight " +
                          shape_string(weight.shape()));
  }
  ConvDims<T> d{};
  d.n = x.dim(0);
  d.cin = x.dim(1);
  d.h = x.dim(2);
  d.w = x.dim(3);
  d.cout = weight.dim(0);
  d.k = weight.dim(2);
  d.ho = conv_out_size(d.h, d.k, g.stride, g.pad);
  d.wo = conv_out_size(d.w, d.k, g.stride, g.pad);
  return d;
}

// Output columns [ow_lo, ow_hi) whose input column ow*stride - pad + kj
// falls inside [0, w).
inline void valid_cols(int wo, int w, int stride, int pad, int kj, int& lo, int& hi) {
  lo = 0;
  while (lo < wo && lo * stride - pad + kj < 0) ++lo;
  hi = wo;
  while (hi > lo && (hi - 1) * stride - pad + kj >= w) --hi;
}

// col[(c*k + ki)*k + kj][s*HoWo + oh*Wo + ow] for samples [n0, n0 + count).
template <typename T>
void im2col(const Tensor<T>& x, const ConvDims<T>& d, Conv2dGeometry g, int n0, int count, std::vector<T>& col) {
  const std::size_t cols = static_cast<std::size_t>(count) * d.spatial();
  col.resize(d.rows() * cols);
  for (int c = 0; c < d.cin; ++c) {
    for (int ki = 0; ki < d.k; ++ki) {
      for (int kj = 0; kj < d.k; ++kj) {
        int lo = 0, hi = 0;
        valid_cols(d.wo, d.w, g.stride, g.pad, kj, lo, hi);
        T* row = col.data() + ((static_cast<std::size_t>(c) * d.k + ki) * d.k + kj) * cols;
        for (int s = 0; s < count; ++s) {
          const T* src = x.data() + x.offset(n0 + s, c, 0, 0);
          T* dst = row + static_cast<std::size_t>(s) * d.spatial();
          for (int oh = 0; oh < d.ho; ++oh) {
            T* out = dst + static_cast<std::size_t>(oh) * d.wo;
            const int ih = oh * g.stride - g.pad + ki;
            if (ih < 0 || ih >= d.h) {
              std::fill(out, out + d.wo, T{0});
              continue;
            }
            std::fill(out, out + lo, T{0});
            std::fill(out + hi, out + d.wo, T{0});
            const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(ih) * d.w - g.pad + kj;
            if (g.stride == 1) {
              if (hi > lo) std::copy(src + base + lo, src + base + hi, out + lo);
            } else {
              for (int ow = lo; ow < hi; ++ow) out[ow] = src[base + static_cast<std::ptrdiff_t>(ow) * g.stride];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const std::vector<T>& col, const ConvDims<T>& d, Conv2dGeometry g, int n0, int count, Tensor<T>& dx) {
  const std::size_t cols = static_cast<std::size_t>(count) * d.spatial();
  for (int c = 0; c < d.cin; ++c) {
    for (int ki = 0; ki < d.k; ++ki) {
      for (int kj = 0; kj < d.k; ++kj) {
        int lo = 0, hi = 0;
        valid_cols(d.wo, d.w, g.stride, g.pad, kj, lo, hi);
        const T* row = col.data() + ((static_cast<std::size_t>(c) * d.k + ki) * d.k + kj) * cols;
        for (int s = 0; s < count; ++s) {
          T* dst = dx.data() + dx.offset(n0 + s, c, 0, 0);
          const T* src = row + static_cast<std::size_t>(s) * d.spatial();
          for (int oh = 0; oh < d.ho; ++oh) {
            const int ih = oh * g.stride - g.pad + ki;
            if (ih < 0 || ih >= d.h) continue;
            const T* in = src + static_cast<std::size_t>(oh) * d.wo;
            const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(ih) * d.w - g.pad + kj;
            for (int ow = lo; ow < hi; ++ow) dst[base + static_cast<std::ptrdiff_t>(ow) * g.stride] += in[ow];
          }
        }
      }
    }
  }
}

template <typename T>
std::vector<T>& scratch(int slot) {
  thread_local std::vector<T> buffers[3];
  return buffers[slot];
}

std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::string shape_string(const std::vector<int>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

void set_compute_threads(int n) {
  if (n < 1) throw InvalidArgument("threads must be >= 1");
  openblas_set_num_threads(n);
}

int conv_out_size(int in, int kernel, int stride, int pad) {
  if (stride < 1 || pad < 0 || kernel < 1) throw InvalidArgument("conv: invalid geometry");
  const int span = in + 2 * pad - kernel;
  if (span < 0) throw InvalidArgument("conv: kernel larger than padded input");
  return span / stride + 1;
}

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, Conv2dGeometry g) {
  const auto d = conv_dims(x, weight, g);
  require(bias.size() == static_cast<std::size_t>(d.cout), "conv2d: bias length mismatch");
  Tensor<T> y({d.n, d.cout, d.ho, d.wo});
  auto& col = scratch<T>(0);
  auto& out = scratch<T>(1);
  const int chunk = d.chunk();
  for (int n0 = 0; n0 < d.n; n0 += chunk) {
    const int count = std::min(chunk, d.n - n0);
    const int cols = count * static_cast<int>(d.spatial());
    im2col(x, d, g, n0, count, col);
    out.resize(static_cast<std::size_t>(d.cout) * cols);
    gemm(false, false, d.cout, cols, static_cast<int>(d.rows()), T{1}, weight.data(), static_cast<int>(d.rows()),
         col.data(), cols, T{0}, out.data(), cols);
    for (int s = 0; s < count; ++s) {
      for (int co = 0; co < d.cout; ++co) {
        const T* src = out.data() + static_cast<std::size_t>(co) * cols + static_cast<std::size_t>(s) * d.spatial();
        T* dst = y.data() + y.offset(n0 + s, co, 0, 0);
        const T b = bias[static_cast<std::size_t>(co)];
        for (std::size_t p = 0; p < d.spatial(); ++p) dst[p] = src[p] + b;
      }
    }
  }
  return y;
}

template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& dy, Conv2dGeometry g,
                     Tensor<T>* dx, Tensor<T>& dweight, Tensor<T>& dbias) {
  const auto d = conv_dims(x, weight, g);
  require(dy.shape() == std::vector<int>({d.n, d.cout, d.ho, d.wo}), "conv2d backward: dy shape mismatch");
  if (dx != nullptr) *dx = Tensor<T>(x.shape());
  auto& col = scratch<T>(0);
  auto& dout = scratch<T>(1);
  auto& dcol = scratch<T>(2);
  const int chunk = d.chunk();
  const int rows = static_cast<int>(d.rows());
  for (int n0 = 0; n0 < d.n; n0 += chunk) {
    const int count = std::min(chunk, d.n - n0);
    const int cols = count * static_cast<int>(d.spatial());
    dout.resize(static_cast<std::size_t>(d.cout) * cols);
    for (int s = 0; s < count; ++s) {
      for (int co = 0; co < d.cout; ++co) {
        const T* src = dy.data() + dy.offset(n0 + s, co, 0, 0);
        T* dst = dout.data() + static_cast<std::size_t>(co) * cols + static_cast<std::size_t>(s) * d.spatial();
        std::memcpy(dst, src, d.spatial() * sizeof(T));
      }
    }
    for (int co = 0; co < d.cout; ++co) {
      const T* row = dout.data() + static_cast<std::size_t>(co) * cols;
      T acc{0};
      for (int p = 0; p < cols; ++p) acc += row[p];
      dbias[static_cast<std::size_t>(co)] += acc;
    }
    im2col(x, d, g, n0, count, col);
    gemm(false, true, d.cout, rows, cols, T{1}, dout.data(), cols, col.data(), cols, T{1}, dweight.data(), rows);
    if (dx != nullptr) {
      dcol.resize(static_cast<std::size_t>(rows) * cols);
      gemm(true, false, rows, cols, d.cout, T{1}, weight.data(), rows, dout.data(), cols, T{0}, dcol.data(), cols);
      col2im_add(dcol, d, g, n0, count, *dx);
    }
  }
}

template <typename T>
Tensor<T> maxpool2x2_forward(const Tensor<T>& x, std::vector<std::int64_t>& argmax) {
  require_rank4(x.shape(), "maxpool input");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int ho = (h + 1) / 2, wo = (w + 1) / 2;
  Tensor<T> y({n, c, ho, wo});
  argmax.assign(y.size(), 0);
  std::size_t o = 0;
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      for (int i = 0; i < ho; ++i) {
        for (int j = 0; j < wo; ++j, ++o) {
          T best = -std::numeric_limits<T>::infinity();
          std::int64_t best_at = -1;
          for (int di = 0; di < 2; ++di) {
            for (int dj = 0; dj < 2; ++dj) {
              const int ii = 2 * i + di, jj = 2 * j + dj;
              if (ii >= h || jj >= w) continue;
              const auto off = static_cast<std::int64_t>(x.offset(b, ch, ii, jj));
              if (best_at < 0 || x[static_cast<std::size_t>(off)] > best) {
                best = x[static_cast<std::size_t>(off)];
                best_at = off;
              }
            }
          }
          y[o] = best;
          argmax[o] = best_at;
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> maxpool2x2_backward(const Tensor<T>& dy, const std::vector<std::int64_t>& argmax,
                              const std::vector<int>& input_shape) {
  Tensor<T> dx(input_shape);
  for (std::size_t o = 0; o < dy.size(); ++o) dx[static_cast<std::size_t>(argmax[o])] += dy[o];
  return dx;
}

template <typename T>
Tensor<T> upsample2x_forward(const Tensor<T>& x) {
  require_rank4(x.shape(), "upsample input");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor<T> y({n, c, 2 * h, 2 * w});
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      for (int i = 0; i < 2 * h; ++i) {
        const T* src = x.data() + x.offset(b, ch, i / 2, 0);
        T* dst = y.data() + y.offset(b, ch, i, 0);
        for (int j = 0; j < 2 * w; ++j) dst[j] = src[j / 2];
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> upsample2x_backward(const Tensor<T>& dy) {
  require_rank4(dy.shape(), "upsample grad");
  const int n = dy.dim(0), c = dy.dim(1), h = dy.dim(2) / 2, w = dy.dim(3) / 2;
  Tensor<T> dx({n, c, h, w});
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      for (int i = 0; i < 2 * h; ++i) {
        const T* src = dy.data() + dy.offset(b, ch, i, 0);
        T* dst = dx.data() + dx.offset(b, ch, i / 2, 0);
        for (int j = 0; j < 2 * w; ++j) dst[j / 2] += src[j];
      }
    }
  }
  return dx;
}

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T{0} ? x[i] : T{0};
  return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& y, const Tensor<T>& dy) {
  Tensor<T> dx(dy.shape());
  for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = y[i] > T{0} ? dy[i] : T{0};
  return dx;
}

template <typename T>
Tensor<T> linear_forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  const int n = x.dim(0);
  const int in = static_cast<int>(x.size() / static_cast<std::size_t>(std::max(n, 1)));
  const int out = weight.dim(0);
  if (weight.rank() != 2 || weight.dim(1) != in) {
    throw InvalidArgument("linear: input width " + std::to_string(in) + " vs weight " + shape_string(weight.shape()));
  }
  require(bias.size() == static_cast<std::size_t>(out), "linear: bias length mismatch");
  Tensor<T> y({n, out, 1, 1});
  for (int b = 0; b < n; ++b) std::copy(bias.values().begin(), bias.values().end(), y.data() + static_cast<std::size_t>(b) * out);
  if (n > 0) gemm(false, true, n, out, in, T{1}, x.data(), in, weight.data(), in, T{1}, y.data(), out);
  return y;
}

template <typename T>
void linear_backward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& dy, Tensor<T>* dx,
                     Tensor<T>& dweight, Tensor<T>& dbias) {
  const int n = x.dim(0);
  const int in = weight.dim(1), out = weight.dim(0);
  for (int b = 0; b < n; ++b) {
    for (int o = 0; o < out; ++o) dbias[static_cast<std::size_t>(o)] += dy[static_cast<std::size_t>(b) * out + o];
  }
  if (n > 0) gemm(true, false, out, in, n, T{1}, dy.data(), out, x.data(), in, T{1}, dweight.data(), in);
  if (dx != nullptr) {
    *dx = Tensor<T>(x.shape());
    if (n > 0) gemm(false, false, n, in, out, T{1}, dy.data(), out, weight.data(), in, T{0}, dx->data(), in);
  }
}

template <typename T>
Tensor<T> global_maxpool_forward(const Tensor<T>& x, std::vector<std::int64_t>& argmax) {
  require_rank4(x.shape(), "global maxpool input");
  const int n = x.dim(0), c = x.dim(1);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  require(plane > 0, "global maxpool: empty spatial extent");
  Tensor<T> y({n, c, 1, 1});
  argmax.assign(y.size(), 0);
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const std::size_t base = x.offset(b, ch, 0, 0);
      std::size_t best = base;
      for (std::size_t p = 1; p < plane; ++p) {
        if (x[base + p] > x[best]) best = base + p;
      }
      const std::size_t o = static_cast<std::size_t>(b) * c + ch;
      y[o] = x[best];
      argmax[o] = static_cast<std::int64_t>(best);
    }
  }
  return y;
}

template <typename T>
Tensor<T> global_maxpool_backward(const Tensor<T>& dy, const std::vector<std::int64_t>& argmax,
                                  const std::vector<int>& input_shape) {
  Tensor<T> dx(input_shape);
  for (std::size_t o = 0; o < dy.size(); ++o) dx[static_cast<std::size_t>(argmax[o])] += dy[o];
  return dx;
}

template <typename T>
Tensor<T> concat_channels(const std::vector<const Tensor<T>*>& parts) {
  require(!parts.empty(), "concat: no inputs");
  const int n = parts.front()->dim(0), h = parts.front()->dim(2), w = parts.front()->dim(3);
  int c_total = 0;
  for (const auto* p : parts) {
    require_rank4(p->shape(), "concat input");
    if (p->dim(0) != n || p->dim(2) != h || p->dim(3) != w) {
      throw InvalidArgument("concat: N/H/W mismatch " + shape_string(p->shape()) + " vs " +
                            shape_string(parts.front()->shape()));
    }
    c_total += p->dim(1);
  }
  Tensor<T> y({n, c_total, h, w});
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int b = 0; b < n; ++b) {
    T* dst = y.data() + y.offset(b, 0, 0, 0);
    for (const auto* p : parts) {
      const std::size_t len = static_cast<std::size_t>(p->dim(1)) * plane;
      std::memcpy(dst, p->data() + p->offset(b, 0, 0, 0), len * sizeof(T));
      dst += len;
    }
  }
  return y;
}

template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& dy, const std::vector<int>& channel_counts) {
  const int n = dy.dim(0), h = dy.dim(2), w = dy.dim(3);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::vector<Tensor<T>> out;
  for (int c : channel_counts) out.emplace_back(std::vector<int>{n, c, h, w});
  for (int b = 0; b < n; ++b) {
    const T* src = dy.data() + dy.offset(b, 0, 0, 0);
    for (auto& part : out) {
      const std::size_t len = static_cast<std::size_t>(part.dim(1)) * plane;
      std::memcpy(part.data() + part.offset(b, 0, 0, 0), src, len * sizeof(T));
      src += len;
    }
  }
  return out;
}

template <typename T>
Tensor<T> dropout_forward(const Tensor<T>& x, double p, std::uint64_t seed, std::uint64_t stream,
                          std::vector<std::uint8_t>& mask) {
  require(p >= 0.0 && p < 1.0, "dropout: p must be in [0, 1)");
  Tensor<T> y(x.shape());
  mask.assign(x.size(), 0);
  const T scale = static_cast<T>(1.0 / (1.0 - p));
  const std::uint64_t base = mix(seed ^ mix(stream));
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double u = static_cast<double>(mix(base + i) >> 11) * 0x1.0p-53;
    if (u >= p) {
      mask[i] = 1;
      y[i] = x[i] * scale;
    }
  }
  return y;
}

template <typename T>
Tensor<T> dropout_backward(const Tensor<T>& dy, double p, const std::vector<std::uint8_t>& mask) {
  Tensor<T> dx(dy.shape());
  const T scale = static_cast<T>(1.0 / (1.0 - p));
  for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = mask[i] ? dy[i] * scale : T{0};
  return dx;
}

#define DRD_INSTANTIATE_KERNELS(T)                                                                                  \
  template Tensor<T> conv2d_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Conv2dGeometry);         \
  template void conv2d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Conv2dGeometry, Tensor<T>*, \
                                Tensor<T>&, Tensor<T>&);                                                            \
  template Tensor<T> maxpool2x2_forward(const Tensor<T>&, std::vector<std::int64_t>&);                             \
  template Tensor<T> maxpool2x2_backward(const Tensor<T>&, const std::vector<std::int64_t>&, const std::vector<int>&); \
  template Tensor<T> upsample2x_forward(const Tensor<T>&);                                                         \
  template Tensor<T> upsample2x_backward(const Tensor<T>&);                                                        \
  template Tensor<T> relu_forward(const Tensor<T>&);                                                               \
  template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);                                            \
  template Tensor<T> linear_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                         \
  template void linear_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Tensor<T>*, Tensor<T>&,      \
                                Tensor<T>&);                                                                        \
  template Tensor<T> global_maxpool_forward(const Tensor<T>&, std::vector<std::int64_t>&);                         \
  template Tensor<T> global_maxpool_backward(const Tensor<T>&, const std::vector<std::int64_t>&,                   \
                                             const std::vector<int>&);                                             \
  template Tensor<T> concat_channels(const std::vector<const Tensor<T>*>&);                                        \
  template std::vector<Tensor<T>> split_channels(const Tensor<T>&, const std::vector<int>&);                      \
  template Tensor<T> dropout_forward(const Tensor<T>&, double, std::uint64_t, std::uint64_t,                       \
                                     std::vector<std::uint8_t>&);                                                  \
  template Tensor<T> dropout_backward(const Tensor<T>&, double, const std::vector<std::uint8_t>&);

DRD_INSTANTIATE_KERNELS(float)
DRD_INSTANTIATE_KERNELS(double)

#undef DRD_INSTANTIATE_KERNELS

}  // namespace drd::nn
