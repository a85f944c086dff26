#pragma once

// Forward/backward kernels for the closed layer set. All tensors are NCHW;
// vectors are (N, C, 1, 1). Backward kernels accumulate into weight/bias
// gradients and overwrite input gradients.

#include <cstdint>
#include <vector>

#include "drd/nn/tensor.hpp"

namespace drd::nn {

struct Conv2dGeometry {
  int stride = 1;
  int pad = 0;
};

/// Worker threads used by the BLAS calls (n >= 1).
void set_compute_threads(int n);

/// Flushes denormal floats to zero on the calling thread while alive.
/// Trained weights and their gradients drift into the denormal range,
/// where x86 arithmetic runs several times slower.
class DenormalsAreZero {
 public:
  DenormalsAreZero();
  ~DenormalsAreZero();
  DenormalsAreZero(const DenormalsAreZero&) = delete;
  DenormalsAreZero& operator=(const DenormalsAreZero&) = delete;

 private:
  unsigned saved_ = 0;
};

/// Output spatial size of a conv; throws when the kernel does not fit.
int conv_out_size(int in, int kernel, int stride, int pad);

/// Cross-correlation; weight (Cout, Cin, K, K), bias (Cout).
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, Conv2dGeometry g);

template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& dy, Conv2dGeometry g,
                     Tensor<T>* dx, Tensor<T>& dweight, Tensor<T>& dbias);

/// 2x2 stride-2 max pool; odd extents are padded with -inf on the right /
/// bottom. argmax holds the flat input offset of each output's winner,
/// first row-major index on ties.
template <typename T>
Tensor<T> maxpool2x2_forward(const Tensor<T>& x, std::vector<std::int64_t>& argmax);

template <typename T>
Tensor<T> maxpool2x2_backward(const Tensor<T>& dy, const std::vector<std::int64_t>& argmax,
                              const std::vector<int>& input_shape);

/// Nearest-neighbour x2 upsampling.
template <typename T>
Tensor<T> upsample2x_forward(const Tensor<T>& x);

template <typename T>
Tensor<T> upsample2x_backward(const Tensor<T>& dy);

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x);

/// Gradient passes where the forward output was strictly positive.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& y, const Tensor<T>& dy);

/// y = x_flat W^T + b, x flattened per sample; weight (Out, In).
template <typename T>
Tensor<T> linear_forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T>
void linear_backward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& dy, Tensor<T>* dx,
                     Tensor<T>& dweight, Tensor<T>& dbias);

/// Per-channel spatial max (N, C, H, W) -> (N, C, 1, 1).
template <typename T>
Tensor<T> global_maxpool_forward(const Tensor<T>& x, std::vector<std::int64_t>& argmax);

template <typename T>
Tensor<T> global_maxpool_backward(const Tensor<T>& dy, const std::vector<std::int64_t>& argmax,
                                  const std::vector<int>& input_shape);

/// Concatenate along channels; inputs must agree in N, H, W.
template <typename T>
Tensor<T> concat_channels(const std::vector<const Tensor<T>*>& parts);

/// Inverse of concat: slices dy back into per-part gradients.
template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& dy, const std::vector<int>& channel_counts);

/// Counter-based keep mask: element i survives iff hash(seed, stream, i)
/// maps to u >= p. Survivors are scaled by 1 / (1 - p).
template <typename T>
Tensor<T> dropout_forward(const Tensor<T>& x, double p, std::uint64_t seed, std::uint64_t stream,
                          std::vector<std::uint8_t>& mask);

template <typename T>
Tensor<T> dropout_backward(const Tensor<T>& dy, double p, const std::vector<std::uint8_t>& mask);

}  // namespace drd::nn
