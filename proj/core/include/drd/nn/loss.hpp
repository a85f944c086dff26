#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "drd/nn/tensor.hpp"

namespace drd::nn {

template <typename T>
struct LossResult {
  double loss = 0.0;
  Tensor<T> grad;  // d loss / d logits, same shape as the logits
};

/// Mean over rows of -log softmax(logits)[target]; logits (N, C, 1, 1) or
/// (N, C). Log-sum-exp is shifted by the row max.
template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> targets);

/// w_c = T / (C * T_c), zero when class c is absent from the batch.
std::vector<double> class_balance_weights(std::span<const int> targets, int n_classes);

/// Per-cell cross-entropy over (N, C, H, W) logits with targets indexed
/// [n][h][w], weighted by class_balance_weights and normalized by the
/// summed weight.
template <typename T>
LossResult<T> class_balanced_cross_entropy(const Tensor<T>& logits, std::span<const int> targets);

/// Row-wise softmax probabilities of (N, C, H, W) logits along C.
template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& logits);

}  // namespace drd::nn
