#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "drd/nn/tensor.hpp"

namespace drd::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 5e-4;
};

/// Moment buffers keyed by parameter name.
struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::map<std::string, TensorF> m;
  std::map<std::string, TensorF> v;

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// One Adam update with bias correction. Weight decay is an L2 term added
/// to the gradient before the moment updates. lr overrides config.lr so
/// schedules can drive it.
template <typename T>
void adam_step(std::vector<Param<T>>& params, AdamState& state, double lr);

}  // namespace drd::nn
