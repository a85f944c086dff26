#pragma once

// Central-difference gradient verification at 64-bit precision.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "drd/nn/graph.hpp"

namespace drd::nn {

struct GradCheckOptions {
  /// Large enough that loss round-off stays below the tolerance for the
  /// ~1e-7 gradient entries of the deep end-to-end graph.
  double epsilon = 1e-4;
  double tolerance = 1e-4;
  /// Parameters with more entries than this are subsampled; the total
  /// number of checked entries is at least min(total, min_checked).
  std::size_t max_per_param = 64;
  std::size_t min_checked = 200;
  /// Denominator floor for the relative error.
  double abs_floor = 1e-8;
  std::uint64_t seed = 7;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_entry;
  std::size_t checked = 0;
  std::size_t kinks_excluded = 0;
  double tolerance = 1e-4;

  [[nodiscard]] bool passed() const { return checked > 0 && max_rel_error <= tolerance; }
};

/// What the checker needs from a differentiable system.
struct GradCheckTarget {
  std::vector<Param<double>*> params;
  /// Forward only; returns the scalar loss.
  std::function<double()> loss;
  /// Forward + backward; fills params[i]->grad (zeroed by the callee).
  std::function<double()> loss_and_grad;
  /// Branch signature of the most recent forward (see NetGraph::kink_signature).
  std::function<std::uint64_t()> kink_signature;
};

/// Compares analytic gradients with (L(w+e) - L(w-e)) / 2e. Entries where
/// the branch signature changes across +-e straddle a ReLU or pooling kink
/// and are excluded. Throws NumericalError on a non-finite loss.
GradCheckReport gradient_check(const GradCheckTarget& target, const GradCheckOptions& options = {});

/// Loss over a single graph's outputs: returns the loss and fills the
/// gradients of the outputs it reads.
using GraphLoss = std::function<double(const NetGraph<double>&, NetGraph<double>::TensorMap* output_grads)>;

GradCheckReport gradient_check(NetGraph<double>& graph, const NetGraph<double>::TensorMap& inputs,
                               const GraphLoss& loss, const GradCheckOptions& options = {},
                               Mode mode = Mode::kEval, std::uint64_t dropout_seed = 0);

}  // namespace drd::nn
