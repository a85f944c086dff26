#pragma once

// Shape-checked DAG over the closed layer set, with named inputs, outputs
// and skip connections. Forward caches activations; backward walks the
// nodes in reverse and accumulates parameter gradients.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "drd/nn/kernels.hpp"
#include "drd/nn/tensor.hpp"

namespace drd::nn {

enum class OpKind {
  kInput,
  kConv2d,
  kRelu,
  kMaxPool2,
  kUpsample2,
  kConcat,
  kGlobalMaxPool,
  kLinear,
  kDropout,
};

const char* to_string(OpKind kind);

/// Per-sample output shape (C, H, W).
struct NodeShape {
  int c = 0, h = 0, w = 0;
  friend bool operator==(const NodeShape&, const NodeShape&) = default;
};

struct LayerSpec {
  std::string name;
  OpKind kind = OpKind::kInput;
  std::vector<int> inputs;
  int out_features = 0;  // conv out channels / linear width
  int kernel = 0;
  int stride = 1;
  int pad = 0;
  double p = 0.0;  // dropout
  NodeShape shape;
  int weight = -1;  // param index, -1 when none
  int bias = -1;
};

enum class Mode { kEval, kTrain };

template <typename T>
class NetGraph {
 public:
  using TensorMap = std::map<std::string, Tensor<T>>;

  // Builder. Each call validates shapes and returns the new node id.
  int input(const std::string& name, int c, int h, int w);
  int conv2d(const std::string& name, int in, int out_channels, int kernel, int stride, int pad);
  int relu(const std::string& name, int in);
  int maxpool2(const std::string& name, int in);
  int upsample2(const std::string& name, int in);
  int concat(const std::string& name, const std::vector<int>& ins);
  int global_maxpool(const std::string& name, int in);
  int linear(const std::string& name, int in, int out_features);
  int dropout(const std::string& name, int in, double p);

  /// He-normal weights (std sqrt(2 / fan_in)), zero biases.
  void init_weights(std::uint64_t seed);

  [[nodiscard]] const std::vector<LayerSpec>& layers() const { return layers_; }
  [[nodiscard]] int node(const std::string& name) const;
  [[nodiscard]] const NodeShape& shape(const std::string& name) const { return layers_[node(name)].shape; }
  [[nodiscard]] std::vector<Param<T>>& params() { return params_; }
  [[nodiscard]] const std::vector<Param<T>>& params() const { return params_; }
  [[nodiscard]] Param<T>& param(const std::string& name);
  [[nodiscard]] std::size_t weight_count() const;

  /// Runs every node. All input nodes must be supplied with matching
  /// per-sample shapes and a common batch size.
  void forward(const TensorMap& inputs, Mode mode = Mode::kEval, std::uint64_t dropout_seed = 0);
  [[nodiscard]] const Tensor<T>& output(const std::string& name) const;

  /// Stateless eval-mode pass returning only the requested outputs; safe to
  /// call concurrently on a shared graph.
  [[nodiscard]] TensorMap evaluate(const TensorMap& inputs, const std::vector<std::string>& outputs) const;

  void zero_grad();
  /// Seeds the named nodes with the given gradients and backpropagates.
  /// Parameter gradients accumulate; returns gradients of input nodes.
  TensorMap backward(const TensorMap& output_grads);

  /// Hash of every data-dependent branch taken in the last forward: ReLU
  /// activity pattern and pooling winners. A change between two nearby
  /// parameter points means a kink lies between them.
  [[nodiscard]] std::uint64_t kink_signature() const;

  template <typename U>
  [[nodiscard]] NetGraph<U> cast() const {
    NetGraph<U> out;
    out.layers_ = layers_;
    out.by_name_ = by_name_;
    for (const auto& p : params_) out.params_.push_back({p.name, p.value.template cast<U>(), p.grad.template cast<U>()});
    return out;
  }

 private:
  template <typename U>
  friend class NetGraph;

  int add(LayerSpec spec);
  int add_param(const std::string& name, std::vector<int> shape);
  const LayerSpec& checked(int id) const;
  void run(const TensorMap& inputs, Mode mode, std::uint64_t dropout_seed, std::vector<Tensor<T>>& acts,
           std::vector<std::vector<std::int64_t>>& argmax, std::vector<std::vector<std::uint8_t>>& masks) const;

  std::vector<LayerSpec> layers_;
  std::map<std::string, int> by_name_;
  std::vector<Param<T>> params_;

  // Forward caches.
  std::vector<Tensor<T>> acts_;
  std::vector<std::vector<std::int64_t>> argmax_;
  std::vector<std::vector<std::uint8_t>> masks_;
  Mode last_mode_ = Mode::kEval;
};

extern template class NetGraph<float>;
extern template class NetGraph<double>;

}  // namespace drd::nn
