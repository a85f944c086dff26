#include "drd/nn/graph.hpp"

#include <cmath>
#include <random>

namespace drd::nn {

const char* to_string(OpKind kind) {
  switch (kind) {
    case OpKind::kInput: return "input";
    case OpKind::kConv2d: return "conv2d";
    case OpKind::kRelu: return "relu";
    case OpKind::kMaxPool2: return "maxpool2";
    case OpKind::kUpsample2: return "upsample2";
    case OpKind::kConcat: return "concat";
    case OpKind::kGlobalMaxPool: return "global_maxpool";
    case OpKind::kLinear: return "linear";
    case OpKind::kDropout: return "dropout";
  }
  return "?";
}

namespace {

template <typename T>
void accumulate(Tensor<T>& dst, Tensor<T> src) {
  if (dst.empty()) {
    dst = std::move(src);
    return;
  }
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

std::uint64_t fnv(std::uint64_t h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xFF;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace

template <typename T>
const LayerSpec& NetGraph<T>::checked(int id) const {
  if (id < 0 || id >= static_cast<int>(layers_.size())) throw InvalidArgument("graph: unknown node id");
  return layers_[static_cast<std::size_t>(id)];
}

template <typename T>
int NetGraph<T>::add(LayerSpec spec) {
  if (spec.name.empty()) throw InvalidArgument("graph: node name required");
  if (by_name_.count(spec.name)) throw InvalidArgument("graph: duplicate node name '" + spec.name + "'");
  const int id = static_cast<int>(layers_.size());
  by_name_[spec.name] = id;
  layers_.push_back(std::move(spec));
  return id;
}

template <typename T>
int NetGraph<T>::add_param(const std::string& name, std::vector<int> shape) {
  for (const auto& p : params_) {
    if (p.name == name) throw InvalidArgument("graph: duplicate weight name '" + name + "'");
  }
  params_.push_back({name, Tensor<T>(shape), Tensor<T>(shape)});
  return static_cast<int>(params_.size()) - 1;
}

template <typename T>
int NetGraph<T>::input(const std::string& name, int c, int h, int w) {
  if (c < 1 || h < 1 || w < 1) throw InvalidArgument("graph: input dims must be positive");
  LayerSpec s;
  s.name = name;
  s.kind = OpKind::kInput;
  s.shape = {c, h, w};
  return add(std::move(s));
}

template <typename T>
int NetGraph<T>::conv2d(const std::string& name, int in, int out_channels, int kernel, int stride, int pad) {
  const auto& src = checked(in);
  if (out_channels < 1) throw InvalidArgument("graph: conv needs >= 1 output channel");
  LayerSpec s;
  s.name = name;
  s.kind = OpKind::kConv2d;
  s.inputs = {in};
  s.out_features = out_channels;
  s.kernel = kernel;
  s.stride = stride;
  s.pad = pad;
  s.shape = {out_channels, conv_out_size(src.shape.h, kernel, stride, pad), conv_out_size(src.shape.w, kernel, stride, pad)};
  const int cin = src.shape.c;
  const int id = add(std::move(s));
  layers_[static_cast<std::size_t>(id)].weight = add_param(name + ".weight", {out_channels, cin, kernel, kernel});
  layers_[static_cast<std::size_t>(id)].bias = add_param(name + ".bias", {out_channels});
  return id;
}

template <typename T>
int NetGraph<T>::relu(const std::string& name, int in) {
  LayerSpec s;
  s.name = name;
  s.kind = OpKind::kRelu;
  s.inputs = {in};
  s.shape = checked(in).shape;
  return add(std::move(s));
}

template <typename T>
int NetGraph<T>::maxpool2(const std::string& name, int in) {
  const auto& src = checked(in);
  LayerSpec s;
  s.name = name;
  s.kind = OpKind::kMaxPool2;
  s.inputs = {in};
  s.shape = {src.shape.c, (src.shape.h + 1) / 2, (src.shape.w + 1) / 2};
  return add(std::move(s));
}

template <typename T>
int NetGraph<T>::upsample2(const std::string& name, int in) {
  const auto& src = checked(in);
  LayerSpec s;
  s.name = name;
  s.kind = OpKind::kUpsample2;
  s.inputs = {in};
  s.shape = {src.shape.c, 2 * src.shape.h, 2 * src.shape.w};
  return add(std::move(s));
}

template <typename T>
int NetGraph<T>::concat(const std::string& name, const std::vector<int>& ins) {
  if (ins.empty()) throw InvalidArgument("graph: concat needs inputs");
  const auto& first = checked(ins.front()).shape;
  int c = 0;
  for (int id : ins) {
    const auto& sh = checked(id).shape;
    if (sh.h != first.h || sh.w != first.w) {
      throw InvalidArgument("graph: concat '" + name + "' spatial mismatch");
    }
    c += sh.c;
  }
  LayerSpec s;
  s.name = name;
  s.kind = OpKind::kConcat;
  s.inputs = ins;
  s.shape = {c, first.h, first.w};
  return add(std::move(s));
}

template <typename T>
int NetGraph<T>::global_maxpool(const std::string& name, int in) {
  LayerSpec s;
  s.name = name;
  s.kind = OpKind::kGlobalMaxPool;
  s.inputs = {in};
  s.shape = {checked(in).shape.c, 1, 1};
  return add(std::move(s));
}

template <typename T>
int NetGraph<T>::linear(const std::string& name, int in, int out_features) {
  const auto& src = checked(in).shape;
  if (out_features < 1) throw InvalidArgument("graph: linear needs >= 1 output");
  const int fan_in = src.c * src.h * src.w;
  LayerSpec s;
  s.name = name;
  s.kind = OpKind::kLinear;
  s.inputs = {in};
  s.out_features = out_features;
  s.shape = {out_features, 1, 1};
  const int id = add(std::move(s));
  layers_[static_cast<std::size_t>(id)].weight = add_param(name + ".weight", {out_features, fan_in});
  layers_[static_cast<std::size_t>(id)].bias = add_param(name + ".bias", {out_features});
  return id;
}

template <typename T>
int NetGraph<T>::dropout(const std::string& name, int in, double p) {
  if (!(p >= 0.0 && p < 1.0)) throw InvalidArgument("graph: dropout p must be in [0, 1)");
  LayerSpec s;
  s.name = name;
  s.kind = OpKind::kDropout;
  s.inputs = {in};
  s.p = p;
  s.shape = checked(in).shape;
  return add(std::move(s));
}

template <typename T>
void NetGraph<T>::init_weights(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& p : params_) {
    p.grad.fill(T{0});
    if (p.value.rank() == 1) {
      p.value.fill(T{0});
      continue;
    }
    std::size_t fan_in = 1;
    for (int i = 1; i < p.value.rank(); ++i) fan_in *= static_cast<std::size_t>(p.value.dim(i));
    const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& v : p.value.values()) v = static_cast<T>(std_dev * normal(rng));
  }
}

template <typename T>
int NetGraph<T>::node(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw InvalidArgument("graph: no node named '" + name + "'");
  return it->second;
}

template <typename T>
Param<T>& NetGraph<T>::param(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return p;
  }
  throw InvalidArgument("graph: no weight named '" + name + "'");
}

template <typename T>
std::size_t NetGraph<T>::weight_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <typename T>
void NetGraph<T>::forward(const TensorMap& inputs, Mode mode, std::uint64_t dropout_seed) {
  last_mode_ = mode;
  run(inputs, mode, dropout_seed, acts_, argmax_, masks_);
}

template <typename T>
typename NetGraph<T>::TensorMap NetGraph<T>::evaluate(const TensorMap& inputs,
                                                      const std::vector<std::string>& outputs) const {
  std::vector<Tensor<T>> acts;
  std::vector<std::vector<std::int64_t>> argmax;
  std::vector<std::vector<std::uint8_t>> masks;
  run(inputs, Mode::kEval, 0, acts, argmax, masks);
  TensorMap out;
  for (const auto& name : outputs) out[name] = std::move(acts[static_cast<std::size_t>(node(name))]);
  return out;
}

template <typename T>
void NetGraph<T>::run(const TensorMap& inputs, Mode mode, std::uint64_t dropout_seed, std::vector<Tensor<T>>& acts,
                      std::vector<std::vector<std::int64_t>>& argmax,
                      std::vector<std::vector<std::uint8_t>>& masks) const {
  acts.assign(layers_.size(), Tensor<T>());
  argmax.assign(layers_.size(), {});
  masks.assign(layers_.size(), {});
  int batch = -1;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& L = layers_[i];
    auto in = [&](std::size_t k) -> const Tensor<T>& { return acts[static_cast<std::size_t>(L.inputs[k])]; };
    switch (L.kind) {
      case OpKind::kInput: {
        auto it = inputs.find(L.name);
        if (it == inputs.end()) throw InvalidArgument("graph: missing input '" + L.name + "'");
        const auto& t = it->second;
        const int n = t.rank() >= 1 ? t.dim(0) : 0;
        if (t.size() != static_cast<std::size_t>(n) * L.shape.c * L.shape.h * L.shape.w) {
          throw InvalidArgument("graph: input '" + L.name + "' has shape " + shape_string(t.shape()) +
                                ", expected (N," + std::to_string(L.shape.c) + "," + std::to_string(L.shape.h) + "," +
                                std::to_string(L.shape.w) + ")");
        }
        if (batch >= 0 && n != batch) throw InvalidArgument("graph: inputs disagree on batch size");
        batch = n;
        acts[i] = t.reshaped({n, L.shape.c, L.shape.h, L.shape.w});
        break;
      }
      case OpKind::kConv2d:
        acts[i] = conv2d_forward(in(0), params_[static_cast<std::size_t>(L.weight)].value,
                                  params_[static_cast<std::size_t>(L.bias)].value, {L.stride, L.pad});
        break;
      case OpKind::kRelu: acts[i] = relu_forward(in(0)); break;
      case OpKind::kMaxPool2: acts[i] = maxpool2x2_forward(in(0), argmax[i]); break;
      case OpKind::kUpsample2: acts[i] = upsample2x_forward(in(0)); break;
      case OpKind::kConcat: {
        std::vector<const Tensor<T>*> parts;
        for (int id : L.inputs) parts.push_back(&acts[static_cast<std::size_t>(id)]);
        acts[i] = concat_channels(parts);
        break;
      }
      case OpKind::kGlobalMaxPool: acts[i] = global_maxpool_forward(in(0), argmax[i]); break;
      case OpKind::kLinear:
        acts[i] = linear_forward(in(0), params_[static_cast<std::size_t>(L.weight)].value,
                                  params_[static_cast<std::size_t>(L.bias)].value);
        break;
      case OpKind::kDropout:
        if (mode == Mode::kTrain && L.p > 0.0) {
          acts[i] = dropout_forward(in(0), L.p, dropout_seed, i, masks[i]);
        } else {
          acts[i] = in(0);
        }
        break;
    }
  }
}

template <typename T>
const Tensor<T>& NetGraph<T>::output(const std::string& name) const {
  const auto id = static_cast<std::size_t>(node(name));
  if (id >= acts_.size()) throw InvalidArgument("graph: forward has not run");
  return acts_[id];
}

template <typename T>
void NetGraph<T>::zero_grad() {
  for (auto& p : params_) p.grad.fill(T{0});
}

template <typename T>
typename NetGraph<T>::TensorMap NetGraph<T>::backward(const TensorMap& output_grads) {
  if (acts_.size() != layers_.size()) throw InvalidArgument("graph: backward before forward");
  std::vector<Tensor<T>> g(layers_.size());
  for (const auto& [name, grad] : output_grads) {
    const auto id = static_cast<std::size_t>(node(name));
    if (grad.size() != acts_[id].size()) {
      throw InvalidArgument("graph: gradient for '" + name + "' has wrong size " + shape_string(grad.shape()));
    }
    accumulate(g[id], grad.reshaped(acts_[id].shape()));
  }
  TensorMap input_grads;
  for (std::size_t idx = layers_.size(); idx-- > 0;) {
    if (g[idx].empty()) continue;
    const auto& L = layers_[idx];
    auto src = [&](std::size_t k) { return static_cast<std::size_t>(L.inputs[k]); };
    switch (L.kind) {
      case OpKind::kInput: input_grads[L.name] = std::move(g[idx]); break;
      case OpKind::kConv2d: {
        auto& w = params_[static_cast<std::size_t>(L.weight)];
        auto& b = params_[static_cast<std::size_t>(L.bias)];
        Tensor<T> dx;
        conv2d_backward(acts_[src(0)], w.value, g[idx], {L.stride, L.pad}, &dx, w.grad, b.grad);
        accumulate(g[src(0)], std::move(dx));
        break;
      }
      case OpKind::kRelu: accumulate(g[src(0)], relu_backward(acts_[idx], g[idx])); break;
      case OpKind::kMaxPool2:
        accumulate(g[src(0)], maxpool2x2_backward(g[idx], argmax_[idx], acts_[src(0)].shape()));
        break;
      case OpKind::kUpsample2: accumulate(g[src(0)], upsample2x_backward(g[idx])); break;
      case OpKind::kConcat: {
        std::vector<int> counts;
        for (int id : L.inputs) counts.push_back(layers_[static_cast<std::size_t>(id)].shape.c);
        auto parts = split_channels(g[idx], counts);
        for (std::size_t k = 0; k < parts.size(); ++k) accumulate(g[src(k)], std::move(parts[k]));
        break;
      }
      case OpKind::kGlobalMaxPool:
        accumulate(g[src(0)], global_maxpool_backward(g[idx], argmax_[idx], acts_[src(0)].shape()));
        break;
      case OpKind::kLinear: {
        auto& w = params_[static_cast<std::size_t>(L.weight)];
        auto& b = params_[static_cast<std::size_t>(L.bias)];
        Tensor<T> dx;
        linear_backward(acts_[src(0)], w.value, g[idx], &dx, w.grad, b.grad);
        accumulate(g[src(0)], std::move(dx));
        break;
      }
      case OpKind::kDropout:
        if (last_mode_ == Mode::kTrain && L.p > 0.0) {
          accumulate(g[src(0)], dropout_backward(g[idx], L.p, masks_[idx]));
        } else {
          accumulate(g[src(0)], std::move(g[idx]));
        }
        break;
    }
    g[idx] = Tensor<T>();
  }
  return input_grads;
}

template <typename T>
std::uint64_t NetGraph<T>::kink_signature() const {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (std::size_t i = 0; i < acts_.size(); ++i) {
    const auto kind = layers_[i].kind;
    if (kind == OpKind::kRelu) {
      const auto& pre = acts_[static_cast<std::size_t>(layers_[i].inputs[0])];
      std::uint64_t word = 0;
      for (std::size_t k = 0; k < pre.size(); ++k) {
        word = (word << 1) | (pre[k] > T{0} ? 1u : 0u);
        if (k % 64 == 63) h = fnv(h, word);
      }
      h = fnv(h, word);
    } else if (kind == OpKind::kMaxPool2 || kind == OpKind::kGlobalMaxPool) {
      for (auto a : argmax_[i]) h = fnv(h, static_cast<std::uint64_t>(a));
    }
  }
  return h;
}

template class NetGraph<float>;
template class NetGraph<double>;

}  // namespace drd::nn
