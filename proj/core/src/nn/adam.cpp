#include "drd/nn/adam.hpp"

#include <cmath>

namespace drd::nn {

template <typename T>
void adam_step(std::vector<Param<T>>& params, AdamState& state, double lr) {
  const auto& cfg = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& p : params) {
    if (p.grad.shape() != p.value.shape()) throw InvalidArgument("adam: gradient shape mismatch for " + p.name);
    auto& m = state.m[p.name];
    auto& v = state.v[p.name];
    if (m.empty()) m = TensorF(p.value.shape());
    if (v.empty()) v = TensorF(p.value.shape());
    if (m.shape() != p.value.shape() || v.shape() != p.value.shape()) {
      throw InvalidArgument("adam: moment shape mismatch for " + p.name);
    }
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double w = static_cast<double>(p.value[i]);
      const double g = static_cast<double>(p.grad[i]) + cfg.weight_decay * w;
      const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double update = lr * (mi / bc1) / (std::sqrt(vi / bc2) + cfg.eps);
      p.value[i] = static_cast<T>(w - update);
    }
  }
}

template void adam_step(std::vector<Param<float>>&, AdamState&, double);
template void adam_step(std::vector<Param<double>>&, AdamState&, double);

}  // namespace drd::nn
