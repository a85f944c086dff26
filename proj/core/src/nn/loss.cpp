#include "drd/nn/loss.hpp"

#include <cmath>
#include <limits>

namespace drd::nn {

namespace {

struct Layout {
  int n, c;
  std::size_t plane;
};

template <typename T>
Layout layout_of(const Tensor<T>& logits) {
  if (logits.rank() < 2) throw InvalidArgument("loss: logits need a class axis");
  Layout l{logits.dim(0), logits.dim(1), 1};
  for (int i = 2; i < logits.rank(); ++i) l.plane *= static_cast<std::size_t>(logits.dim(i));
  return l;
}

// Returns -log softmax(z)[target] and writes softmax into probs.
template <typename T>
double cell_cross_entropy(const T* z, std::size_t stride, int c, int target, std::vector<double>& probs) {
  double zmax = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < c; ++k) zmax = std::max(zmax, static_cast<double>(z[k * stride]));
  double sum = 0.0;
  probs.resize(static_cast<std::size_t>(c));
  for (int k = 0; k < c; ++k) {
    probs[static_cast<std::size_t>(k)] = std::exp(static_cast<double>(z[k * stride]) - zmax);
    sum += probs[static_cast<std::size_t>(k)];
  }
  for (auto& p : probs) p /= sum;
  return -(static_cast<double>(z[static_cast<std::size_t>(target) * stride]) - zmax - std::log(sum));
}

void check_target(int t, int c) {
  if (t < 0 || t >= c) throw InvalidArgument("loss: target " + std::to_string(t) + " outside [0, " + std::to_string(c) + ")");
}

}  // namespace

template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> targets) {
  const auto l = layout_of(logits);
  if (l.plane != 1) throw InvalidArgument("softmax_cross_entropy: expected (N, C) logits");
  if (targets.size() != static_cast<std::size_t>(l.n)) throw InvalidArgument("softmax_cross_entropy: target count");
  LossResult<T> out{0.0, Tensor<T>(logits.shape())};
  if (l.n == 0) return out;
  std::vector<double> probs;
  const double inv_n = 1.0 / l.n;
  for (int i = 0; i < l.n; ++i) {
    check_target(targets[static_cast<std::size_t>(i)], l.c);
    const std::size_t base = static_cast<std::size_t>(i) * l.c;
    out.loss += cell_cross_entropy(logits.data() + base, 1, l.c, targets[static_cast<std::size_t>(i)], probs) * inv_n;
    for (int k = 0; k < l.c; ++k) {
      const double onehot = k == targets[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
      out.grad[base + static_cast<std::size_t>(k)] = static_cast<T>((probs[static_cast<std::size_t>(k)] - onehot) * inv_n);
    }
  }
  return out;
}

std::vector<double> class_balance_weights(std::span<const int> targets, int n_classes) {
  std::vector<double> counts(static_cast<std::size_t>(n_classes), 0.0);
  for (int t : targets) {
    check_target(t, n_classes);
    counts[static_cast<std::size_t>(t)] += 1.0;
  }
  const double total = static_cast<double>(targets.size());
  std::vector<double> w(static_cast<std::size_t>(n_classes), 0.0);
  for (std::size_t c = 0; c < w.size(); ++c) {
    if (counts[c] > 0) w[c] = total / (n_classes * counts[c]);
  }
  return w;
}

template <typename T>
LossResult<T> class_balanced_cross_entropy(const Tensor<T>& logits, std::span<const int> targets) {
  const auto l = layout_of(logits);
  if (targets.size() != static_cast<std::size_t>(l.n) * l.plane) {
    throw InvalidArgument("class_balanced_cross_entropy: target count does not match cells");
  }
  LossResult<T> out{0.0, Tensor<T>(logits.shape())};
  const auto w = class_balance_weights(targets, l.c);
  double weight_sum = 0.0;
  for (int t : targets) weight_sum += w[static_cast<std::size_t>(t)];
  if (weight_sum <= 0.0) return out;
  std::vector<double> probs;
  for (int i = 0; i < l.n; ++i) {
    const std::size_t base = static_cast<std::size_t>(i) * l.c * l.plane;
    for (std::size_t p = 0; p < l.plane; ++p) {
      const int t = targets[static_cast<std::size_t>(i) * l.plane + p];
      const double wt = w[static_cast<std::size_t>(t)] / weight_sum;
      out.loss += wt * cell_cross_entropy(logits.data() + base + p, l.plane, l.c, t, probs);
      for (int k = 0; k < l.c; ++k) {
        const double onehot = k == t ? 1.0 : 0.0;
        out.grad[base + static_cast<std::size_t>(k) * l.plane + p] =
            static_cast<T>(wt * (probs[static_cast<std::size_t>(k)] - onehot));
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& logits) {
  const auto l = layout_of(logits);
  Tensor<T> out(logits.shape());
  std::vector<double> probs;
  for (int i = 0; i < l.n; ++i) {
    const std::size_t base = static_cast<std::size_t>(i) * l.c * l.plane;
    for (std::size_t p = 0; p < l.plane; ++p) {
      cell_cross_entropy(logits.data() + base + p, l.plane, l.c, 0, probs);
      for (int k = 0; k < l.c; ++k) {
        out[base + static_cast<std::size_t>(k) * l.plane + p] = static_cast<T>(probs[static_cast<std::size_t>(k)]);
      }
    }
  }
  return out;
}

template LossResult<float> softmax_cross_entropy(const Tensor<float>&, std::span<const int>);
template LossResult<double> softmax_cross_entropy(const Tensor<double>&, std::span<const int>);
template LossResult<float> class_balanced_cross_entropy(const Tensor<float>&, std::span<const int>);
template LossResult<double> class_balanced_cross_entropy(const Tensor<double>&, std::span<const int>);
template Tensor<float> softmax_channels(const Tensor<float>&);
template Tensor<double> softmax_channels(const Tensor<double>&);

}  // namespace drd::nn
