#include "drd/nn/gradcheck.hpp"

#include <cmath>
#include <numeric>
#include <random>

namespace drd::nn {

namespace {

double checked_loss(double v) {
  if (!std::isfinite(v)) throw NumericalError("gradient_check: non-finite loss");
  return v;
}

}  // namespace

GradCheckReport gradient_check(const GradCheckTarget& target, const GradCheckOptions& options) {
  GradCheckReport report;
  report.tolerance = options.tolerance;
  checked_loss(target.loss_and_grad());
  const std::uint64_t base_signature = target.kink_signature();

  std::vector<std::vector<double>> analytic;
  for (auto* p : target.params) analytic.emplace_back(p->grad.values().begin(), p->grad.values().end());
  const std::size_t per_param =
      std::max(options.max_per_param,
               target.params.empty() ? std::size_t{0} : (options.min_checked + target.params.size() - 1) / target.params.size());

  std::mt19937_64 rng(options.seed);
  for (std::size_t pi = 0; pi < target.params.size(); ++pi) {
    auto& p = *target.params[pi];
    std::vector<std::size_t> idx(p.value.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (idx.size() > per_param) {
      for (std::size_t i = 0; i < per_param; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng() % (idx.size() - i));
        std::swap(idx[i], idx[j]);
      }
      idx.resize(per_param);
    }
    for (std::size_t k : idx) {
      const double w0 = p.value[k];
      p.value[k] = w0 + options.epsilon;
      const double lp = checked_loss(target.loss());
      const std::uint64_t sp = target.kink_signature();
      p.value[k] = w0 - options.epsilon;
      const double lm = checked_loss(target.loss());
      const std::uint64_t sm = target.kink_signature();
      p.value[k] = w0;
      if (sp != base_signature || sm != base_signature) {
        ++report.kinks_excluded;
        continue;
      }
      const double numeric = (lp - lm) / (2.0 * options.epsilon);
      const double a = analytic[pi][k];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.abs_floor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.checked;
      if (rel > report.max_rel_error || report.worst_entry.empty()) {
        report.max_rel_error = rel;
        report.worst_entry = p.name + "[" + std::to_string(k) + "]";
      }
    }
  }
  return report;
}

GradCheckReport gradient_check(NetGraph<double>& graph, const NetGraph<double>::TensorMap& inputs,
                               const GraphLoss& loss, const GradCheckOptions& options, Mode mode,
                               std::uint64_t dropout_seed) {
  GradCheckTarget target;
  for (auto& p : graph.params()) target.params.push_back(&p);
  target.loss = [&] {
    graph.forward(inputs, mode, dropout_seed);
    return loss(graph, nullptr);
  };
  target.loss_and_grad = [&] {
    graph.forward(inputs, mode, dropout_seed);
    NetGraph<double>::TensorMap grads;
    const double l = loss(graph, &grads);
    graph.zero_grad();
    graph.backward(grads);
    return l;
  };
  target.kink_signature = [&] { return graph.kink_signature(); };
  return gradient_check(target, options);
}

}  // namespace drd::nn
