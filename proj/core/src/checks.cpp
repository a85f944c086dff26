#include "drd/checks.hpp"

#include <cstdio>
#include <random>

#include "drd/drd_net.hpp"
#include "drd/io.hpp"
#include "drd/nn/loss.hpp"

namespace drd::checks {

namespace {

using G = nn::NetGraph<double>;

nn::TensorD random_tensor(std::vector<int> shape, std::mt19937_64& rng) {
  nn::TensorD t(std::move(shape));
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto& v : t.values()) v = n(rng);
  return t;
}

// L = sum(r * y) over the named output, r fixed per case.
nn::GraphLoss projection_loss(const std::string& out, const nn::TensorD& r) {
  return [out, r](const G& g, G::TensorMap* grads) {
    const auto& y = g.output(out);
    double l = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) l += r[i] * y[i];
    if (grads) (*grads)[out] = r;
    return l;
  };
}

struct Case {
  Case(std::string n, std::string o, nn::Mode m = nn::Mode::kEval) : name(std::move(n)), out(std::move(o)), mode(m) {}
  std::string name;
  G graph;
  std::string out;
  nn::Mode mode;
  nn::GraphLoss loss;  // empty: projection loss on `out`
};

NamedReport run_case(Case& c, std::uint64_t seed, const nn::GradCheckOptions& options) {
  std::mt19937_64 rng(seed);
  c.graph.init_weights(seed);
  // Nonzero biases so the bias paths are exercised away from zero.
  for (auto& p : c.graph.params()) {
    std::normal_distribution<double> n(0.0, 0.1);
    if (p.name.ends_with(".bias")) {
      for (auto& v : p.value.values()) v = n(rng);
    }
  }
  G::TensorMap inputs;
  for (const auto& l : c.graph.layers()) {
    if (l.kind == nn::OpKind::kInput) inputs[l.name] = random_tensor({2, l.shape.c, l.shape.h, l.shape.w}, rng);
  }
  auto loss = c.loss;
  if (!loss) {
    const auto& s = c.graph.shape(c.out);
    loss = projection_loss(c.out, random_tensor({2, s.c, s.h, s.w}, rng));
  }
  return {c.name, nn::gradient_check(c.graph, inputs, loss, options, c.mode, seed ^ 0xD1)};
}

}  // namespace

std::vector<NamedReport> layer_gradchecks(std::uint64_t seed, const nn::GradCheckOptions& options) {
  std::vector<Case> cases;
  {
    Case c{"conv2d_3x3_pad1", "y"};
    const int x = c.graph.input("x", 3, 5, 5);
    c.graph.conv2d("y", x, 4, 3, 1, 1);
    cases.push_back(std::move(c));
  }
  {
    Case c{"conv2d_3x3_stride2", "y"};
    const int x = c.graph.input("x", 3, 7, 7);
    c.graph.conv2d("y", x, 4, 3, 2, 0);
    cases.push_back(std::move(c));
  }
  {
    Case c{"conv2d_1x1", "y"};
    const int x = c.graph.input("x", 5, 4, 4);
    c.graph.conv2d("y", x, 2, 1, 1, 0);
    cases.push_back(std::move(c));
  }
  {
    Case c{"relu", "y"};
    const int x = c.graph.input("x", 2, 4, 4);
    c.graph.relu("y", c.graph.conv2d("conv", x, 3, 3, 1, 1));
    cases.push_back(std::move(c));
  }
  {
    Case c{"maxpool2", "y"};
    const int x = c.graph.input("x", 2, 5, 5);
    c.graph.maxpool2("y", c.graph.conv2d("conv", x, 3, 3, 1, 1));
    cases.push_back(std::move(c));
  }
  {
    Case c{"upsample2", "y"};
    const int x = c.graph.input("x", 2, 3, 3);
    c.graph.conv2d("y", c.graph.upsample2("up", c.graph.conv2d("conv", x, 3, 3, 1, 1)), 2, 3, 1, 1);
    cases.push_back(std::move(c));
  }
  {
    Case c{"concat", "y"};
    const int x = c.graph.input("x", 2, 4, 4);
    const int a = c.graph.conv2d("a", x, 3, 3, 1, 1);
    const int b = c.graph.conv2d("b", x, 2, 1, 1, 0);
    c.graph.conv2d("y", c.graph.concat("cat", {a, b, x}), 2, 3, 1, 1);
    cases.push_back(std::move(c));
  }
  {
    Case c{"global_maxpool", "y"};
    const int x = c.graph.input("x", 2, 4, 4);
    c.graph.global_maxpool("y", c.graph.conv2d("conv", x, 3, 3, 1, 1));
    cases.push_back(std::move(c));
  }
  {
    Case c{"linear", "y"};
    const int x = c.graph.input("x", 6, 1, 1);
    c.graph.linear("y", c.graph.linear("fc", x, 5), 3);
    cases.push_back(std::move(c));
  }
  {
    Case c{"dropout", "y", nn::Mode::kTrain};
    const int x = c.graph.input("x", 8, 1, 1);
    c.graph.linear("y", c.graph.dropout("drop", c.graph.linear("fc", x, 12), 0.3), 3);
    cases.push_back(std::move(c));
  }
  {
    Case c{"softmax_cross_entropy", "y"};
    const int x = c.graph.input("x", 6, 1, 1);
    c.graph.linear("y", x, 4);
    const std::vector<int> targets{1, 3};
    c.loss = [targets](const G& g, G::TensorMap* grads) {
      auto r = nn::softmax_cross_entropy(g.output("y"), targets);
      if (grads) (*grads)["y"] = std::move(r.grad);
      return r.loss;
    };
    cases.push_back(std::move(c));
  }
  {
    Case c{"class_balanced_cross_entropy", "y"};
    const int x = c.graph.input("x", 3, 4, 4);
    c.graph.conv2d("y", x, 2, 3, 1, 1);
    std::vector<int> targets(2 * 4 * 4, 0);
    targets[5] = targets[18] = targets[27] = 1;
    c.loss = [targets](const G& g, G::TensorMap* grads) {
      auto r = nn::class_balanced_cross_entropy(g.output("y"), targets);
      if (grads) (*grads)["y"] = std::move(r.grad);
      return r.loss;
    };
    cases.push_back(std::move(c));
  }

  std::vector<NamedReport> out;
  for (std::size_t i = 0; i < cases.size(); ++i) out.push_back(run_case(cases[i], seed + i, options));
  return out;
}

NamedReport drd_gradcheck(std::uint64_t seed, const nn::GradCheckOptions& options) {
  model::RDNetConfig rd;
  rd.n_antennas = 8;
  rd.n_range = 16;
  rd.n_doppler = 16;
  rd.widths = {4, 4, 4};
  model::AngNetConfig ang;
  ang.crop_channels = 6;
  ang.fc = {12, 8, 8};
  ang.n_az = 8;
  ang.n_el = 4;
  auto m = model::DrdModel<double>::create(rd, ang, seed);

  std::mt19937_64 rng(seed ^ 0x6C);
  model::Batch<double> batch;
  batch.input = random_tensor({2, rd.in_channels(), rd.n_range, rd.n_doppler}, rng);
  const std::vector<std::vector<GroundTruthLabel>> labels{
      {{3, 8, 2, 1, 0, 0.0}, {12, 0, 7, 3, 0, 0.0}},
      {{15, 15, 0, 0, 1, 0.0}},
  };
  for (int s = 0; s < 2; ++s) {
    const auto& l = labels[static_cast<std::size_t>(s)];
    const auto t = model::segmentation_targets(l, rd.n_range, rd.n_doppler);
    batch.seg_targets.insert(batch.seg_targets.end(), t.begin(), t.end());
    const auto c = model::teacher_crops(s, l);
    batch.crops.insert(batch.crops.end(), c.begin(), c.end());
  }

  const std::uint64_t dropout_seed = seed ^ 0xD2;
  nn::GradCheckTarget target;
  for (auto& p : m.rdnet.params()) target.params.push_back(&p);
  for (auto& p : m.angnet.params()) target.params.push_back(&p);
  target.loss = [&] { return model::total_loss(m, batch, 1.0, 1.0, true, false, nn::Mode::kTrain, dropout_seed).total; };
  target.loss_and_grad = [&] {
    return model::total_loss(m, batch, 1.0, 1.0, true, true, nn::Mode::kTrain, dropout_seed).total;
  };
  target.kink_signature = [&] { return m.rdnet.kink_signature() * 31 ^ m.angnet.kink_signature(); };
  return {"drd_reduced_joint", nn::gradient_check(target, options)};
}

std::vector<NamedReport> gradcheck_suite(std::uint64_t seed, const nn::GradCheckOptions& options) {
  auto out = layer_gradchecks(seed, options);
  out.push_back(drd_gradcheck(seed, options));
  return out;
}

std::string gradcheck_csv(const std::vector<NamedReport>& reports, const std::string& config_echo) {
  std::string out = io::comment_block(config_echo) + kGradcheckHeader + "\n";
  for (const auto& r : reports) {
    char err[32];
    std::snprintf(err, sizeof err, "%.3e", r.report.max_rel_error);
    out += r.name + "," + err + "," + std::to_string(r.report.checked) + "," +
           std::to_string(r.report.kinks_excluded) + "," + r.report.worst_entry + "," +
           (r.report.passed() ? "1" : "0") + "\n";
  }
  return out;
}

}  // namespace drd::checks
