#include "drd/drd_net.hpp"

#include <algorithm>
#include <cmath>

#include "drd/classic.hpp"
#include "drd/nn/kernels.hpp"
#include "drd/nn/loss.hpp"

namespace drd::model {

void RDNetConfig::validate() const {
  if (n_antennas < 1 || n_range < 3 || n_doppler < 3) throw InvalidArgument("rdnet: map must be at least 3x3");
  if (widths.empty()) throw InvalidArgument("rdnet: at least one encoder level required");
  for (int w : widths) {
    if (w < 1) throw InvalidArgument("rdnet: encoder widths must be positive");
  }
  if (bottleneck != kGlobalFeatureWidth) throw InvalidArgument("rdnet: bottleneck width must be 512");
  if (n_classes < 2) throw InvalidArgument("rdnet: need at least two classes");
  const int div = 1 << widths.size();
  if (n_range % div != 0 || n_doppler % div != 0) {
    throw InvalidArgument("rdnet: map extents must be divisible by 2^levels (" + std::to_string(div) + ")");
  }
}

void AngNetConfig::validate() const {
  if (crop_channels < 1) throw InvalidArgument("angnet: crop channels must be positive");
  if (fc.empty()) throw InvalidArgument("angnet: at least one fc layer required");
  for (int w : fc) {
    if (w < 1) throw InvalidArgument("angnet: fc widths must be positive");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw InvalidArgument("angnet: dropout must be in [0, 1)");
  if (n_az < 1 || n_el < 1) throw InvalidArgument("angnet: head sizes must be positive");
}

template <typename T>
nn::NetGraph<T> build_rdnet(const RDNetConfig& cfg) {
  cfg.validate();
  nn::NetGraph<T> g;
  int x = g.input("rd", cfg.in_channels(), cfg.n_range, cfg.n_doppler);
  auto conv_relu = [&](const std::string& name, int in, int width, int kernel, int pad) {
    const int c = g.conv2d(name, in, width, kernel, 1, pad);
    return g.relu(name + ".relu", c);
  };
  std::vector<int> skips;
  for (std::size_t l = 0; l < cfg.widths.size(); ++l) {
    const std::string p = "enc" + std::to_string(l);
    x = conv_relu(p + ".conv1", x, cfg.widths[l], 3, 1);
    x = conv_relu(p + ".conv2", x, cfg.widths[l], 3, 1);
    skips.push_back(x);
    x = g.maxpool2(p + ".pool", x);
  }
  x = conv_relu("mid.conv1", x, cfg.bottleneck, 3, 1);
  x = g.relu("bottleneck", g.conv2d("mid.conv2", x, cfg.bottleneck, 3, 1, 1));
  g.global_maxpool("global", x);
  for (std::size_t l = cfg.widths.size(); l-- > 0;) {
    const std::string p = "dec" + std::to_string(l);
    x = g.upsample2(p + ".up", x);
    x = conv_relu(p + ".upconv", x, cfg.widths[l], 3, 1);
    x = g.concat(p + ".cat", {x, skips[l]});
    x = conv_relu(p + ".conv1", x, cfg.widths[l], 3, 1);
    x = conv_relu(p + ".conv2", x, cfg.widths[l], 3, 1);
  }
  g.conv2d("logits", x, cfg.n_classes, 1, 1, 0);
  return g;
}

template <typename T>
nn::NetGraph<T> build_angnet(const AngNetConfig& cfg, const RDNetConfig& rd) {
  cfg.validate();
  nn::NetGraph<T> g;
  const int crop = g.input("crop", rd.in_channels(), 3, 3);
  int x = g.relu("crop_conv.relu", g.conv2d("crop_conv", crop, cfg.crop_channels, 3, 1, 0));
  if (cfg.use_context) {
    const int global = g.input("global", kGlobalFeatureWidth, 1, 1);
    const int onehot = g.input("onehot", rd.n_classes, 1, 1);
    x = g.concat("context", {x, global, onehot});
  }
  for (std::size_t i = 0; i < cfg.fc.size(); ++i) {
    const std::string name = "fc" + std::to_string(i + 1);
    x = g.relu(name + ".relu", g.linear(name, x, cfg.fc[i]));
    if (i == 0) x = g.dropout("fc1.dropout", x, cfg.dropout);
  }
  g.linear("az", x, cfg.n_az);
  g.linear("el", x, cfg.n_el);
  return g;
}

template <typename T>
DrdModel<T> DrdModel<T>::create(const RDNetConfig& rd, const AngNetConfig& ang, std::uint64_t seed) {
  DrdModel<T> m{rd, ang, build_rdnet<T>(rd), build_angnet<T>(ang, rd)};
  m.rdnet.init_weights(seed);
  m.angnet.init_weights(seed ^ 0xA9E7ULL);
  return m;
}

nn::TensorF network_input(const RDMap& rd) {
  auto planes = rd.real_channels();
  float peak = 0.0f;
  for (const auto& v : rd.data().values()) peak = std::max(peak, std::abs(v));
  if (peak > 0.0f) {
    const float inv = 1.0f / peak;
    for (auto& v : planes) v *= inv;
  }
  return nn::TensorF({1, static_cast<int>(2 * rd.n_antennas()), static_cast<int>(rd.n_range()),
                      static_cast<int>(rd.n_doppler())},
                     std::move(planes));
}

std::pair<int, int> crop_origin(int r, int d, int n_range, int n_doppler) {
  if (n_range < 3 || n_doppler < 3) throw InvalidArgument("crop3x3: map smaller than 3x3");
  if (r < 0 || r >= n_range || d < 0 || d >= n_doppler) throw InvalidArgument("crop3x3: cell outside map");
  return {std::clamp(r - 1, 0, n_range - 3), std::clamp(d - 1, 0, n_doppler - 3)};
}

template <typename T>
nn::Tensor<T> crop3x3(const nn::Tensor<T>& planes, int n, int r, int d) {
  const int c = planes.dim(1), h = planes.dim(2), w = planes.dim(3);
  const auto [r0, d0] = crop_origin(r, d, h, w);
  nn::Tensor<T> out({c, 3, 3});
  for (int ch = 0; ch < c; ++ch) {
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        out[(static_cast<std::size_t>(ch) * 3 + i) * 3 + j] = planes.at(n, ch, r0 + i, d0 + j);
      }
    }
  }
  return out;
}

template <typename T>
nn::Tensor<T> global_feature(const nn::Tensor<T>& bottleneck) {
  if (bottleneck.rank() != 4 || bottleneck.dim(1) != kGlobalFeatureWidth) {
    throw InvalidArgument("global_feature: expected (N, 512, h, w), got " + nn::shape_string(bottleneck.shape()));
  }
  std::vector<std::int64_t> argmax;
  auto pooled = nn::global_maxpool_forward(bottleneck, argmax);
  return pooled.reshaped({bottleneck.dim(0), kGlobalFeatureWidth});
}

std::vector<CropRef> teacher_crops(int sample, std::span<const GroundTruthLabel> labels) {
  std::vector<CropRef> out;
  out.reserve(labels.size());
  for (const auto& l : labels) {
    out.push_back({sample, static_cast<int>(l.r_bin), static_cast<int>(l.d_bin), static_cast<int>(l.az_bin),
                   static_cast<int>(l.el_bin), static_cast<int>(kObjectClass)});
  }
  return out;
}

std::vector<int> segmentation_targets(std::span<const GroundTruthLabel> labels, int n_range, int n_doppler) {
  std::vector<int> t(static_cast<std::size_t>(n_range) * n_doppler, static_cast<int>(kBackgroundClass));
  for (const auto& l : labels) {
    if (static_cast<int>(l.r_bin) >= n_range || static_cast<int>(l.d_bin) >= n_doppler) {
      throw InvalidArgument("segmentation_targets: label outside map");
    }
    t[static_cast<std::size_t>(l.r_bin) * n_doppler + l.d_bin] = static_cast<int>(kObjectClass);
  }
  return t;
}

namespace {

template <typename T>
nn::Tensor<T> gather_crops(const nn::Tensor<T>& input, std::span<const CropRef> crops) {
  const int c = input.dim(1);
  nn::Tensor<T> out({static_cast<int>(crops.size()), c, 3, 3});
  for (std::size_t k = 0; k < crops.size(); ++k) {
    const auto crop = crop3x3(input, crops[k].sample, crops[k].r, crops[k].d);
    std::copy(crop.values().begin(), crop.values().end(), out.data() + k * crop.size());
  }
  return out;
}

template <typename T>
nn::Tensor<T> one_hot(std::span<const int> classes, int n_classes) {
  nn::Tensor<T> out({static_cast<int>(classes.size()), n_classes, 1, 1});
  for (std::size_t k = 0; k < classes.size(); ++k) {
    if (classes[k] < 0 || classes[k] >= n_classes) throw InvalidArgument("one_hot: class out of range");
    out[k * static_cast<std::size_t>(n_classes) + static_cast<std::size_t>(classes[k])] = T{1};
  }
  return out;
}

template <typename T>
int argmax_row(const nn::Tensor<T>& t, std::size_t row, int width) {
  const T* p = t.data() + row * static_cast<std::size_t>(width);
  return static_cast<int>(std::max_element(p, p + width) - p);
}

}  // namespace

template <typename T>
LossBreakdown total_loss(DrdModel<T>& model, const Batch<T>& batch, double lambda1, double lambda2, bool joint,
                         bool grads, nn::Mode mode, std::uint64_t dropout_seed) {
  auto& rdnet = model.rdnet;
  rdnet.forward({{"rd", batch.input}}, mode, dropout_seed);
  const auto rd_loss = nn::class_balanced_cross_entropy(rdnet.output("logits"), batch.seg_targets);
  LossBreakdown out;
  out.rd = rd_loss.loss;
  typename nn::NetGraph<T>::TensorMap rd_grads;
  if (grads) rd_grads["logits"] = rd_loss.grad;

  if (joint && !batch.crops.empty()) {
    const auto k = static_cast<int>(batch.crops.size());
    const auto& global_all = rdnet.output("global");
    nn::Tensor<T> global({k, kGlobalFeatureWidth, 1, 1});
    std::vector<int> classes, az, el;
    for (int i = 0; i < k; ++i) {
      const auto& c = batch.crops[static_cast<std::size_t>(i)];
      std::copy_n(global_all.data() + static_cast<std::size_t>(c.sample) * kGlobalFeatureWidth, kGlobalFeatureWidth,
                  global.data() + static_cast<std::size_t>(i) * kGlobalFeatureWidth);
      classes.push_back(c.class_label);
      az.push_back(c.az);
      el.push_back(c.el);
    }
    auto& angnet = model.angnet;
    angnet.forward({{"crop", gather_crops(batch.input, batch.crops)},
                    {"global", global},
                    {"onehot", one_hot<T>(classes, model.rd_config.n_classes)}},
                   mode, dropout_seed ^ 0x5A5A5A5AULL);
    auto az_loss = nn::softmax_cross_entropy(angnet.output("az"), az);
    auto el_loss = nn::softmax_cross_entropy(angnet.output("el"), el);
    out.az = az_loss.loss;
    out.el = el_loss.loss;
    if (grads) {
      for (auto& v : az_loss.grad.values()) v *= static_cast<T>(lambda1);
      for (auto& v : el_loss.grad.values()) v *= static_cast<T>(lambda2);
      angnet.zero_grad();
      auto in_grads = angnet.backward({{"az", az_loss.grad}, {"el", el_loss.grad}});
      nn::Tensor<T> g_global(global_all.shape());
      const auto& gk = in_grads.at("global");
      for (int i = 0; i < k; ++i) {
        const auto s = static_cast<std::size_t>(batch.crops[static_cast<std::size_t>(i)].sample);
        for (int j = 0; j < kGlobalFeatureWidth; ++j) {
          g_global[s * kGlobalFeatureWidth + static_cast<std::size_t>(j)] +=
              gk[static_cast<std::size_t>(i) * kGlobalFeatureWidth + static_cast<std::size_t>(j)];
        }
      }
      rd_grads["global"] = std::move(g_global);
    }
  }
  if (grads) {
    rdnet.zero_grad();
    rdnet.backward(rd_grads);
  }
  out.total = out.rd + lambda1 * out.az + lambda2 * out.el;
  return out;
}

template <typename T>
LossBreakdown angnet_only_loss(nn::NetGraph<T>& angnet, const nn::Tensor<T>& crops, std::span<const int> az,
                               std::span<const int> el, bool grads, nn::Mode mode, std::uint64_t dropout_seed) {
  angnet.forward({{"crop", crops}}, mode, dropout_seed);
  auto az_loss = nn::softmax_cross_entropy(angnet.output("az"), az);
  auto el_loss = nn::softmax_cross_entropy(angnet.output("el"), el);
  if (grads) {
    angnet.zero_grad();
    angnet.backward({{"az", az_loss.grad}, {"el", el_loss.grad}});
  }
  LossBreakdown out;
  out.az = az_loss.loss;
  out.el = el_loss.loss;
  out.total = out.az + out.el;
  return out;
}

std::vector<Detection4D> infer_rd(const DrdModel<float>& model, const RDMap& rd, const InferOptions& options) {
  const nn::DenormalsAreZero daz;
  const auto& cfg = model.rd_config;
  if (static_cast<int>(rd.n_range()) != cfg.n_range || static_cast<int>(rd.n_doppler()) != cfg.n_doppler ||
      static_cast<int>(rd.n_antennas()) != cfg.n_antennas) {
    throw InvalidArgument("infer: frame dimensions do not match the model configuration");
  }
  const auto input = network_input(rd);
  const auto outs = model.rdnet.evaluate({{"rd", input}}, {"logits", "global"});
  const auto probs = nn::softmax_channels(outs.at("logits"));
  const int nr = cfg.n_range, nd = cfg.n_doppler, nc = cfg.n_classes;
  const std::size_t plane = static_cast<std::size_t>(nr) * nd;

  std::vector<double> best_prob(plane, 0.0);
  std::vector<int> best_class(plane, static_cast<int>(kBackgroundClass));
  std::vector<classic::RDCell> candidates;
  for (std::size_t p = 0; p < plane; ++p) {
    int k_best = 0;
    for (int k = 1; k < nc; ++k) {
      if (probs[static_cast<std::size_t>(k) * plane + p] > probs[static_cast<std::size_t>(k_best) * plane + p]) k_best = k;
    }
    const double pr = probs[static_cast<std::size_t>(k_best) * plane + p];
    if (k_best != static_cast<int>(kBackgroundClass) && pr > options.threshold) {
      best_prob[p] = pr;
      best_class[p] = k_best;
      candidates.push_back({static_cast<std::uint32_t>(p / nd), static_cast<std::uint32_t>(p % nd)});
    }
  }
  const classic::EnergyMap score_map{best_prob, static_cast<std::size_t>(nr), static_cast<std::size_t>(nd)};
  const auto kept = classic::local_max_nms(candidates, score_map, options.nms_radius);
  if (kept.empty()) return {};

  std::vector<CropRef> crops;
  std::vector<int> classes;
  for (const auto& cell : kept) {
    const int cls = best_class[static_cast<std::size_t>(cell.r) * nd + cell.d];
    crops.push_back({0, static_cast<int>(cell.r), static_cast<int>(cell.d), 0, 0, cls});
    classes.push_back(cls);
  }
  const auto k = static_cast<int>(crops.size());
  nn::NetGraph<float>::TensorMap ang_in{{"crop", gather_crops(input, crops)}};
  if (model.ang_config.use_context) {
    nn::TensorF global({k, kGlobalFeatureWidth, 1, 1});
    for (int i = 0; i < k; ++i) {
      std::copy_n(outs.at("global").data(), kGlobalFeatureWidth, global.data() + static_cast<std::size_t>(i) * kGlobalFeatureWidth);
    }
    ang_in["global"] = std::move(global);
    ang_in["onehot"] = one_hot<float>(classes, nc);
  }
  const auto ang = model.angnet.evaluate(ang_in, {"az", "el"});

  std::vector<Detection4D> out;
  for (int i = 0; i < k; ++i) {
    const auto& cell = kept[static_cast<std::size_t>(i)];
    Detection4D det;
    det.r_bin = cell.r;
    det.d_bin = cell.d;
    det.az_bin = static_cast<std::uint32_t>(argmax_row(ang.at("az"), static_cast<std::size_t>(i), model.ang_config.n_az));
    det.el_bin = static_cast<std::uint32_t>(argmax_row(ang.at("el"), static_cast<std::size_t>(i), model.ang_config.n_el));
    det.class_label = static_cast<std::uint32_t>(classes[static_cast<std::size_t>(i)]);
    det.score = best_prob[static_cast<std::size_t>(cell.r) * nd + cell.d];
    out.push_back(det);
  }
  return out;
}

std::vector<Detection4D> infer(const DrdModel<float>& model, const RawFrame& frame, const InferOptions& options) {
  return infer_rd(model, classic::rd_transform(frame, classic::WindowKind::kHamming), options);
}

std::vector<std::pair<int, int>> predict_angles(const DrdModel<float>& model, const RDMap& rd,
                                                std::span<const GroundTruthLabel> labels) {
  if (labels.empty()) return {};
  const nn::DenormalsAreZero daz;
  const auto input = network_input(rd);
  const auto crops = teacher_crops(0, labels);
  const auto k = static_cast<int>(crops.size());
  nn::NetGraph<float>::TensorMap ang_in{{"crop", gather_crops(input, crops)}};
  if (model.ang_config.use_context) {
    const auto outs = model.rdnet.evaluate({{"rd", input}}, {"global"});
    nn::TensorF global({k, kGlobalFeatureWidth, 1, 1});
    std::vector<int> classes;
    for (int i = 0; i < k; ++i) {
      std::copy_n(outs.at("global").data(), kGlobalFeatureWidth, global.data() + static_cast<std::size_t>(i) * kGlobalFeatureWidth);
      classes.push_back(crops[static_cast<std::size_t>(i)].class_label);
    }
    ang_in["global"] = std::move(global);
    ang_in["onehot"] = one_hot<float>(classes, model.rd_config.n_classes);
  }
  const auto ang = model.angnet.evaluate(ang_in, {"az", "el"});
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < k; ++i) {
    out.emplace_back(argmax_row(ang.at("az"), static_cast<std::size_t>(i), model.ang_config.n_az),
                     argmax_row(ang.at("el"), static_cast<std::size_t>(i), model.ang_config.n_el));
  }
  return out;
}

template nn::NetGraph<float> build_rdnet(const RDNetConfig&);
template nn::NetGraph<double> build_rdnet(const RDNetConfig&);
template nn::NetGraph<float> build_angnet(const AngNetConfig&, const RDNetConfig&);
template nn::NetGraph<double> build_angnet(const AngNetConfig&, const RDNetConfig&);
template struct DrdModel<float>;
template struct DrdModel<double>;
template nn::TensorF crop3x3(const nn::TensorF&, int, int, int);
template nn::TensorD crop3x3(const nn::TensorD&, int, int, int);
template nn::TensorF global_feature(const nn::TensorF&);
template nn::TensorD global_feature(const nn::TensorD&);
template LossBreakdown total_loss(DrdModel<float>&, const Batch<float>&, double, double, bool, bool, nn::Mode,
                                  std::uint64_t);
template LossBreakdown total_loss(DrdModel<double>&, const Batch<double>&, double, double, bool, bool, nn::Mode,
                                  std::uint64_t);
template LossBreakdown angnet_only_loss(nn::NetGraph<float>&, const nn::TensorF&, std::span<const int>,
                                        std::span<const int>, bool, nn::Mode, std::uint64_t);
template LossBreakdown angnet_only_loss(nn::NetGraph<double>&, const nn::TensorD&, std::span<const int>,
                                        std::span<const int>, bool, nn::Mode, std::uint64_t);

}  // namespace drd::model
