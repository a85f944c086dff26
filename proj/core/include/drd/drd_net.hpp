#pragma once

// RD-Net (U-Net segmentation over the range-Doppler map) and Ang-Net
// (per-detection azimuth/elevation classifier), their joint loss and the
// inference rule.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "drd/augment.hpp"
#include "drd/nn/adam.hpp"
#include "drd/nn/graph.hpp"
#include "drd/radar_core.hpp"

namespace drd::model {

struct RDNetConfig {
  int n_antennas = 8;
  int n_range = 64;
  int n_doppler = 64;
  std::vector<int> widths{64, 128, 256};  // one entry per encoder level
  int bottleneck = 512;
  int n_classes = 2;

  [[nodiscard]] int in_channels() const { return 2 * n_antennas; }
  void validate() const;
};

struct AngNetConfig {
  int crop_channels = 256;
  std::vector<int> fc{512, 256, 128};
  double dropout = 0.2;  // after fc1
  int n_az = 32;
  int n_el = 16;
  /// false builds the standalone variant: crop features only, no global
  /// feature and no class one-hot.
  bool use_context = true;

  void validate() const;
};

inline constexpr int kGlobalFeatureWidth = 512;

/// U-Net: per level two 3x3 conv + ReLU, 2x2 max pool down; 512-channel
/// bottleneck; nearest x2 upsample + 3x3 conv + ReLU up, skip concat, two
/// 3x3 conv + ReLU; final 1x1 conv to class logits.
/// Nodes: input "rd"; outputs "logits", "bottleneck", "global".
template <typename T>
nn::NetGraph<T> build_rdnet(const RDNetConfig& cfg);

/// crop -> 3x3 valid conv (crop_channels) + ReLU -> [| global | one-hot] ->
/// fc1 + ReLU + dropout -> fc2 + ReLU -> fc3 + ReLU -> heads.
/// Inputs "crop" (+ "global", "onehot" with context); outputs "az", "el".
template <typename T>
nn::NetGraph<T> build_angnet(const AngNetConfig& cfg, const RDNetConfig& rd);

template <typename T>
struct DrdModel {
  RDNetConfig rd_config;
  AngNetConfig ang_config;
  nn::NetGraph<T> rdnet;
  nn::NetGraph<T> angnet;

  static DrdModel create(const RDNetConfig& rd, const AngNetConfig& ang, std::uint64_t seed);

  template <typename U>
  [[nodiscard]] DrdModel<U> cast() const {
    return {rd_config, ang_config, rdnet.template cast<U>(), angnet.template cast<U>()};
  }
};

/// Network input planes (2*Nant, Nr, Nd) of an RD map, scaled so the
/// largest |value| over the map is 1. An all-zero map stays zero.
nn::TensorF network_input(const RDMap& rd);

/// Start (row, col) of the 3x3 window around (r, d): centered in the
/// interior, slid inward at the edges so it stays inside the map.
std::pair<int, int> crop_origin(int r, int d, int n_range, int n_doppler);

/// 3x3 crop of sample `n` of an (N, C, H, W) tensor -> (C, 3, 3).
template <typename T>
nn::Tensor<T> crop3x3(const nn::Tensor<T>& planes, int n, int r, int d);

/// Per-channel spatial max of a (N, 512, h, w) bottleneck.
template <typename T>
nn::Tensor<T> global_feature(const nn::Tensor<T>& bottleneck);

/// Ang-Net training example located at a ground-truth cell.
struct CropRef {
  int sample = 0;  // index into the batch
  int r = 0, d = 0;
  int az = 0, el = 0;
  int class_label = static_cast<int>(kObjectClass);
};

/// Teacher-forced crop list: one entry per label, at the label's cell.
std::vector<CropRef> teacher_crops(int sample, std::span<const GroundTruthLabel> labels);

template <typename T>
struct Batch {
  nn::Tensor<T> input;          // (B, 2*Nant, Nr, Nd)
  std::vector<int> seg_targets;  // B*Nr*Nd, class per cell
  std::vector<CropRef> crops;
};

/// Object cells at every label, background elsewhere.
std::vector<int> segmentation_targets(std::span<const GroundTruthLabel> labels, int n_range, int n_doppler);

struct LossBreakdown {
  double total = 0.0;
  double rd = 0.0;
  double az = 0.0;
  double el = 0.0;
};

/// L_RD + lambda1 L_az + lambda2 L_el. With joint = false only L_RD is
/// formed and Ang-Net is not run. When grads is true, parameter gradients
/// are zeroed and refilled (including the Ang-Net contribution that flows
/// into RD-Net through the global feature).
template <typename T>
LossBreakdown total_loss(DrdModel<T>& model, const Batch<T>& batch, double lambda1, double lambda2, bool joint,
                         bool grads, nn::Mode mode, std::uint64_t dropout_seed);

/// Standalone Ang-Net loss on crops (no context inputs).
template <typename T>
LossBreakdown angnet_only_loss(nn::NetGraph<T>& angnet, const nn::Tensor<T>& crops, std::span<const int> az,
                               std::span<const int> el, bool grads, nn::Mode mode, std::uint64_t dropout_seed);

struct InferOptions {
  double threshold = 0.8;
  std::uint32_t nms_radius = 1;
};

/// rd_transform -> RD-Net -> per-cell softmax -> candidates whose best
/// non-background class has probability > threshold -> NMS on probability
/// -> Ang-Net argmax per survivor.
std::vector<Detection4D> infer(const DrdModel<float>& model, const RawFrame& frame, const InferOptions& options = {});

/// Inference on an already-transformed map.
std::vector<Detection4D> infer_rd(const DrdModel<float>& model, const RDMap& rd, const InferOptions& options = {});

/// Ang-Net argmax at given cells with teacher-forced context (GT class).
std::vector<std::pair<int, int>> predict_angles(const DrdModel<float>& model, const RDMap& rd,
                                                std::span<const GroundTruthLabel> labels);

}  // namespace drd::model
