#pragma once

// Plain-text key=value run configuration. Every key has a default; unknown
// keys and malformed values are rejected. echo() renders the full resolved
// configuration and parses back to an identical config.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "drd/classic.hpp"
#include "drd/drd_net.hpp"
#include "drd/signal_sim.hpp"
#include "drd/train.hpp"

namespace drd::config {

struct RunConfig {
  std::uint64_t seed = 1;

  RadarParams radar = RadarParams::desk_default();
  std::uint32_t array_az = 4;
  std::uint32_t array_el = 2;
  double array_spacing = 0.5;  // wavelengths
  double sample_rate_hz = 0.0;  // 0 = Ns / T_chirp

  AngleGrid grid;
  sim::CalibrationDatasetConfig dataset;

  model::RDNetConfig rdnet;
  model::AngNetConfig angnet;
  model::InferOptions infer;

  train::TrainSchedule schedule;
  double finetune_lr = 1e-4;
  int finetune_epochs = 200;
  // steps from the fine-tune start; unset reuses schedule.decay_steps
  std::optional<std::vector<std::uint64_t>> finetune_decay_steps;
  double finetune_snr_min_db = 0.0;
  double finetune_snr_max_db = 40.0;
  train::AblationSchedule ablation;

  classic::CfarParams cfar1 = classic::CfarParams::classic1();
  classic::CfarParams cfar2 = classic::CfarParams::classic2();

  std::vector<double> sweep_snrs{0, 10, 20, 30, 40};
  int sweep_trials = 1;
  int bench_frames = 100;

  std::string dataset_dir = "data";
  std::string checkpoint = "drd.ckpt";

  /// Propagates derived fields (geometry, model dims, head sizes, seeds)
  /// and validates every section. Called by parse().
  void finalize();

  /// Canonical "key = value" listing of every key, in fixed order.
  [[nodiscard]] std::string echo() const;

  /// Fine-tune schedule: the training schedule with lr0 and the noise range
  /// replaced.
  [[nodiscard]] train::TrainSchedule finetune_schedule() const;

  void set(const std::string& key, const std::string& value);
  [[nodiscard]] static std::vector<std::string> keys();
};

/// Applies the lines of `text` over the defaults. '#' starts a comment.
RunConfig parse(const std::string& text);
RunConfig load(const std::filesystem::path& path);

/// Keys that fix the network architecture or input geometry and differ
/// between the two configs.
std::vector<std::string> architecture_mismatches(const RunConfig& a, const RunConfig& b);

}  // namespace drd::config
