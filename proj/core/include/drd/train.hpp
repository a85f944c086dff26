#pragma once

// Training loops: joint DRD training with the RD-only warm-up, noise
// fine-tuning, the standalone Ang-Net used by the ablation, and checkpoint
// (de)serialization of the training state.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "drd/augment.hpp"
#include "drd/drd_net.hpp"
#include "drd/io.hpp"
#include "drd/nn/adam.hpp"
#include "drd/signal_sim.hpp"

namespace drd::train {

struct TrainSchedule {
  double lr0 = 1e-3;
  nn::AdamConfig adam;  // lr field unused; lr comes from lr_at()
  int batch = 15;
  int rd_only_epochs = 5;
  int total_epochs = 250;
  double gamma = 0.1;
  std::vector<std::uint64_t> decay_steps{5000, 60000, 100000};  // global optimizer steps
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  /// Intersected per frame with the shifts that keep its labels in the map.
  augment::ShiftRange shifts{-64, 64, -64, 64};
  /// Per-presentation SNR ~ U[min, max]; +inf disables noise.
  double snr_min_db = sim::kNoNoise;
  double snr_max_db = sim::kNoNoise;
  /// Validation frames evaluated after each epoch (0 = all, -1 = none).
  int val_frames = 0;

  void validate() const;
  [[nodiscard]] double lr_at(std::uint64_t step) const;
};

/// In-memory view of one manifest split; frames load on demand.
class FrameSet {
 public:
  FrameSet(const sim::DatasetManifest& manifest, sim::Split split, const RadarParams& params);
  FrameSet(std::vector<augment::Sample> samples);

  [[nodiscard]] std::size_t size() const { return count_; }
  [[nodiscard]] augment::Sample load(std::size_t i) const;
  [[nodiscard]] std::uint32_t radar_id(std::size_t i) const;

 private:
  std::vector<sim::ManifestEntry> owned_;
  std::filesystem::path root_;
  RadarParams params_;
  std::vector<augment::Sample> preloaded_;
  std::size_t count_ = 0;
};

struct LogRow {
  int epoch = 0;
  std::uint64_t step = 0;
  double lr = 0.0;
  double l_rd = 0.0, l_azi = 0.0, l_ele = 0.0;
  double val_rd_acc = 0.0, val_az_acc = 0.0, val_el_acc = 0.0;
};

inline constexpr const char* kLogHeader = "epoch,step,lr,l_rd,l_azi,l_ele,val_rd_acc,val_az_acc,val_el_acc";
std::string format_log_row(const LogRow& row);

struct TrainState {
  model::DrdModel<float> model;
  nn::AdamState rd_adam;
  nn::AdamState ang_adam;
  int epoch = 0;           // completed epochs
  std::uint64_t step = 0;  // global optimizer steps
};

TrainState initial_state(const model::RDNetConfig& rd, const model::AngNetConfig& ang, const TrainSchedule& schedule,
                         std::uint64_t seed);

/// Per-epoch hook: log row plus state after the epoch.
using EpochCallback = std::function<void(const LogRow&, const TrainState&)>;

/// Runs epochs state.epoch+1 .. schedule.total_epochs. Epochs up to
/// rd_only_epochs optimize L_RD only and leave Ang-Net untouched. Every
/// batch is shift-augmented (then optionally noised) before rd_transform.
/// Throws NumericalError on a non-finite loss.
std::vector<LogRow> train_drd(TrainState& state, const FrameSet& train, const FrameSet* val,
                              const TrainSchedule& schedule, std::uint64_t seed, const EpochCallback& on_epoch = {});

/// Further joint epochs with noise at SNR ~ U[snr_min, snr_max] per
/// presentation. Adam moments carry over; the lr schedule restarts from
/// `schedule.lr0` with milestones counted from the fine-tune start.
std::vector<LogRow> finetune_noise(TrainState& state, const FrameSet& train, const FrameSet* val,
                                   const TrainSchedule& schedule, int extra_epochs, std::uint64_t seed,
                                   const EpochCallback& on_epoch = {});

/// Checkpoint tensors: "rdnet/<param>", "angnet/<param>", "state/epoch",
/// "state/step"; optimizer records "<net>/step", "<net>/m/<param>",
/// "<net>/v/<param>".
io::CheckpointFile to_checkpoint(const TrainState& state, const std::string& config_echo);
/// Rebuilds the state for the given architecture; throws IoError when the
/// stored tensors do not match it.
TrainState from_checkpoint(const io::CheckpointFile& ckpt, const model::RDNetConfig& rd,
                           const model::AngNetConfig& ang, const TrainSchedule& schedule);

struct AblationSchedule {
  double lr = 0.01;
  int batch = 40;
  int epochs = 30;
  nn::AdamConfig adam;
};

/// Teacher crops (network-input planes) with their angle targets.
struct CropSet {
  nn::TensorF crops;  // (K, 2*Nant, 3, 3)
  std::vector<int> az, el;
};

CropSet gather_gt_crops(const FrameSet& frames);

/// Trains the context-free Ang-Net on GT center crops.
nn::NetGraph<float> train_separate_angnet(const CropSet& crops, const model::AngNetConfig& ang,
                                          const model::RDNetConfig& rd, const AblationSchedule& schedule,
                                          std::uint64_t seed);

}  // namespace drd::train
