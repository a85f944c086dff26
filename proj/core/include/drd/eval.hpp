#pragma once

// Detection matching, pooled accuracy, and the experiment drivers behind
// the comparison table, the SNR sweep and the Ang-Net ablation.

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "drd/classic.hpp"
#include "drd/drd_net.hpp"
#include "drd/train.hpp"

namespace drd::eval {

inline constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();

struct MatchPair {
  std::size_t det = 0;
  std::size_t gt = 0;
  int r_err = 0, d_err = 0;
  int az_err = -1, el_err = -1;  // -1 when the detection carries no angle
};

struct MatchResult {
  std::vector<MatchPair> pairs;
  std::vector<std::size_t> unmatched_dets;  // false alarms
  std::vector<std::size_t> unmatched_gts;   // misses
};

/// Greedy one-to-one pairing by ascending R_err + D_err (ties: lower det,
/// then lower gt index), gated at Chebyshev RD distance <= 1.
MatchResult match_detections(std::span<const Detection4D> dets, std::span<const GroundTruthLabel> gts);

struct AccuracyReport {
  double rd_accuracy = kUndefined;  // percent, NaN when N_det = 0
  double az_accuracy = kUndefined;
  double el_accuracy = kUndefined;
  std::size_t n_det = 0;
  std::size_t n_gt = 0;
  std::size_t misses = 0;
  std::size_t false_alarms = 0;

  [[nodiscard]] bool defined() const { return n_det > 0; }
};

inline constexpr int kRdTolerance = 1;
inline constexpr int kAngleTolerance = 2;

/// Pooled counters; add() per frame, report() at the end.
struct AccuracyCounts {
  std::size_t n_det = 0, n_gt = 0;
  std::size_t rd_ok = 0, az_ok = 0, el_ok = 0;
  std::size_t misses = 0, false_alarms = 0;

  void add(const MatchResult& m, std::size_t n_dets, std::size_t n_gts);
  [[nodiscard]] AccuracyReport report() const;
};

/// Accuracy over N_det: unmatched detections fail all three tests.
AccuracyReport accuracy(const MatchResult& m, std::size_t n_dets, std::size_t n_gts);

/// Undefined accuracies compare as zero.
double ordering_value(double accuracy);

using Detector = std::function<std::vector<Detection4D>(const RawFrame&)>;

/// Runs `detector` on every frame (or on max_frames evenly strided ones),
/// optionally after add_noise with a per-frame seed.
AccuracyReport evaluate(const train::FrameSet& frames, const Detector& detector, double snr_db = sim::kNoNoise,
                        std::uint64_t noise_seed = 0, std::size_t max_frames = 0);

/// Calibration estimate for the classical chain: mean of the steering
/// tables of the given radars.
classic::CalibrationMatrix averaged_calibration(const std::vector<sim::ChannelPerturbation>& perturbations,
                                                const std::vector<std::uint32_t>& radar_ids,
                                                const RadarParams& params, const AngleGrid& grid);

struct MethodSet {
  const model::DrdModel<float>* drd = nullptr;
  model::InferOptions infer;
  classic::CfarParams classic1 = classic::CfarParams::classic1();
  classic::CfarParams classic2 = classic::CfarParams::classic2();
  classic::CalibrationMatrix calibration;
  AngleGrid grid;

  [[nodiscard]] Detector detector(const std::string& method) const;  // "drd", "classic1", "classic2"
};

inline const std::vector<std::string> kMethods{"drd", "classic1", "classic2"};

struct Comparison {
  AccuracyReport drd, classic1, classic2;
};

Comparison compare_methods(const train::FrameSet& test, const MethodSet& methods);

inline constexpr const char* kComparisonHeader = "metric,drd,classic1,classic2";
std::string comparison_csv(const Comparison& c, const std::string& config_echo = {});

struct SweepRow {
  double snr_db = 0.0;
  std::string method;
  AccuracyReport report;
};

/// For each SNR (ascending) and trial, noises every frame with a fresh
/// per-(snr, trial, frame) seed and evaluates all methods on the pooled set.
std::vector<SweepRow> snr_sweep(const train::FrameSet& test, const MethodSet& methods, std::vector<double> snrs,
                                int trials, std::uint64_t seed);

inline constexpr const char* kSweepHeader = "snr_db,method,rd_acc,az_acc,el_acc";
std::string sweep_csv(const std::vector<SweepRow>& rows, const std::string& config_echo = {});

struct AblationResult {
  double joint_az = kUndefined, joint_el = kUndefined;
  double separate_az = kUndefined, separate_el = kUndefined;
  std::size_t n_crops = 0;
};

/// Trains the standalone Ang-Net on train-split GT crops and scores both
/// variants on the test-split GT crops.
AblationResult ablation_separate_angnet(const train::FrameSet& train, const train::FrameSet& test,
                                        const model::DrdModel<float>& joint, const train::AblationSchedule& schedule,
                                        std::uint64_t seed);

inline constexpr const char* kAblationHeader = "metric,drd_joint,angnet_separate";
std::string ablation_csv(const AblationResult& r, const std::string& config_echo = {});

}  // namespace drd::eval
