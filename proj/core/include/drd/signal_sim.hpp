#pragma once

// Point-target FMCW frame synthesis and calibration-style dataset generation.

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "drd/radar_core.hpp"

namespace drd::sim {

inline constexpr double kNoNoise = std::numeric_limits<double>::infinity();

struct TargetSpec {
  double range_m = 0.0;
  double velocity_mps = 0.0;
  double azimuth_deg = 0.0;
  double elevation_deg = 0.0;
  double amplitude = 1.0;
};

/// Per-antenna complex gain of one physical radar unit.
struct ChannelPerturbation {
  std::uint32_t radar_id = 0;
  std::vector<double> gain_db;
  std::vector<double> phase_deg;

  [[nodiscard]] std::size_t size() const { return gain_db.size(); }
  [[nodiscard]] std::complex<double> gain(std::size_t antenna) const;
  void validate(std::size_t n_antennas) const;

  static ChannelPerturbation identity(std::uint32_t radar_id, std::size_t n_antennas);
  /// gain_db ~ N(0, gain_sigma_db), phase ~ N(0, phase_sigma_deg), per antenna.
  static ChannelPerturbation random(std::uint32_t radar_id, std::size_t n_antennas, std::uint64_t seed,
                                    double gain_sigma_db = 0.5, double phase_sigma_deg = 5.0);
};

/// a_k = g_k * exp(j 2 pi (x_k sin(az) cos(el) + y_k sin(el))).
std::vector<std::complex<double>> steering_vector(double az_deg, double el_deg,
                                                  const std::vector<AntennaPosition>& geometry,
                                                  const ChannelPerturbation* perturbation = nullptr);

struct SynthResult {
  RawFrame frame;
  std::vector<GroundTruthLabel> labels;
};

/// Dechirped beat model summed over targets, optionally followed by add_noise.
SynthResult synthesize_frame(const std::vector<TargetSpec>& targets, const RadarParams& params,
                             const AngleGrid& grid, const ChannelPerturbation* perturbation,
                             double noise_snr_db, std::uint64_t seed);

/// Adds complex white Gaussian noise so the RD-domain peak-to-noise-floor
/// ratio (median cell energy summed over antennas) equals snr_db.
/// snr_db = +inf returns the frame unchanged.
RawFrame add_noise(const RawFrame& frame, double snr_db, std::uint64_t seed);

enum class Split { kTrain, kVal, kTest };
std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct ManifestEntry {
  std::string frame_path;  // relative to the manifest directory
  Split split = Split::kTrain;
  std::uint32_t radar_id = 0;
  std::string label_path;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  /// Directory the relative paths resolve against.
  std::filesystem::path root;

  [[nodiscard]] std::vector<const ManifestEntry*> of_split(Split s) const;
  [[nodiscard]] std::vector<std::uint32_t> radars_of_split(Split s) const;
};

struct CalibrationDatasetConfig {
  std::uint32_t n_radars = 10;
  std::uint32_t frames_per_radar = 5;
  std::uint32_t range_bin = 10;
  /// Per-frame SNR is uniform in [snr_min_db, snr_max_db]; +inf disables noise.
  double snr_min_db = kNoNoise;
  double snr_max_db = kNoNoise;
  double gain_sigma_db = 0.5;
  double phase_sigma_deg = 5.0;
  double train_ratio = 0.6;
  double val_ratio = 0.1;
  double test_ratio = 0.3;
  bool fractional_offsets = false;
  std::uint64_t seed = 1;
};

/// Radar -> split assignment. Shuffles ids by seed; val gets floor(val*N),
/// test gets floor(test*N), train takes the remainder.
std::vector<Split> assign_splits(std::uint32_t n_radars, double train_ratio, double val_ratio, double test_ratio,
                                 std::uint64_t seed);

struct GeneratedDataset {
  DatasetManifest manifest;
  std::vector<ChannelPerturbation> perturbations;  // indexed by radar_id
};

/// Writes frames/, labels/, perturbations.csv and manifest.csv under out_dir.
GeneratedDataset generate_calibration_dataset(const CalibrationDatasetConfig& config, const RadarParams& params,
                                              const AngleGrid& grid, const std::filesystem::path& out_dir,
                                              const std::string& config_echo = {});

/// Deterministic per-job seed from (master, a, b).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0);

}  // namespace drd::sim
