#pragma once

// On-disk formats: frame files, label sidecars, manifests, per-radar
// perturbation tables, checkpoints and small CSV helpers.
//
// Text artifacts may carry the run's config echo as leading '#' lines;
// readers skip them.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "drd/nn/tensor.hpp"
#include "drd/radar_core.hpp"
#include "drd/signal_sim.hpp"

namespace drd::io {

inline constexpr std::uint32_t kFrameVersion = 1;
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// "DRDF", u32 version, u32 Ns, Nc, Nant, then interleaved f32 (re, im) in
/// [sample][chirp][antenna] order. Everything little-endian.
void write_frame(const std::filesystem::path& path, const RawFrame& frame);
/// Dimensions come from the file; the remaining radar parameters from
/// `base` (its geometry must match the stored antenna count).
RawFrame read_frame(const std::filesystem::path& path, const RadarParams& base);

/// One line per target: r_bin,d_bin,az_bin,el_bin,radar_id,snr_db.
void write_labels(const std::filesystem::path& path, const std::vector<GroundTruthLabel>& labels);
std::vector<GroundTruthLabel> read_labels(const std::filesystem::path& path);

/// One line per frame: path,split,radar_id,label_path (paths relative to
/// the manifest's directory).
void write_manifest(const std::filesystem::path& path, const sim::DatasetManifest& manifest,
                    const std::string& config_echo = {});
sim::DatasetManifest read_manifest(const std::filesystem::path& path);

/// radar_id,antenna,gain_db,phase_deg
void write_perturbations(const std::filesystem::path& path, const std::vector<sim::ChannelPerturbation>& perts,
                         const std::string& config_echo = {});
std::vector<sim::ChannelPerturbation> read_perturbations(const std::filesystem::path& path);

struct NamedTensor {
  std::string name;
  nn::TensorF value;
  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

struct CheckpointFile {
  std::vector<NamedTensor> tensors;    // weights and schedule position
  std::vector<NamedTensor> optimizer;  // Adam moments and step counters
  std::string config_echo;
  friend bool operator==(const CheckpointFile&, const CheckpointFile&) = default;
};

/// "DRDC", u32 version, u32 record count + named-tensor records, u32 record
/// count + optimizer records, u32 length + config echo bytes. A record is
/// u32 name length, UTF-8 name, u32 rank, rank x u32 dims, f32 payload.
void write_checkpoint(const std::filesystem::path& path, const CheckpointFile& ckpt);
CheckpointFile read_checkpoint(const std::filesystem::path& path);

/// Prefixes every line of `text` with "# ".
std::string comment_block(const std::string& text);

/// Shortest text that parses back to the same double ("inf" for +inf).
std::string format_double(double v);
/// Fixed 6-decimal rendering used in result CSVs; "nan" for undefined.
std::string format_metric(double v);

/// Writes `text` atomically enough for our purposes: to a temp file next to
/// `path`, then renamed over it.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace drd::io
