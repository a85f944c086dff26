#pragma once

// Conventional detection chain: windowed 2D FFT, noise-floor pre-gate,
// 2D CA-CFAR, local-maximum suppression and Bartlett beamforming.

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "drd/radar_core.hpp"
#include "drd/signal_sim.hpp"

namespace drd::classic {

enum class WindowKind { kRectangular, kHamming };

/// Symmetric window of length n (Hamming: 0.54 - 0.46 cos(2 pi i / (n-1))).
std::vector<float> make_window(WindowKind kind, std::size_t n);

/// Per antenna: window both axes, 2D FFT (samples -> range, chirps ->
/// Doppler), FFT-shift the Doppler axis.
RDMap rd_transform(const RawFrame& frame, WindowKind window = WindowKind::kHamming);

struct CellExclusion {
  std::uint32_t r = 0;
  std::uint32_t d = 0;
  std::uint32_t radius = 1;  // Chebyshev
};

/// Median per-cell energy (dB, summed over antennas) over non-excluded cells.
/// Throws InvalidArgument when fewer than 25% of cells remain.
double estimate_noise_floor(const RDMap& rd, std::span<const CellExclusion> exclusion = {});
double estimate_noise_floor(std::span<const double> energy, std::size_t n_range, std::size_t n_doppler,
                            std::span<const CellExclusion> exclusion = {});

struct CfarParams {
  std::uint32_t window_size = 5;  // half-width, bins
  std::uint32_t guard_size = 1;   // half-width, bins
  double alpha_db = 16.0;
  double pregate_margin_db = 10.0;

  void validate() const;

  static CfarParams classic1() { return {5, 1, 16.0, 10.0}; }
  static CfarParams classic2() { return {10, 3, 16.0, 10.0}; }
};

struct RDCell {
  std::uint32_t r = 0;
  std::uint32_t d = 0;
  friend bool operator==(const RDCell&, const RDCell&) = default;
  friend auto operator<=>(const RDCell&, const RDCell&) = default;
};

/// Linear energy map view, row-major [range][doppler].
struct EnergyMap {
  std::span<const double> values;
  std::size_t n_range = 0;
  std::size_t n_doppler = 0;

  [[nodiscard]] double at(std::size_t r, std::size_t d) const { return values[r * n_doppler + d]; }
};

/// Cells whose energy clears the pre-gate and exceeds alpha times the mean
/// linear energy of the clipped square annulus (guard < Chebyshev <= window).
/// Output is sorted by (r, d).
std::vector<RDCell> ca_cfar(const EnergyMap& energy, const CfarParams& params, double noise_floor_db);

/// Keeps cells that are the strict maximum within Chebyshev radius among
/// the candidate set; ties go to the lexicographically lowest (r, d).
std::vector<RDCell> local_max_nms(std::span<const RDCell> detections, const EnergyMap& energy,
                                  std::uint32_t radius = 1);

/// Steering-vector table, one column per grid cell (az-major).
class CalibrationMatrix {
 public:
  CalibrationMatrix() = default;
  CalibrationMatrix(std::uint32_t radar_id, std::size_t n_antennas, std::size_t n_columns,
                    std::vector<std::complex<double>> values);

  /// Steering vectors of the given perturbation sampled at every grid cell.
  static CalibrationMatrix measure(const AngleGrid& grid, const std::vector<AntennaPosition>& geometry,
                                   const sim::ChannelPerturbation* perturbation, std::uint32_t radar_id = 0);

  [[nodiscard]] std::uint32_t radar_id() const { return radar_id_; }
  [[nodiscard]] std::size_t n_antennas() const { return n_antennas_; }
  [[nodiscard]] std::size_t n_columns() const { return n_columns_; }
  [[nodiscard]] std::span<const std::complex<double>> column(std::size_t k) const {
    return std::span<const std::complex<double>>(values_).subspan(k * n_antennas_, n_antennas_);
  }
  [[nodiscard]] const std::vector<std::complex<double>>& values() const { return values_; }

  friend bool operator==(const CalibrationMatrix&, const CalibrationMatrix&) = default;

 private:
  std::uint32_t radar_id_ = 0;
  std::size_t n_antennas_ = 0;
  std::size_t n_columns_ = 0;
  std::vector<std::complex<double>> values_;  // column-major: [column][antenna]
};

struct AngleBins {
  std::uint32_t az_bin = 0;
  std::uint32_t el_bin = 0;
  friend bool operator==(const AngleBins&, const AngleBins&) = default;
};

/// argmax_k |a_k^H x|^2 / (a_k^H a_k). Throws InvalidArgument on a zero
/// snapshot or length mismatch.
AngleBins bartlett_doa(std::span<const std::complex<double>> snapshot, const CalibrationMatrix& cal,
                       const AngleGrid& grid);
AngleBins bartlett_doa(std::span<const cfloat> snapshot, const CalibrationMatrix& cal, const AngleGrid& grid);

/// Elementwise complex mean.
CalibrationMatrix average_calibration(std::span<const CalibrationMatrix> mats);

/// rd_transform -> noise floor -> CA-CFAR on antenna-summed energy -> NMS ->
/// Bartlett per surviving cell.
std::vector<Detection4D> classic_detect(const RawFrame& frame, const CfarParams& params,
                                        const CalibrationMatrix& cal, const AngleGrid& grid);

}  // namespace drd::classic
