#pragma once

// Shared radar domain types: frame/map containers, angle grid, detections,
// and bin <-> physical-unit conversions.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace drd {

using cfloat = std::complex<float>;

inline constexpr double kSpeedOfLight = 299'792'458.0;

/// Base error type. Subclasses map onto CLI exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad argument or violated precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// File-system or format failure.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or divergence during numerical work.
class NumericalError : public Error {
 public:
  using Error::Error;
};

struct AntennaPosition {
  double x = 0.0;  // wavelengths
  double y = 0.0;  // wavelengths
};

struct RadarParams {
  std::uint32_t n_samples = 64;
  std::uint32_t n_chirps = 64;
  std::uint32_t n_antennas = 8;
  double bandwidth_hz = 500e6;
  double chirp_duration_s = 50e-6;
  double carrier_hz = 77e9;
  double sample_rate_hz = 64.0 / 50e-6;
  std::vector<AntennaPosition> geometry;

  /// Chirp slope B / T_chirp in Hz/s.
  [[nodiscard]] double chirp_slope() const { return bandwidth_hz / chirp_duration_s; }

  /// Throws InvalidArgument when any invariant is violated.
  void validate() const;

  /// 64x64 samples/chirps, 4 x 2 half-wavelength virtual array at 77 GHz.
  [[nodiscard]] static RadarParams desk_default();
};

/// Uniform rectangular virtual array, half-wavelength spacing, row-major
/// over (elevation row, azimuth column).
std::vector<AntennaPosition> uniform_rect_array(std::uint32_t n_az, std::uint32_t n_el,
                                                double spacing = 0.5);

/// Dense complex cube with row-major [d0][d1][d2] layout.
class ComplexCube {
 public:
  ComplexCube() = default;
  ComplexCube(std::size_t d0, std::size_t d1, std::size_t d2);
  ComplexCube(std::size_t d0, std::size_t d1, std::size_t d2, std::vector<cfloat> values);

  [[nodiscard]] std::size_t dim0() const { return d0_; }
  [[nodiscard]] std::size_t dim1() const { return d1_; }
  [[nodiscard]] std::size_t dim2() const { return d2_; }
  [[nodiscard]] std::size_t size() const { return values_.size(); }

  [[nodiscard]] std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
    return (i * d1_ + j) * d2_ + k;
  }
  [[nodiscard]] const cfloat& operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return values_[index(i, j, k)];
  }
  cfloat& operator()(std::size_t i, std::size_t j, std::size_t k) { return values_[index(i, j, k)]; }

  [[nodiscard]] std::span<const cfloat> values() const { return values_; }
  [[nodiscard]] std::span<cfloat> values() { return values_; }

  /// The d2 values at (i, j), contiguous.
  [[nodiscard]] std::span<const cfloat> fiber(std::size_t i, std::size_t j) const {
    return std::span<const cfloat>(values_).subspan(index(i, j, 0), d2_);
  }

  [[nodiscard]] bool all_finite() const;

  friend bool operator==(const ComplexCube&, const ComplexCube&) = default;

 private:
  std::size_t d0_ = 0, d1_ = 0, d2_ = 0;
  std::vector<cfloat> values_;
};

/// Raw echo samples indexed [sample][chirp][antenna].
class RawFrame {
 public:
  RawFrame() = default;
  /// Validates dimensions against params and finiteness of all samples.
  RawFrame(RadarParams params, ComplexCube data);

  [[nodiscard]] const RadarParams& params() const { return params_; }
  [[nodiscard]] const ComplexCube& data() const { return data_; }

  friend bool operator==(const RawFrame& a, const RawFrame& b) { return a.data_ == b.data_; }

 private:
  RadarParams params_;
  ComplexCube data_;
};

/// Range-Doppler map indexed [range_bin][doppler_bin][antenna]; Doppler is
/// FFT-shifted so zero velocity sits at bin Nd/2.
class RDMap {
 public:
  RDMap() = default;
  explicit RDMap(ComplexCube data) : data_(std::move(data)) {}

  [[nodiscard]] std::size_t n_range() const { return data_.dim0(); }
  [[nodiscard]] std::size_t n_doppler() const { return data_.dim1(); }
  [[nodiscard]] std::size_t n_antennas() const { return data_.dim2(); }
  [[nodiscard]] const ComplexCube& data() const { return data_; }

  /// Non-coherent energy sum over antennas at one cell.
  [[nodiscard]] double cell_energy(std::size_t r, std::size_t d) const;

  /// Nr x Nd map of per-cell energies summed over antennas (linear).
  [[nodiscard]] std::vector<double> energy_map() const;

  /// Planar real view [2*Nant][Nr][Nd]: plane 2a = Re(antenna a),
  /// plane 2a+1 = Im(antenna a).
  [[nodiscard]] std::vector<float> real_channels() const;
  static RDMap from_real_channels(std::span<const float> planes, std::size_t n_range,
                                  std::size_t n_doppler, std::size_t n_antennas);

  friend bool operator==(const RDMap&, const RDMap&) = default;

 private:
  ComplexCube data_;
};

/// Discretized azimuth/elevation grid used by calibration and Ang-Net heads.
struct AngleGrid {
  std::uint32_t n_az = 32;
  std::uint32_t n_el = 16;
  double az_min_deg = -60.0;
  double az_max_deg = 60.0;
  double el_min_deg = -20.0;
  double el_max_deg = 20.0;

  void validate() const;

  [[nodiscard]] double az_of_bin(std::uint32_t k) const;
  [[nodiscard]] double el_of_bin(std::uint32_t k) const;
  /// Nearest bin; throws when the angle is outside the grid span.
  [[nodiscard]] std::uint32_t az_bin_of(double az_deg) const;
  [[nodiscard]] std::uint32_t el_bin_of(double el_deg) const;

  /// Column index of (az, el) in calibration matrices: az-major.
  [[nodiscard]] std::size_t column(std::uint32_t az_bin, std::uint32_t el_bin) const {
    return static_cast<std::size_t>(az_bin) * n_el + el_bin;
  }
  [[nodiscard]] std::size_t n_cells() const { return static_cast<std::size_t>(n_az) * n_el; }
};

inline constexpr std::uint32_t kObjectClass = 1;
inline constexpr std::uint32_t kBackgroundClass = 0;

struct Detection4D {
  std::uint32_t r_bin = 0;
  std::uint32_t d_bin = 0;
  std::optional<std::uint32_t> az_bin;
  std::optional<std::uint32_t> el_bin;
  std::uint32_t class_label = kObjectClass;
  double score = 0.0;

  friend bool operator==(const Detection4D&, const Detection4D&) = default;
};

struct GroundTruthLabel {
  std::uint32_t r_bin = 0;
  std::uint32_t d_bin = 0;
  std::uint32_t az_bin = 0;
  std::uint32_t el_bin = 0;
  std::uint32_t radar_id = 0;
  double snr_db = 0.0;

  friend bool operator==(const GroundTruthLabel&, const GroundTruthLabel&) = default;
};

/// 10*log10(|c|^2); zero maps to -infinity.
double energy_db(std::complex<double> c);
/// Same scale applied to an already-squared linear energy.
double power_to_db(double power);

double range_of_bin(std::uint32_t k, const RadarParams& params);
std::uint32_t bin_of_range(double range_m, const RadarParams& params);
double range_resolution(const RadarParams& params);

double doppler_of_bin(std::uint32_t k, const RadarParams& params);
std::uint32_t bin_of_doppler(double velocity_mps, const RadarParams& params);
double velocity_resolution(const RadarParams& params);

}  // namespace drd
