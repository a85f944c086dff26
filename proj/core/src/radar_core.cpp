#include "drd/radar_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace drd {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument(what);
}

}  // namespace

void RadarParams::validate() const {
  require(n_samples >= 1 && n_chirps >= 1 && n_antennas >= 1, "radar params: counts must be >= 1");
  require(bandwidth_hz > 0 && chirp_duration_s > 0 && carrier_hz > 0 && sample_rate_hz > 0,
          "radar params: B, T_chirp, fc, fs must be positive");
  require(geometry.size() == n_antennas, "radar params: geometry length must equal n_antennas (" +
                                             std::to_string(geometry.size()) + " vs " +
                                             std::to_string(n_antennas) + ")");
  for (const auto& p : geometry) {
    require(std::isfinite(p.x) && std::isfinite(p.y), "radar params: non-finite antenna position");
  }
}

RadarParams RadarParams::desk_default() {
  RadarParams p;
  p.n_samples = 64;
  p.n_chirps = 64;
  p.n_antennas = 8;
  p.bandwidth_hz = 500e6;
  p.chirp_duration_s = 50e-6;
  p.carrier_hz = 77e9;
  p.sample_rate_hz = p.n_samples / p.chirp_duration_s;
  p.geometry = uniform_rect_array(4, 2);
  return p;
}

std::vector<AntennaPosition> uniform_rect_array(std::uint32_t n_az, std::uint32_t n_el, double spacing) {
  std::vector<AntennaPosition> out;
  out.reserve(static_cast<std::size_t>(n_az) * n_el);
  for (std::uint32_t row = 0; row < n_el; ++row) {
    for (std::uint32_t col = 0; col < n_az; ++col) {
      out.push_back({col * spacing, row * spacing});
    }
  }
  return out;
}

ComplexCube::ComplexCube(std::size_t d0, std::size_t d1, std::size_t d2)
    : d0_(d0), d1_(d1), d2_(d2), values_(d0 * d1 * d2) {}

ComplexCube::ComplexCube(std::size_t d0, std::size_t d1, std::size_t d2, std::vector<cfloat> values)
    : d0_(d0), d1_(d1), d2_(d2), values_(std::move(values)) {
  require(values_.size() == d0 * d1 * d2, "complex cube: value count does not match dimensions");
}

bool ComplexCube::all_finite() const {
  for (const auto& v : values_) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  }
  return true;
}

RawFrame::RawFrame(RadarParams params, ComplexCube data) : params_(std::move(params)), data_(std::move(data)) {
  params_.validate();
  require(data_.dim0() == params_.n_samples && data_.dim1() == params_.n_chirps &&
              data_.dim2() == params_.n_antennas,
          "raw frame: cube dimensions do not match radar params");
  require(data_.all_finite(), "raw frame: non-finite sample");
}

double RDMap::cell_energy(std::size_t r, std::size_t d) const {
  double e = 0.0;
  for (const auto& v : data_.fiber(r, d)) e += std::norm(std::complex<double>(v));
  return e;
}

std::vector<double> RDMap::energy_map() const {
  std::vector<double> out(n_range() * n_doppler());
  for (std::size_t r = 0; r < n_range(); ++r) {
    for (std::size_t d = 0; d < n_doppler(); ++d) out[r * n_doppler() + d] = cell_energy(r, d);
  }
  return out;
}

std::vector<float> RDMap::real_channels() const {
  const std::size_t nr = n_range(), nd = n_doppler(), na = n_antennas();
  const std::size_t plane = nr * nd;
  std::vector<float> out(2 * na * plane);
  for (std::size_t r = 0; r < nr; ++r) {
    for (std::size_t d = 0; d < nd; ++d) {
      const auto cell = data_.fiber(r, d);
      for (std::size_t a = 0; a < na; ++a) {
        out[(2 * a) * plane + r * nd + d] = cell[a].real();
        out[(2 * a + 1) * plane + r * nd + d] = cell[a].imag();
      }
    }
  }
  return out;
}

RDMap RDMap::from_real_channels(std::span<const float> planes, std::size_t n_range, std::size_t n_doppler,
                                std::size_t n_antennas) {
  const std::size_t plane = n_range * n_doppler;
  require(planes.size() == 2 * n_antennas * plane, "rd map: real-channel view has wrong size");
  ComplexCube cube(n_range, n_doppler, n_antennas);
  for (std::size_t r = 0; r < n_range; ++r) {
    for (std::size_t d = 0; d < n_doppler; ++d) {
      for (std::size_t a = 0; a < n_antennas; ++a) {
        cube(r, d, a) = {planes[(2 * a) * plane + r * n_doppler + d], planes[(2 * a + 1) * plane + r * n_doppler + d]};
      }
    }
  }
  return RDMap(std::move(cube));
}

void AngleGrid::validate() const {
  require(n_az >= 1 && n_el >= 1, "angle grid: bin counts must be >= 1");
  require(az_min_deg < az_max_deg && el_min_deg < el_max_deg, "angle grid: min must be < max");
}

namespace {

double angle_of_bin(std::uint32_t k, std::uint32_t n, double lo, double hi) {
  if (k >= n) throw InvalidArgument("angle bin out of range: " + std::to_string(k));
  if (n == 1) return 0.5 * (lo + hi);
  return lo + k * (hi - lo) / (n - 1);
}

std::uint32_t bin_of_angle(double deg, std::uint32_t n, double lo, double hi) {
  const double step = n == 1 ? (hi - lo) : (hi - lo) / (n - 1);
  if (!std::isfinite(deg) || deg < lo - 0.5 * step || deg > hi + 0.5 * step) {
    throw InvalidArgument("angle outside grid span: " + std::to_string(deg));
  }
  if (n == 1) return 0;
  const long k = std::lround((deg - lo) / step);
  return static_cast<std::uint32_t>(std::clamp<long>(k, 0, static_cast<long>(n) - 1));
}

}  // namespace

double AngleGrid::az_of_bin(std::uint32_t k) const { return angle_of_bin(k, n_az, az_min_deg, az_max_deg); }
double AngleGrid::el_of_bin(std::uint32_t k) const { return angle_of_bin(k, n_el, el_min_deg, el_max_deg); }
std::uint32_t AngleGrid::az_bin_of(double az_deg) const { return bin_of_angle(az_deg, n_az, az_min_deg, az_max_deg); }
std::uint32_t AngleGrid::el_bin_of(double el_deg) const { return bin_of_angle(el_deg, n_el, el_min_deg, el_max_deg); }

double energy_db(std::complex<double> c) { return power_to_db(std::norm(c)); }

double power_to_db(double power) {
  if (power <= 0.0) return -std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(power);
}

double range_resolution(const RadarParams& params) {
  return kSpeedOfLight * params.sample_rate_hz / (2.0 * params.chirp_slope() * params.n_samples);
}

double range_of_bin(std::uint32_t k, const RadarParams& params) {
  if (k >= params.n_samples) throw InvalidArgument("range bin out of range: " + std::to_string(k));
  return k * range_resolution(params);
}

std::uint32_t bin_of_range(double range_m, const RadarParams& params) {
  const double k = std::round(range_m / range_resolution(params));
  if (!std::isfinite(k) || k < 0 || k >= params.n_samples) {
    throw InvalidArgument("range outside unambiguous span: " + std::to_string(range_m) + " m");
  }
  return static_cast<std::uint32_t>(k);
}

double velocity_resolution(const RadarParams& params) {
  return kSpeedOfLight / (2.0 * params.carrier_hz * params.n_chirps * params.chirp_duration_s);
}

double doppler_of_bin(std::uint32_t k, const RadarParams& params) {
  if (k >= params.n_chirps) throw InvalidArgument("doppler bin out of range: " + std::to_string(k));
  const double centered = static_cast<double>(k) - static_cast<double>(params.n_chirps / 2);
  return centered * velocity_resolution(params);
}

std::uint32_t bin_of_doppler(double velocity_mps, const RadarParams& params) {
  const double k = std::round(velocity_mps / velocity_resolution(params)) + static_cast<double>(params.n_chirps / 2);
  if (!std::isfinite(k) || k < 0 || k >= params.n_chirps) {
    throw InvalidArgument("velocity outside unambiguous span: " + std::to_string(velocity_mps) + " m/s");
  }
  return static_cast<std::uint32_t>(k);
}

}  // namespace drd
