#include "drd/classic.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace drd::classic {

double estimate_noise_floor(std::span<const double> energy, std::size_t n_range, std::size_t n_doppler,
                            std::span<const CellExclusion> exclusion) {
  if (energy.size() != n_range * n_doppler) throw InvalidArgument("noise floor: energy map size mismatch");
  std::vector<double> kept;
  kept.reserve(energy.size());
  for (std::size_t r = 0; r < n_range; ++r) {
    for (std::size_t d = 0; d < n_doppler; ++d) {
      const bool excluded = std::any_of(exclusion.begin(), exclusion.end(), [&](const CellExclusion& ex) {
        const auto dr = std::abs(static_cast<long>(r) - static_cast<long>(ex.r));
        const auto dd = std::abs(static_cast<long>(d) - static_cast<long>(ex.d));
        return std::max(dr, dd) <= static_cast<long>(ex.radius);
      });
      if (!excluded) kept.push_back(energy[r * n_doppler + d]);
    }
  }
  if (kept.empty() || kept.size() * 4 < energy.size()) {
    throw InvalidArgument("noise floor: exclusion leaves fewer than 25% of cells");
  }
  // Median; even counts average the two middle values.
  const std::size_t mid = kept.size() / 2;
  std::nth_element(kept.begin(), kept.begin() + static_cast<long>(mid), kept.end());
  double median = kept[mid];
  if (kept.size() % 2 == 0) {
    median = 0.5 * (median + *std::max_element(kept.begin(), kept.begin() + static_cast<long>(mid)));
  }
  return power_to_db(median);
}

double estimate_noise_floor(const RDMap& rd, std::span<const CellExclusion> exclusion) {
  const auto energy = rd.energy_map();
  return estimate_noise_floor(energy, rd.n_range(), rd.n_doppler(), exclusion);
}

void CfarParams::validate() const {
  if (window_size <= guard_size) throw InvalidArgument("cfar: window_size must exceed guard_size");
  if (!(alpha_db >= 0.0)) throw InvalidArgument("cfar: alpha_db must be >= 0");
  if (!std::isfinite(pregate_margin_db)) throw InvalidArgument("cfar: pregate margin must be finite");
}

std::vector<RDCell> ca_cfar(const EnergyMap& energy, const CfarParams& params, double noise_floor_db) {
  params.validate();
  const long nr = static_cast<long>(energy.n_range), nd = static_cast<long>(energy.n_doppler);
  if (energy.values.size() != energy.n_range * energy.n_doppler) {
    throw InvalidArgument("cfar: energy map size mismatch");
  }
  const double alpha = std::pow(10.0, params.alpha_db / 10.0);
  const double gate_db = noise_floor_db + params.pregate_margin_db;
  const long win = params.window_size, guard = params.guard_size;

  // Summed-area table turns each annulus sum into two rectangle queries.
  std::vector<double> sat(static_cast<std::size_t>((nr + 1) * (nd + 1)), 0.0);
  auto sat_at = [&](long r, long d) -> double& { return sat[static_cast<std::size_t>(r * (nd + 1) + d)]; };
  for (long r = 0; r < nr; ++r) {
    for (long d = 0; d < nd; ++d) {
      sat_at(r + 1, d + 1) = energy.at(r, d) + sat_at(r, d + 1) + sat_at(r + 1, d) - sat_at(r, d);
    }
  }
  auto box = [&](long r, long d, long half, double& sum, long& count) {
    const long r0 = std::max(0L, r - half), r1 = std::min(nr - 1, r + half);
    const long d0 = std::max(0L, d - half), d1 = std::min(nd - 1, d + half);
    sum = sat_at(r1 + 1, d1 + 1) - sat_at(r0, d1 + 1) - sat_at(r1 + 1, d0) + sat_at(r0, d0);
    count = (r1 - r0 + 1) * (d1 - d0 + 1);
  };

  std::vector<RDCell> out;
  for (long r = 0; r < nr; ++r) {
    for (long d = 0; d < nd; ++d) {
      const double cut = energy.at(r, d);
      if (!(power_to_db(cut) > gate_db)) continue;
      double outer_sum = 0, inner_sum = 0;
      long outer_n = 0, inner_n = 0;
      box(r, d, win, outer_sum, outer_n);
      box(r, d, guard, inner_sum, inner_n);
      const long ref_n = outer_n - inner_n;
      if (ref_n <= 0) continue;  // undecidable
      // Clamp tiny negative residue from the table subtraction.
      const double y = std::max(0.0, outer_sum - inner_sum) / static_cast<double>(ref_n);
      if (cut > alpha * y) out.push_back({static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(d)});
    }
  }
  return out;
}

std::vector<RDCell> local_max_nms(std::span<const RDCell> detections, const EnergyMap& energy,
                                  std::uint32_t radius) {
  std::vector<RDCell> sorted(detections.begin(), detections.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<RDCell> out;
  for (const auto& cell : sorted) {
    const double e = energy.at(cell.r, cell.d);
    bool keep = true;
    for (const auto& other : sorted) {
      if (other == cell) continue;
      const long dr = std::abs(static_cast<long>(other.r) - static_cast<long>(cell.r));
      const long dd = std::abs(static_cast<long>(other.d) - static_cast<long>(cell.d));
      if (std::max(dr, dd) > static_cast<long>(radius)) continue;
      const double eo = energy.at(other.r, other.d);
      if (eo > e || (eo == e && other < cell)) {
        keep = false;
        break;
      }
    }
    if (keep) out.push_back(cell);
  }
  return out;
}

CalibrationMatrix::CalibrationMatrix(std::uint32_t radar_id, std::size_t n_antennas, std::size_t n_columns,
                                     std::vector<std::complex<double>> values)
    : radar_id_(radar_id), n_antennas_(n_antennas), n_columns_(n_columns), values_(std::move(values)) {
  if (values_.size() != n_antennas_ * n_columns_) throw InvalidArgument("calibration matrix: size mismatch");
  for (const auto& v : values_) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
      throw InvalidArgument("calibration matrix: non-finite entry");
    }
  }
}

CalibrationMatrix CalibrationMatrix::measure(const AngleGrid& grid, const std::vector<AntennaPosition>& geometry,
                                             const sim::ChannelPerturbation* perturbation, std::uint32_t radar_id) {
  grid.validate();
  std::vector<std::complex<double>> values;
  values.reserve(grid.n_cells() * geometry.size());
  for (std::uint32_t az = 0; az < grid.n_az; ++az) {
    for (std::uint32_t el = 0; el < grid.n_el; ++el) {
      const auto sv = sim::steering_vector(grid.az_of_bin(az), grid.el_of_bin(el), geometry, perturbation);
      values.insert(values.end(), sv.begin(), sv.end());
    }
  }
  return CalibrationMatrix(radar_id, geometry.size(), grid.n_cells(), std::move(values));
}

AngleBins bartlett_doa(std::span<const std::complex<double>> snapshot, const CalibrationMatrix& cal,
                       const AngleGrid& grid) {
  if (snapshot.size() != cal.n_antennas()) throw InvalidArgument("bartlett: snapshot length mismatch");
  if (cal.n_columns() != grid.n_cells()) throw InvalidArgument("bartlett: calibration/grid mismatch");
  double snapshot_energy = 0.0;
  for (const auto& v : snapshot) snapshot_energy += std::norm(v);
  if (!(snapshot_energy > 0.0)) throw InvalidArgument("bartlett: no signal in snapshot");

  std::size_t best = 0;
  double best_power = -1.0;
  for (std::size_t k = 0; k < cal.n_columns(); ++k) {
    const auto a = cal.column(k);
    std::complex<double> inner{0.0, 0.0};
    double norm = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      inner += std::conj(a[i]) * snapshot[i];
      norm += std::norm(a[i]);
    }
    const double power = norm > 0.0 ? std::norm(inner) / norm : 0.0;
    if (power > best_power) {
      best_power = power;
      best = k;
    }
  }
  return {static_cast<std::uint32_t>(best / grid.n_el), static_cast<std::uint32_t>(best % grid.n_el)};
}

AngleBins bartlett_doa(std::span<const cfloat> snapshot, const CalibrationMatrix& cal, const AngleGrid& grid) {
  std::vector<std::complex<double>> wide(snapshot.begin(), snapshot.end());
  return bartlett_doa(std::span<const std::complex<double>>(wide), cal, grid);
}

CalibrationMatrix average_calibration(std::span<const CalibrationMatrix> mats) {
  if (mats.empty()) throw InvalidArgument("average_calibration: no matrices");
  const auto& first = mats.front();
  std::vector<std::complex<double>> sum(first.values().size());
  for (const auto& m : mats) {
    if (m.n_antennas() != first.n_antennas() || m.n_columns() != first.n_columns()) {
      throw InvalidArgument("average_calibration: shape mismatch");
    }
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += m.values()[i];
  }
  const double inv = 1.0 / static_cast<double>(mats.size());
  for (auto& v : sum) v *= inv;
  return CalibrationMatrix(first.radar_id(), first.n_antennas(), first.n_columns(), std::move(sum));
}

std::vector<Detection4D> classic_detect(const RawFrame& frame, const CfarParams& params,
                                        const CalibrationMatrix& cal, const AngleGrid& grid) {
  const RDMap rd = rd_transform(frame, WindowKind::kHamming);
  const auto energy = rd.energy_map();
  const EnergyMap view{energy, rd.n_range(), rd.n_doppler()};
  const double floor_db = estimate_noise_floor(energy, rd.n_range(), rd.n_doppler());
  const auto hits = ca_cfar(view, params, floor_db);
  const auto peaks = local_max_nms(hits, view, 1);

  const double alpha = std::pow(10.0, params.alpha_db / 10.0);
  const long win = params.window_size, guard = params.guard_size;
  const long nr = static_cast<long>(rd.n_range()), nd = static_cast<long>(rd.n_doppler());
  std::vector<Detection4D> out;
  out.reserve(peaks.size());
  for (const auto& cell : peaks) {
    Detection4D det;
    det.r_bin = cell.r;
    det.d_bin = cell.d;
    const auto angles = bartlett_doa(rd.data().fiber(cell.r, cell.d), cal, grid);
    det.az_bin = angles.az_bin;
    det.el_bin = angles.el_bin;
    det.class_label = kObjectClass;
    double ref = 0.0;
    long ref_n = 0;
    for (long r = std::max(0L, long(cell.r) - win); r <= std::min(nr - 1, long(cell.r) + win); ++r) {
      for (long d = std::max(0L, long(cell.d) - win); d <= std::min(nd - 1, long(cell.d) + win); ++d) {
        if (std::max(std::abs(r - long(cell.r)), std::abs(d - long(cell.d))) <= guard) continue;
        ref += view.at(r, d);
        ++ref_n;
      }
    }
    // dB margin of the cell over its CFAR threshold, squashed to (0, 1).
    const double margin_db = power_to_db(view.at(cell.r, cell.d)) - power_to_db(alpha * ref / double(ref_n));
    det.score = 1.0 / (1.0 + std::exp(-margin_db / 10.0));
    out.push_back(det);
  }
  return out;
}

}  // namespace drd::classic
