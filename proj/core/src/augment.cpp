#include "drd/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "drd/signal_sim.hpp"

namespace drd::augment {

bool shift_feasible(const RawFrame& frame, const std::vector<GroundTruthLabel>& labels, AugmentShift shift) {
  const long nr = frame.params().n_samples, nd = frame.params().n_chirps;
  return std::all_of(labels.begin(), labels.end(), [&](const GroundTruthLabel& l) {
    const long r = static_cast<long>(l.r_bin) + shift.dr;
    const long d = static_cast<long>(l.d_bin) + shift.dd;
    return r >= 0 && r < nr && d >= 0 && d < nd;
  });
}

std::pair<RawFrame, std::vector<GroundTruthLabel>> augment_shift(const RawFrame& frame,
                                                                 const std::vector<GroundTruthLabel>& labels,
                                                                 AugmentShift shift) {
  if (!shift_feasible(frame, labels, shift)) {
    throw InvalidArgument("augment_shift: shift (" + std::to_string(shift.dr) + "," + std::to_string(shift.dd) +
                          ") moves a label out of the map");
  }
  if (shift.dr == 0 && shift.dd == 0) return {frame, labels};

  const auto& src = frame.data();
  const std::size_t ns = src.dim0(), nc = src.dim1(), na = src.dim2();
  // Per-axis phasors computed from the exact integer phase index so that
  // exp(j 2 pi k/N) is evaluated at reduced arguments.
  auto phasors = [](int shift_bins, std::size_t n) {
    std::vector<std::complex<double>> out(n);
    const long period = static_cast<long>(n);
    for (std::size_t i = 0; i < n; ++i) {
      long k = (static_cast<long>(shift_bins) * static_cast<long>(i)) % period;
      if (k < 0) k += period;
      out[i] = std::polar(1.0, 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
    }
    return out;
  };
  const auto pr = phasors(shift.dr, ns);
  const auto pd = phasors(shift.dd, nc);

  ComplexCube out(ns, nc, na);
  for (std::size_t n = 0; n < ns; ++n) {
    for (std::size_t c = 0; c < nc; ++c) {
      const std::complex<double> f = pr[n] * pd[c];
      for (std::size_t a = 0; a < na; ++a) {
        const std::complex<double> v = std::complex<double>(src(n, c, a)) * f;
        out(n, c, a) = {static_cast<float>(v.real()), static_cast<float>(v.imag())};
      }
    }
  }
  std::vector<GroundTruthLabel> moved = labels;
  for (auto& l : moved) {
    l.r_bin = static_cast<std::uint32_t>(static_cast<long>(l.r_bin) + shift.dr);
    l.d_bin = static_cast<std::uint32_t>(static_cast<long>(l.d_bin) + shift.dd);
  }
  return {RawFrame(frame.params(), std::move(out)), std::move(moved)};
}

AugmentReport random_augment(std::vector<Sample>& batch, const ShiftRange& range, std::uint64_t seed) {
  if (range.dr_min > range.dr_max || range.dd_min > range.dd_max) {
    throw InvalidArgument("random_augment: empty shift range");
  }
  AugmentReport report;
  report.applied.resize(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto& sample = batch[i];
    // Intersect the configured range with the per-label feasible interval.
    long lo_r = range.dr_min, hi_r = range.dr_max, lo_d = range.dd_min, hi_d = range.dd_max;
    const long nr = sample.frame.params().n_samples, nd = sample.frame.params().n_chirps;
    for (const auto& l : sample.labels) {
      lo_r = std::max(lo_r, -static_cast<long>(l.r_bin));
      hi_r = std::min(hi_r, nr - 1 - static_cast<long>(l.r_bin));
      lo_d = std::max(lo_d, -static_cast<long>(l.d_bin));
      hi_d = std::min(hi_d, nd - 1 - static_cast<long>(l.d_bin));
    }
    if (lo_r > hi_r || lo_d > hi_d) {
      report.skipped.push_back(i);
      continue;
    }
    std::mt19937_64 rng(sim::derive_seed(seed, i, 0xA06));
    const AugmentShift shift{static_cast<int>(lo_r + static_cast<long>(rng() % static_cast<std::uint64_t>(hi_r - lo_r + 1))),
                             static_cast<int>(lo_d + static_cast<long>(rng() % static_cast<std::uint64_t>(hi_d - lo_d + 1)))};
    auto [frame, labels] = augment_shift(sample.frame, sample.labels, shift);
    sample.frame = std::move(frame);
    sample.labels = std::move(labels);
    report.applied[i] = shift;
  }
  return report;
}

}  // namespace drd::augment
