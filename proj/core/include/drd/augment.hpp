#pragma once

// Range/Doppler phase-shift augmentation of raw frames.

#include <cstdint>
#include <utility>
#include <vector>

#include "drd/radar_core.hpp"

namespace drd::augment {

struct AugmentShift {
  int dr = 0;  // range bins
  int dd = 0;  // Doppler bins
};

/// data'[n][c][a] = data[n][c][a] * exp(j 2 pi (dr n / Ns + dd c / Nc)).
/// Labels move by (dr, dd); angles are untouched. Throws InvalidArgument
/// if any shifted label would leave the map (no wrap-around).
std::pair<RawFrame, std::vector<GroundTruthLabel>> augment_shift(const RawFrame& frame,
                                                                 const std::vector<GroundTruthLabel>& labels,
                                                                 AugmentShift shift);

/// True when every label stays in the map under the shift.
bool shift_feasible(const RawFrame& frame, const std::vector<GroundTruthLabel>& labels, AugmentShift shift);

struct ShiftRange {
  int dr_min = 0, dr_max = 0;
  int dd_min = 0, dd_max = 0;
};

struct Sample {
  RawFrame frame;
  std::vector<GroundTruthLabel> labels;
};

struct AugmentReport {
  std::vector<AugmentShift> applied;  // one per sample; (0,0) when skipped
  std::vector<std::size_t> skipped;   // indices whose range was infeasible
};

/// Draws an independent uniform integer shift per sample from the range,
/// restricted to the shifts that keep that sample's labels in the map.
/// Samples with no feasible shift in the range are left untouched and
/// recorded in the report.
AugmentReport random_augment(std::vector<Sample>& batch, const ShiftRange& range, std::uint64_t seed);

}  // namespace drd::augment
