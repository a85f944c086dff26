#pragma once

// Gradient-check suite: one small graph per layer type, both losses, and a
// reduced end-to-end DRD (RD-Net + Ang-Net joint loss) in double precision.

#include <cstdint>
#include <string>
#include <vector>

#include "drd/nn/gradcheck.hpp"

namespace drd::checks {

struct NamedReport {
  std::string name;
  nn::GradCheckReport report;
};

/// Layer-level cases: conv (padded, strided), relu, maxpool, upsample,
/// concat, global maxpool, linear, dropout, cross-entropy, class-balanced CE.
std::vector<NamedReport> layer_gradchecks(std::uint64_t seed, const nn::GradCheckOptions& options = {});

/// Full joint loss of a reduced DRD: 2*8 input channels, 16x16 map.
NamedReport drd_gradcheck(std::uint64_t seed, const nn::GradCheckOptions& options = {});

std::vector<NamedReport> gradcheck_suite(std::uint64_t seed, const nn::GradCheckOptions& options = {});

inline constexpr const char* kGradcheckHeader = "case,max_rel_error,checked,kinks_excluded,worst_entry,passed";
std::string gradcheck_csv(const std::vector<NamedReport>& reports, const std::string& config_echo = {});

}  // namespace drd::checks
