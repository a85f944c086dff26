#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "../common/oracles.hpp"
#include "../common/tempdir.hpp"
#include "drd/classic.hpp"
#include "drd/io.hpp"
#include "drd/signal_sim.hpp"

using namespace drd;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

}  // namespace

TEST(Steering, BoresightIsAllOnes) {
  const auto p = RadarParams::desk_default();
  for (const auto& v : sim::steering_vector(0.0, 0.0, p.geometry)) {
    EXPECT_NEAR(v.real(), 1.0, 1e-15);
    EXPECT_NEAR(v.imag(), 0.0, 1e-15);
  }
}

TEST(Steering, MatchesIndependentFormulaAndUnitModulus) {
  const auto p = RadarParams::desk_default();
  for (double az : {-50.0, -7.5, 33.0}) {
    for (double el : {-15.0, 4.0, 19.0}) {
      const auto a = sim::steering_vector(az, el, p.geometry);
      const auto ref = oracle::steering(az, el, 4, 2, 0.5);
      for (std::size_t k = 0; k < a.size(); ++k) {
        EXPECT_NEAR(std::abs(a[k]), 1.0, 1e-12);
        EXPECT_NEAR(std::abs(a[k] - ref[k]), 0.0, 1e-12);
      }
    }
  }
}

TEST(Steering, PerturbationMultipliesGain) {
  const auto p = RadarParams::desk_default();
  const auto pert = sim::ChannelPerturbation::random(3, 8, 99);
  const auto a = sim::steering_vector(20.0, -5.0, p.geometry, &pert);
  const auto b = sim::steering_vector(20.0, -5.0, p.geometry);
  for (std::size_t k = 0; k < 8; ++k) {
    const auto g = std::polar(std::pow(10.0, pert.gain_db[k] / 20.0), pert.phase_deg[k] * std::numbers::pi / 180.0);
    EXPECT_NEAR(std::abs(a[k] - g * b[k]), 0.0, 1e-12);
  }
}

TEST(Perturbation, StatisticsMatchConfiguredSigma) {
  double sg = 0, sp = 0;
  int n = 0;
  for (std::uint64_t s = 0; s < 400; ++s) {
    const auto p = sim::ChannelPerturbation::random(0, 8, s, 0.5, 5.0);
    for (std::size_t a = 0; a < 8; ++a) {
      sg += p.gain_db[a] * p.gain_db[a];
      sp += p.phase_deg[a] * p.phase_deg[a];
      ++n;
    }
  }
  EXPECT_NEAR(std::sqrt(sg / n), 0.5, 0.03);
  EXPECT_NEAR(std::sqrt(sp / n), 5.0, 0.3);
}

TEST(Synthesize, SingleTargetPeaksAtRangeBinAndZeroDoppler) {
  const auto p = RadarParams::desk_default();
  const AngleGrid g;
  const auto s = sim::synthesize_frame({{range_of_bin(10, p), 0.0, 0.0, 0.0, 1.0}}, p, g, nullptr, sim::kNoNoise, 1);
  ASSERT_EQ(s.labels.size(), 1u);
  EXPECT_EQ(s.labels[0].r_bin, 10u);
  EXPECT_EQ(s.labels[0].d_bin, 32u);
  const auto rd = classic::rd_transform(s.frame);
  for (std::size_t a = 0; a < p.n_antennas; ++a) {
    std::size_t best = 0;
    double best_e = -1;
    for (std::size_t r = 0; r < 64; ++r)
      for (std::size_t d = 0; d < 64; ++d)
        if (std::norm(rd.data()(r, d, a)) > best_e) best_e = std::norm(rd.data()(r, d, a)), best = r * 64 + d;
    EXPECT_EQ(best, 10u * 64u + 32u) << "antenna " << a;
  }
}

TEST(Synthesize, BeatModelMatchesHandFormula) {
  const auto p = RadarParams::desk_default();
  const AngleGrid g;
  const sim::TargetSpec t{7.3, 2.1, 12.0, -6.0, 0.7};
  const auto s = sim::synthesize_frame({t}, p, g, nullptr, sim::kNoNoise, 1);
  const auto steer = oracle::steering(t.azimuth_deg, t.elevation_deg, 4, 2, 0.5);
  const double fb = 2.0 * p.bandwidth_hz / p.chirp_duration_s * t.range_m / kSpeedOfLight;
  const double fd = 2.0 * t.velocity_mps * p.carrier_hz / kSpeedOfLight;
  for (std::size_t n : {0u, 5u, 63u}) {
    for (std::size_t c : {0u, 17u, 63u}) {
      const double ph = 2.0 * std::numbers::pi * (fb * n / p.sample_rate_hz + fd * c * p.chirp_duration_s);
      for (std::size_t a = 0; a < 8; ++a) {
        const auto want = t.amplitude * std::polar(1.0, ph) * steer[a];
        const auto got = s.frame.data()(n, c, a);
        EXPECT_NEAR(got.real(), want.real(), 2e-6);
        EXPECT_NEAR(got.imag(), want.imag(), 2e-6);
      }
    }
  }
}

TEST(Synthesize, LinearInTargets) {
  const auto p = RadarParams::desk_default();
  const AngleGrid g;
  const sim::TargetSpec a{range_of_bin(12, p), 0.0, -20.0, 5.0, 1.0}, b{range_of_bin(40, p), 3.0, 30.0, -10.0, 0.5};
  const auto fa = sim::synthesize_frame({a}, p, g, nullptr, sim::kNoNoise, 1).frame;
  const auto fb = sim::synthesize_frame({b}, p, g, nullptr, sim::kNoNoise, 1).frame;
  const auto fab = sim::synthesize_frame({a, b}, p, g, nullptr, sim::kNoNoise, 1);
  EXPECT_EQ(fab.labels.size(), 2u);
  for (std::size_t i = 0; i < fab.frame.data().size(); ++i) {
    const auto sum = fa.data().values()[i] + fb.data().values()[i];
    EXPECT_NEAR(std::abs(fab.frame.data().values()[i] - sum), 0.0, 1e-6);
  }
}

TEST(Synthesize, RejectsEmptyAndOutOfSpan) {
  const auto p = RadarParams::desk_default();
  const AngleGrid g;
  EXPECT_THROW(sim::synthesize_frame({}, p, g, nullptr, sim::kNoNoise, 1), InvalidArgument);
  EXPECT_THROW(sim::synthesize_frame({{1e4, 0, 0, 0, 1}}, p, g, nullptr, sim::kNoNoise, 1), InvalidArgument);
  EXPECT_THROW(sim::synthesize_frame({{5, 0, 80, 0, 1}}, p, g, nullptr, sim::kNoNoise, 1), InvalidArgument);
}

TEST(AddNoise, InfinityIsIdentity) {
  const auto p = RadarParams::desk_default();
  const auto f = sim::synthesize_frame({{range_of_bin(10, p), 0, 0, 0, 1}}, p, AngleGrid{}, nullptr, sim::kNoNoise, 1).frame;
  EXPECT_EQ(sim::add_noise(f, sim::kNoNoise, 5), f);
}

TEST(AddNoise, MeasuredSnrWithinOneDb) {
  const auto p = RadarParams::desk_default();
  const auto f = sim::synthesize_frame({{range_of_bin(20, p), 0, 10, 5, 1}}, p, AngleGrid{}, nullptr, sim::kNoNoise, 1).frame;
  for (double snr : {0.0, 10.0, 30.0}) {
    for (std::uint64_t seed : {1u, 2u}) {
      const auto noisy = sim::add_noise(f, snr, seed);
      const auto rd = classic::rd_transform(noisy);
      const auto e = rd.energy_map();
      // Peak from the noiseless map; floor as the median of the noisy map
      // away from the target, computed here without the library helper.
      const double peak = classic::rd_transform(f).cell_energy(20, 32);
      std::vector<double> rest;
      for (std::size_t r = 0; r < 64; ++r)
        for (std::size_t d = 0; d < 64; ++d)
          if (std::max(std::abs(static_cast<int>(r) - 20), std::abs(static_cast<int>(d) - 32)) > 3) rest.push_back(e[r * 64 + d]);
      std::nth_element(rest.begin(), rest.begin() + rest.size() / 2, rest.end());
      const double measured = 10 * std::log10(peak) - 10 * std::log10(rest[rest.size() / 2]);
      EXPECT_NEAR(measured, snr, 1.0) << "snr " << snr << " seed " << seed;
    }
  }
}

TEST(AddNoise, SeedsGiveDifferentNoise) {
  const auto p = RadarParams::desk_default();
  const auto f = sim::synthesize_frame({{range_of_bin(10, p), 0, 0, 0, 1}}, p, AngleGrid{}, nullptr, sim::kNoNoise, 1).frame;
  EXPECT_NE(sim::add_noise(f, 10, 1), sim::add_noise(f, 10, 2));
  EXPECT_EQ(sim::add_noise(f, 10, 1), sim::add_noise(f, 10, 1));
}

TEST(Splits, CountsFollowFloorRule) {
  const auto s = sim::assign_splits(20, 0.6, 0.1, 0.3, 1);
  EXPECT_EQ(std::count(s.begin(), s.end(), sim::Split::kTrain), 12);
  EXPECT_EQ(std::count(s.begin(), s.end(), sim::Split::kVal), 2);
  EXPECT_EQ(std::count(s.begin(), s.end(), sim::Split::kTest), 6);
  const auto t = sim::assign_splits(10, 0.6, 0.1, 0.3, 1);
  EXPECT_EQ(std::count(t.begin(), t.end(), sim::Split::kTrain), 6);
  EXPECT_THROW(sim::assign_splits(10, 0.6, 0.3, 0.3, 1), InvalidArgument);
  EXPECT_THROW(sim::assign_splits(0, 0.6, 0.1, 0.3, 1), InvalidArgument);
}

TEST(Dataset, TenByFiveGivesFiftyFramesAndIsReproducible) {
  TempDir a("ds_a"), b("ds_b");
  sim::CalibrationDatasetConfig cfg;
  cfg.n_radars = 10;
  cfg.frames_per_radar = 5;
  const auto p = RadarParams::desk_default();
  const AngleGrid g;
  const auto da = sim::generate_calibration_dataset(cfg, p, g, a.path());
  sim::generate_calibration_dataset(cfg, p, g, b.path());
  EXPECT_EQ(da.manifest.entries.size(), 50u);
  EXPECT_EQ(da.perturbations.size(), 10u);
  std::size_t frames = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(a.path())) {
    if (!e.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(e.path(), a.path());
    EXPECT_EQ(slurp(e.path()), slurp(b.path() / rel)) << rel;
    frames += rel.string().starts_with("frames");
  }
  EXPECT_EQ(frames, 50u);
}

TEST(Dataset, CalibrationStyleLabels) {
  TempDir dir("ds_c");
  sim::CalibrationDatasetConfig cfg;
  cfg.n_radars = 3;
  cfg.frames_per_radar = 6;
  cfg.range_bin = 10;
  const auto p = RadarParams::desk_default();
  const auto ds = sim::generate_calibration_dataset(cfg, p, AngleGrid{}, dir.path());
  for (const auto& e : ds.manifest.entries) {
    const auto labels = io::read_labels(ds.manifest.root / e.label_path);
    ASSERT_EQ(labels.size(), 1u);
    EXPECT_EQ(labels[0].r_bin, 10u);
    EXPECT_EQ(labels[0].d_bin, 32u);
    EXPECT_EQ(labels[0].radar_id, e.radar_id);
  }
  // Every radar lives in exactly one split.
  for (std::uint32_t r = 0; r < 3; ++r) {
    std::set<sim::Split> splits;
    for (const auto& e : ds.manifest.entries)
      if (e.radar_id == r) splits.insert(e.split);
    EXPECT_EQ(splits.size(), 1u);
  }
}

TEST(Dataset, InvalidSplitConfigRejected) {
  TempDir dir("ds_d");
  sim::CalibrationDatasetConfig cfg;
  cfg.train_ratio = 0.9;
  EXPECT_THROW(sim::generate_calibration_dataset(cfg, RadarParams::desk_default(), AngleGrid{}, dir.path()),
               InvalidArgument);
}

TEST(DeriveSeed, DistinctStreams) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 50; ++a)
    for (std::uint64_t b = 0; b < 50; ++b) seen.insert(sim::derive_seed(7, a, b));
  EXPECT_EQ(seen.size(), 2500u);
  EXPECT_EQ(sim::derive_seed(7, 1, 2), sim::derive_seed(7, 1, 2));
  EXPECT_NE(sim::derive_seed(7, 1, 2), sim::derive_seed(8, 1, 2));
}
