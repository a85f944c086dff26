#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "drd/augment.hpp"
#include "drd/classic.hpp"
#include "drd/signal_sim.hpp"

using namespace drd;

namespace {

std::pair<std::size_t, double> argmax_energy(const RDMap& rd) {
  const auto e = rd.energy_map();
  const auto it = std::max_element(e.begin(), e.end());
  return {static_cast<std::size_t>(it - e.begin()), *it};
}

sim::SynthResult target_at(std::uint32_t r, std::uint32_t d, std::uint64_t seed) {
  const auto p = RadarParams::desk_default();
  const AngleGrid g;
  const auto pert = sim::ChannelPerturbation::random(0, 8, seed);
  return sim::synthesize_frame({{range_of_bin(r, p), doppler_of_bin(d, p), 10.0, -5.0, 1.0}}, p, g, &pert,
                               sim::kNoNoise, seed);
}

}  // namespace

TEST(AugmentShift, ZeroShiftIsIdentity) {
  const auto s = target_at(10, 32, 1);
  const auto [f, l] = augment::augment_shift(s.frame, s.labels, {0, 0});
  EXPECT_EQ(l, s.labels);
  for (std::size_t i = 0; i < f.data().size(); ++i) EXPECT_NEAR(std::abs(f.data().values()[i] - s.frame.data().values()[i]), 0.0, 1e-6);
}

TEST(AugmentShift, PeakMovesByShiftAndKeepsMagnitude) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> pos(8, 55), sh(-8, 8);
  for (int t = 0; t < 25; ++t) {
    const auto r = static_cast<std::uint32_t>(pos(rng)), d = static_cast<std::uint32_t>(pos(rng));
    const int dr = sh(rng), dd = sh(rng);
    const auto s = target_at(r, d, static_cast<std::uint64_t>(t));
    const auto [f, l] = augment::augment_shift(s.frame, s.labels, {dr, dd});
    const auto [i0, e0] = argmax_energy(classic::rd_transform(s.frame));
    const auto [i1, e1] = argmax_energy(classic::rd_transform(f));
    EXPECT_EQ(i0, r * 64 + d);
    EXPECT_EQ(i1, static_cast<std::size_t>((static_cast<int>(r) + dr) * 64 + static_cast<int>(d) + dd));
    EXPECT_NEAR(std::sqrt(e1), std::sqrt(e0), 1e-4 * std::sqrt(e0));
    EXPECT_EQ(l[0].r_bin, static_cast<std::uint32_t>(static_cast<int>(r) + dr));
    EXPECT_EQ(l[0].d_bin, static_cast<std::uint32_t>(static_cast<int>(d) + dd));
    EXPECT_EQ(l[0].az_bin, s.labels[0].az_bin);
    EXPECT_EQ(l[0].el_bin, s.labels[0].el_bin);
  }
}

TEST(AugmentShift, ComposesAdditively) {
  const auto s = target_at(20, 30, 2);
  const auto [a, la] = augment::augment_shift(s.frame, s.labels, {3, -4});
  const auto [b, lb] = augment::augment_shift(a, la, {-1, 6});
  const auto [c, lc] = augment::augment_shift(s.frame, s.labels, {2, 2});
  EXPECT_EQ(lb, lc);
  for (std::size_t i = 0; i < c.data().size(); ++i) EXPECT_NEAR(std::abs(b.data().values()[i] - c.data().values()[i]), 0.0, 1e-4);
}

TEST(AugmentShift, OutOfMapShiftThrows) {
  const auto s = target_at(60, 32, 3);
  EXPECT_FALSE(augment::shift_feasible(s.frame, s.labels, {4, 0}));
  EXPECT_THROW(augment::augment_shift(s.frame, s.labels, {4, 0}), InvalidArgument);
  EXPECT_TRUE(augment::shift_feasible(s.frame, s.labels, {3, -32}));
  EXPECT_FALSE(augment::shift_feasible(s.frame, s.labels, {0, -33}));
}

TEST(RandomAugment, StaysInRangeAndFeasibleAndIsSeeded) {
  std::vector<augment::Sample> batch, copy;
  for (std::uint32_t i = 0; i < 12; ++i) {
    const auto s = target_at(5 + 4 * i, 10 + 3 * i, i);
    batch.push_back({s.frame, s.labels});
  }
  copy = batch;
  const augment::ShiftRange range{-10, 10, -6, 6};
  const auto rep = augment::random_augment(batch, range, 77);
  auto again = copy;
  const auto rep2 = augment::random_augment(again, range, 77);
  ASSERT_EQ(rep.applied.size(), 12u);
  for (std::size_t i = 0; i < 12; ++i) {
    const auto sh = rep.applied[i];
    EXPECT_GE(sh.dr, -10);
    EXPECT_LE(sh.dr, 10);
    EXPECT_GE(sh.dd, -6);
    EXPECT_LE(sh.dd, 6);
    EXPECT_EQ(batch[i].labels[0].r_bin, static_cast<std::uint32_t>(static_cast<int>(copy[i].labels[0].r_bin) + sh.dr));
    EXPECT_LT(batch[i].labels[0].r_bin, 64u);
    EXPECT_EQ(rep2.applied[i].dr, sh.dr);
    EXPECT_EQ(rep2.applied[i].dd, sh.dd);
  }
  EXPECT_TRUE(rep.skipped.empty());
}

TEST(RandomAugment, InfeasibleSampleIsSkippedAndReported) {
  const auto s = target_at(63, 32, 5);
  std::vector<augment::Sample> batch{{s.frame, s.labels}};
  const auto rep = augment::random_augment(batch, {1, 3, 0, 0}, 1);
  ASSERT_EQ(rep.skipped, std::vector<std::size_t>{0});
  EXPECT_EQ(batch[0].labels, s.labels);
}
