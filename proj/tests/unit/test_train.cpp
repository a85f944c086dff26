#include <gtest/gtest.h>

#include <cmath>

#include "drd/train.hpp"

using namespace drd;
using namespace drd::train;

namespace {

RadarParams small_params() {
  auto p = RadarParams::desk_default();
  p.n_samples = 16;
  p.n_chirps = 16;
  p.n_antennas = 4;
  p.sample_rate_hz = 16.0 / p.chirp_duration_s;
  p.geometry = uniform_rect_array(2, 2);
  return p;
}

AngleGrid small_grid() {
  AngleGrid g;
  g.n_az = 8;
  g.n_el = 4;
  return g;
}

FrameSet small_set(int n, std::uint64_t seed) {
  const auto p = small_params();
  const auto g = small_grid();
  std::vector<augment::Sample> s;
  for (int i = 0; i < n; ++i) {
    const auto az = static_cast<std::uint32_t>(i % 8), el = static_cast<std::uint32_t>(i % 4);
    const auto pert = sim::ChannelPerturbation::random(0, 4, seed);
    const auto r = sim::synthesize_frame({{range_of_bin(5, p), 0.0, g.az_of_bin(az), g.el_of_bin(el), 1.0}}, p, g, &pert,
                                         sim::kNoNoise, sim::derive_seed(seed, static_cast<std::uint64_t>(i)));
    s.push_back({r.frame, r.labels});
  }
  return FrameSet(std::move(s));
}

model::RDNetConfig small_rd() {
  model::RDNetConfig c;
  c.n_antennas = 4;
  c.n_range = 16;
  c.n_doppler = 16;
  c.widths = {4, 4};
  return c;
}

model::AngNetConfig small_ang() {
  model::AngNetConfig a;
  a.crop_channels = 4;
  a.fc = {16, 8, 8};
  a.n_az = 8;
  a.n_el = 4;
  return a;
}

std::vector<float> copy(std::span<const float> s) { return {s.begin(), s.end()}; }

TrainSchedule small_schedule(int epochs) {
  TrainSchedule s;
  s.batch = 4;
  s.rd_only_epochs = 1;
  s.total_epochs = epochs;
  s.decay_steps = {100};
  s.shifts = {-4, 4, -4, 4};
  s.val_frames = -1;
  return s;
}

}  // namespace

TEST(Schedule, StepDecayAtMilestones) {
  TrainSchedule s;
  s.lr0 = 1.0;
  s.gamma = 0.1;
  s.decay_steps = {2, 5};
  EXPECT_DOUBLE_EQ(s.lr_at(0), 1.0);
  EXPECT_DOUBLE_EQ(s.lr_at(1), 1.0);
  EXPECT_DOUBLE_EQ(s.lr_at(2), 0.1);
  EXPECT_DOUBLE_EQ(s.lr_at(4), 0.1);
  EXPECT_NEAR(s.lr_at(5), 0.01, 1e-15);
  EXPECT_NEAR(s.lr_at(1000), 0.01, 1e-15);
}

TEST(Schedule, ValidateRejectsBadValues) {
  auto s = small_schedule(2);
  s.batch = 0;
  EXPECT_THROW(s.validate(), InvalidArgument);
  s = small_schedule(2);
  s.snr_min_db = 10;  // max still +inf
  EXPECT_THROW(s.validate(), InvalidArgument);
}

TEST(Train, RdOnlyEpochLeavesAngNetUntouched) {
  const auto data = small_set(8, 1);
  const auto sched = small_schedule(1);
  auto st = initial_state(small_rd(), small_ang(), sched, 2);
  const auto before = copy(st.model.angnet.params()[0].value.values());
  const auto rd_before = copy(st.model.rdnet.params()[0].value.values());
  const auto log = train_drd(st, data, nullptr, sched, 3);
  ASSERT_EQ(log.size(), 1u);
  EXPECT_EQ(st.epoch, 1);
  EXPECT_EQ(st.step, 2u);
  EXPECT_EQ(copy(st.model.angnet.params()[0].value.values()), before);
  EXPECT_NE(copy(st.model.rdnet.params()[0].value.values()), rd_before);
}

TEST(Train, SameSeedGivesIdenticalCheckpoint) {
  const auto data = small_set(8, 1);
  const auto sched = small_schedule(2);
  auto a = initial_state(small_rd(), small_ang(), sched, 2);
  auto b = initial_state(small_rd(), small_ang(), sched, 2);
  train_drd(a, data, nullptr, sched, 3);
  train_drd(b, data, nullptr, sched, 3);
  EXPECT_EQ(to_checkpoint(a, "x"), to_checkpoint(b, "x"));
}

TEST(Train, ResumeFromCheckpointMatchesUninterruptedRun) {
  const auto data = small_set(8, 1);
  const auto full = small_schedule(3);
  auto a = initial_state(small_rd(), small_ang(), full, 2);
  const auto log_a = train_drd(a, data, nullptr, full, 3);

  auto half = full;
  half.total_epochs = 2;
  auto b = initial_state(small_rd(), small_ang(), full, 2);
  train_drd(b, data, nullptr, half, 3);
  auto c = from_checkpoint(to_checkpoint(b, "x"), small_rd(), small_ang(), full);
  EXPECT_EQ(c.epoch, 2);
  const auto log_c = train_drd(c, data, nullptr, full, 3);
  ASSERT_EQ(log_c.size(), 1u);
  EXPECT_EQ(log_c[0].l_rd, log_a.back().l_rd);
  EXPECT_EQ(to_checkpoint(a, "x"), to_checkpoint(c, "x"));
}

TEST(Train, CheckpointForOtherArchitectureIsRejected) {
  const auto sched = small_schedule(1);
  const auto st = initial_state(small_rd(), small_ang(), sched, 2);
  auto other = small_rd();
  other.widths = {4, 8};
  EXPECT_THROW(from_checkpoint(to_checkpoint(st, ""), other, small_ang(), sched), IoError);
}

TEST(Train, JointLossesDecrease) {
  const auto data = small_set(16, 4);
  auto sched = small_schedule(12);
  sched.rd_only_epochs = 0;
  auto st = initial_state(small_rd(), small_ang(), sched, 5);
  const auto log = train_drd(st, data, nullptr, sched, 6);
  ASSERT_EQ(log.size(), 12u);
  EXPECT_LT(log.back().l_rd, log.front().l_rd);
  EXPECT_LT(log.back().l_azi + log.back().l_ele, log.front().l_azi + log.front().l_ele);
  for (const auto& r : log) EXPECT_TRUE(std::isfinite(r.l_rd));
}

TEST(Train, LogRowFormat) {
  LogRow r;
  r.epoch = 3;
  r.step = 240;
  r.lr = 0.001;
  r.l_rd = 0.5;
  const auto s = format_log_row(r);
  EXPECT_TRUE(s.starts_with("3,240,0.001,"));
  EXPECT_EQ(std::count(s.begin(), s.end(), ','), 8);
}
