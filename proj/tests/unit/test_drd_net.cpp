#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "drd/classic.hpp"
#include "drd/drd_net.hpp"
#include "drd/signal_sim.hpp"

using namespace drd;
using namespace drd::model;

namespace {

RDNetConfig small_rd() {
  RDNetConfig c;
  c.n_antennas = 2;
  c.n_range = 16;
  c.n_doppler = 16;
  c.widths = {4, 8};
  return c;
}

AngNetConfig small_ang() {
  AngNetConfig a;
  a.crop_channels = 8;
  a.fc = {16, 8, 8};
  a.n_az = 6;
  a.n_el = 5;
  return a;
}

RDMap random_map(std::size_t nr, std::size_t nd, std::size_t na, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n;
  ComplexCube c(nr, nd, na);
  for (auto& v : c.values()) v = {n(rng), n(rng)};
  return RDMap(c);
}

}  // namespace

TEST(RDNet, OutputShapes) {
  const auto cfg = small_rd();
  auto g = build_rdnet<float>(cfg);
  EXPECT_EQ(g.shape("logits"), (nn::NodeShape{2, 16, 16}));
  EXPECT_EQ(g.shape("bottleneck"), (nn::NodeShape{512, 4, 4}));
  EXPECT_EQ(g.shape("global"), (nn::NodeShape{512, 1, 1}));
  EXPECT_EQ(g.shape("rd"), (nn::NodeShape{4, 16, 16}));
}

TEST(RDNet, ConfigValidation) {
  auto c = small_rd();
  c.bottleneck = 256;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = small_rd();
  c.n_range = 18;  // not divisible by 4
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = small_rd();
  c.widths.clear();
  EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(AngNet, ContextWidthAndStandaloneWidth) {
  const auto rd = small_rd();
  auto ang = small_ang();
  auto joint = build_angnet<float>(ang, rd);
  EXPECT_EQ(joint.shape("context").c, 8 + 512 + 2);
  EXPECT_EQ(joint.shape("az").c, 6);
  EXPECT_EQ(joint.shape("el").c, 5);
  EXPECT_NO_THROW((void)joint.node("fc1.dropout"));
  ang.use_context = false;
  ang.crop_channels = 256;
  auto sep = build_angnet<float>(ang, rd);
  EXPECT_THROW((void)sep.node("context"), InvalidArgument);
  EXPECT_EQ(sep.param("fc1.weight").value.dim(1), 256);
}

TEST(NetworkInput, PeakModulusIsOne) {
  const auto rd = random_map(8, 8, 3, 1);
  const auto x = network_input(rd);
  EXPECT_EQ(x.shape(), (std::vector<int>{1, 6, 8, 8}));
  double peak = 0;
  for (int a = 0; a < 3; ++a)
    for (int r = 0; r < 8; ++r)
      for (int d = 0; d < 8; ++d) peak = std::max(peak, static_cast<double>(std::hypot(x.at(0, 2 * a, r, d), x.at(0, 2 * a + 1, r, d))));
  EXPECT_NEAR(peak, 1.0, 1e-6);
  const auto z = network_input(RDMap(ComplexCube(8, 8, 3)));
  for (float v : z.values()) EXPECT_EQ(v, 0.0f);
}

TEST(Crop, OriginCentredInsideAndClampedAtEdges) {
  EXPECT_EQ(crop_origin(5, 7, 16, 16), std::make_pair(4, 6));
  EXPECT_EQ(crop_origin(0, 0, 16, 16), std::make_pair(0, 0));
  EXPECT_EQ(crop_origin(15, 15, 16, 16), std::make_pair(13, 13));
  EXPECT_THROW(crop_origin(16, 0, 16, 16), InvalidArgument);
  nn::TensorF planes({2, 3, 6, 6});
  for (std::size_t i = 0; i < planes.size(); ++i) planes[i] = static_cast<float>(i);
  const auto c = crop3x3(planes, 1, 0, 5);
  EXPECT_EQ(c.shape(), (std::vector<int>{3, 3, 3}));
  EXPECT_EQ(c[0], planes.at(1, 0, 0, 3));
  EXPECT_EQ(c[26], planes.at(1, 2, 2, 5));
}

TEST(Targets, SegmentationAndTeacherCrops) {
  const std::vector<GroundTruthLabel> labels{{3, 4, 7, 2, 0, 0.0}, {10, 1, 0, 9, 0, 0.0}};
  const auto t = segmentation_targets(labels, 12, 8);
  EXPECT_EQ(std::count(t.begin(), t.end(), 1), 2);
  EXPECT_EQ(t[3 * 8 + 4], 1);
  EXPECT_EQ(t[10 * 8 + 1], 1);
  const std::vector<GroundTruthLabel> outside{{12, 0, 0, 0, 0, 0.0}};
  EXPECT_THROW(segmentation_targets(outside, 12, 8), InvalidArgument);
  const auto crops = teacher_crops(4, labels);
  ASSERT_EQ(crops.size(), 2u);
  EXPECT_EQ(crops[1].sample, 4);
  EXPECT_EQ(crops[1].r, 10);
  EXPECT_EQ(crops[1].az, 0);
  EXPECT_EQ(crops[1].el, 9);
}

TEST(TotalLoss, RdOnlyLeavesAngNetUntouchedAndGradsAreRefilled) {
  auto m = DrdModel<double>::create(small_rd(), small_ang(), 3);
  Batch<double> b;
  b.input = network_input(random_map(16, 16, 2, 4)).cast<double>();
  const std::vector<GroundTruthLabel> labels{{5, 9, 1, 2, 0, 0.0}};
  b.seg_targets = segmentation_targets(labels, 16, 16);
  b.crops = teacher_crops(0, labels);

  const auto rd_only = total_loss(m, b, 1.0, 1.0, false, true, nn::Mode::kTrain, 1);
  EXPECT_EQ(rd_only.az, 0.0);
  EXPECT_EQ(rd_only.el, 0.0);
  EXPECT_DOUBLE_EQ(rd_only.total, rd_only.rd);
  for (const auto& p : m.angnet.params())
    for (double g : p.grad.values()) EXPECT_EQ(g, 0.0);

  const auto j1 = total_loss(m, b, 0.5, 2.0, true, true, nn::Mode::kTrain, 1);
  const auto g1 = m.rdnet.param("enc0.conv1.weight").grad;
  const auto j2 = total_loss(m, b, 0.5, 2.0, true, true, nn::Mode::kTrain, 1);
  EXPECT_DOUBLE_EQ(j1.total, j2.total);
  EXPECT_NEAR(j1.total, j1.rd + 0.5 * j1.az + 2.0 * j1.el, 1e-12);
  const auto& g2 = m.rdnet.param("enc0.conv1.weight").grad;
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_EQ(g1[i], g2[i]);
  EXPECT_DOUBLE_EQ(j1.rd, rd_only.rd);
}

TEST(Infer, BackgroundBiasGivesNoDetections) {
  auto m = DrdModel<float>::create(small_rd(), small_ang(), 5);
  auto& w = m.rdnet.param("logits.weight").value;
  w.fill(0.0f);
  auto& b = m.rdnet.param("logits.bias").value;
  b[0] = 10.0f;
  b[1] = -10.0f;
  EXPECT_TRUE(infer_rd(m, random_map(16, 16, 2, 1)).empty());
}

TEST(Infer, UniformObjectMapIsThinnedByNmsDeterministically) {
  auto m = DrdModel<float>::create(small_rd(), small_ang(), 5);
  m.rdnet.param("logits.weight").value.fill(0.0f);
  auto& b = m.rdnet.param("logits.bias").value;
  b[0] = -10.0f;
  b[1] = 10.0f;
  const auto rd = random_map(16, 16, 2, 2);
  const auto a = infer_rd(m, rd), c = infer_rd(m, rd);
  EXPECT_EQ(a, c);
  ASSERT_FALSE(a.empty());
  for (const auto& d : a) {
    EXPECT_TRUE(d.az_bin.has_value());
    EXPECT_LT(*d.az_bin, 6u);
    EXPECT_LT(*d.el_bin, 5u);
    EXPECT_GT(d.score, 0.8);
    EXPECT_EQ(d.class_label, kObjectClass);
  }
  // Equal scores everywhere: ties go to the lowest (r, d), so (0, 0) is kept
  // and its neighbours are not.
  EXPECT_EQ(a[0].r_bin, 0u);
  EXPECT_EQ(a[0].d_bin, 0u);
  for (std::size_t i = 1; i < a.size(); ++i) EXPECT_FALSE(a[i].r_bin <= 1 && a[i].d_bin <= 1);
}

TEST(Infer, ThresholdGatesObjectProbabilityAndTiesGoToBackground) {
  auto m = DrdModel<float>::create(small_rd(), small_ang(), 5);
  m.rdnet.param("logits.weight").value.fill(0.0f);
  auto& b = m.rdnet.param("logits.bias").value;
  b.fill(0.0f);  // p = 0.5 for both classes
  InferOptions o;
  o.threshold = 0.1;
  EXPECT_TRUE(infer_rd(m, random_map(16, 16, 2, 3), o).empty());
  b[1] = 0.4f;  // object p = 1 / (1 + e^-0.4) ~= 0.5987
  o.threshold = 0.60;
  EXPECT_TRUE(infer_rd(m, random_map(16, 16, 2, 3), o).empty());
  o.threshold = 0.59;
  EXPECT_FALSE(infer_rd(m, random_map(16, 16, 2, 3), o).empty());
}

TEST(PredictAngles, OnePerLabel) {
  const auto m = DrdModel<float>::create(small_rd(), small_ang(), 5);
  const std::vector<GroundTruthLabel> labels{{3, 4, 1, 1, 0, 0.0}, {0, 15, 2, 2, 0, 0.0}};
  const auto p = predict_angles(m, random_map(16, 16, 2, 9), labels);
  ASSERT_EQ(p.size(), 2u);
  for (const auto& [az, el] : p) {
    EXPECT_GE(az, 0);
    EXPECT_LT(az, 6);
    EXPECT_GE(el, 0);
    EXPECT_LT(el, 5);
  }
}

TEST(Model, CreateIsSeededAndCastPreservesWeights) {
  const auto a = DrdModel<float>::create(small_rd(), small_ang(), 8);
  const auto b = DrdModel<float>::create(small_rd(), small_ang(), 8);
  const auto c = DrdModel<float>::create(small_rd(), small_ang(), 9);
  EXPECT_EQ(a.rdnet.params()[0].value.values()[3], b.rdnet.params()[0].value.values()[3]);
  EXPECT_NE(a.rdnet.params()[0].value.values()[3], c.rdnet.params()[0].value.values()[3]);
  const auto d = a.cast<double>();
  EXPECT_DOUBLE_EQ(d.angnet.params()[1].value[0], static_cast<double>(a.angnet.params()[1].value[0]));
}
