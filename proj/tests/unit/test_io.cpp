#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>

#include "../common/tempdir.hpp"
#include "drd/io.hpp"

using namespace drd;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

void spit(const std::filesystem::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary);
  f << s;
}

std::string le32(std::uint32_t v) {
  std::string s(4, '\0');
  for (int i = 0; i < 4; ++i) s[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xFF);
  return s;
}

std::string lef(float f) { return le32(std::bit_cast<std::uint32_t>(f)); }

RadarParams tiny_params() {
  auto p = RadarParams::desk_default();
  p.n_samples = 1;
  p.n_chirps = 2;
  p.n_antennas = 2;
  p.geometry = uniform_rect_array(2, 1);
  return p;
}

}  // namespace

TEST(FrameFile, ExactByteLayout) {
  TempDir dir;
  const auto p = tiny_params();
  ComplexCube c(1, 2, 2);
  c(0, 0, 0) = {1.0f, -2.0f};
  c(0, 0, 1) = {0.5f, 0.25f};
  c(0, 1, 0) = {3.0f, 4.0f};
  c(0, 1, 1) = {-1.5f, 8.0f};
  io::write_frame(dir / "f.drdf", RawFrame(p, c));
  const std::string want = "DRDF" + le32(1) + le32(1) + le32(2) + le32(2) + lef(1) + lef(-2) + lef(0.5f) + lef(0.25f) +
                           lef(3) + lef(4) + lef(-1.5f) + lef(8);
  EXPECT_EQ(slurp(dir / "f.drdf"), want);
}

TEST(FrameFile, RoundTripIsBitExact) {
  TempDir dir;
  const auto p = RadarParams::desk_default();
  std::mt19937_64 rng(1);
  std::normal_distribution<float> n;
  ComplexCube c(64, 64, 8);
  for (auto& v : c.values()) v = {n(rng), n(rng)};
  const RawFrame f(p, c);
  io::write_frame(dir / "a.drdf", f);
  const auto g = io::read_frame(dir / "a.drdf", p);
  EXPECT_EQ(g, f);
  io::write_frame(dir / "b.drdf", g);
  EXPECT_EQ(slurp(dir / "a.drdf"), slurp(dir / "b.drdf"));
}

TEST(FrameFile, CorruptFilesRejected) {
  TempDir dir;
  const auto p = tiny_params();
  io::write_frame(dir / "ok.drdf", RawFrame(p, ComplexCube(1, 2, 2)));
  const auto good = slurp(dir / "ok.drdf");
  spit(dir / "magic.drdf", "XRDF" + good.substr(4));
  spit(dir / "short.drdf", good.substr(0, good.size() - 3));
  spit(dir / "long.drdf", good + "x");
  spit(dir / "ver.drdf", "DRDF" + le32(9) + good.substr(8));
  for (const char* name : {"magic.drdf", "short.drdf", "long.drdf", "ver.drdf", "missing.drdf"}) {
    EXPECT_THROW(io::read_frame(dir / name, p), IoError) << name;
  }
  // Antenna count must agree with the geometry of the base params.
  EXPECT_THROW(io::read_frame(dir / "ok.drdf", RadarParams::desk_default()), IoError);
}

TEST(Labels, TextFormatAndRoundTrip) {
  TempDir dir;
  const std::vector<GroundTruthLabel> l{{10, 32, 5, 3, 7, 12.5}, {1, 2, 3, 4, 0, sim::kNoNoise}};
  io::write_labels(dir / "l.txt", l);
  EXPECT_EQ(slurp(dir / "l.txt"), "10,32,5,3,7,12.5\n1,2,3,4,0,inf\n");
  EXPECT_EQ(io::read_labels(dir / "l.txt"), l);
  spit(dir / "bad.txt", "1,2,3\n");
  EXPECT_THROW(io::read_labels(dir / "bad.txt"), IoError);
}

TEST(Manifest, RoundTripWithCommentsAndRoot) {
  TempDir dir;
  sim::DatasetManifest m;
  m.entries = {{"frames/a.drdf", sim::Split::kTrain, 0, "labels/a.txt"}, {"frames/b.drdf", sim::Split::kTest, 3, "labels/b.txt"}};
  io::write_manifest(dir / "manifest.csv", m, "seed = 1\nx = 2");
  const auto text = slurp(dir / "manifest.csv");
  EXPECT_TRUE(text.starts_with("# seed = 1\n# x = 2\n"));
  EXPECT_NE(text.find("frames/b.drdf,test,3,labels/b.txt\n"), std::string::npos);
  const auto r = io::read_manifest(dir / "manifest.csv");
  ASSERT_EQ(r.entries.size(), 2u);
  EXPECT_EQ(r.entries[1].frame_path, "frames/b.drdf");
  EXPECT_EQ(r.entries[1].split, sim::Split::kTest);
  EXPECT_EQ(r.entries[1].radar_id, 3u);
  EXPECT_EQ(r.root, dir.path());
  EXPECT_EQ(r.of_split(sim::Split::kTrain).size(), 1u);
  EXPECT_EQ(r.radars_of_split(sim::Split::kTest), std::vector<std::uint32_t>{3});
}

TEST(Perturbations, RoundTripExact) {
  TempDir dir;
  const std::vector<sim::ChannelPerturbation> p{sim::ChannelPerturbation::random(0, 8, 1),
                                                sim::ChannelPerturbation::random(1, 8, 2)};
  io::write_perturbations(dir / "p.csv", p);
  const auto q = io::read_perturbations(dir / "p.csv");
  ASSERT_EQ(q.size(), 2u);
  EXPECT_EQ(q[1].gain_db, p[1].gain_db);
  EXPECT_EQ(q[1].phase_deg, p[1].phase_deg);
}

TEST(Checkpoint, ExactByteLayoutOfSmallFile) {
  TempDir dir;
  io::CheckpointFile c;
  c.tensors.push_back({"w", nn::TensorF({2}, std::vector<float>{1.0f, 2.0f})});
  c.config_echo = "k = v\n";
  io::write_checkpoint(dir / "c.ckpt", c);
  const std::string want = "DRDC" + le32(1) + le32(1) + le32(1) + "w" + le32(1) + le32(2) + lef(1) + lef(2) + le32(0) +
                           le32(6) + "k = v\n";
  EXPECT_EQ(slurp(dir / "c.ckpt"), want);
}

TEST(Checkpoint, RoundTripAndCorruption) {
  TempDir dir;
  io::CheckpointFile c;
  std::mt19937_64 rng(2);
  std::normal_distribution<float> n;
  nn::TensorF a({3, 2, 3, 3});
  for (auto& v : a.values()) v = n(rng);
  c.tensors = {{"rdnet/conv.weight", a}, {"state/epoch", nn::TensorF({1}, 4.0f)}};
  c.optimizer = {{"rdnet/m/conv.weight", a}};
  c.config_echo = "seed = 3\n";
  io::write_checkpoint(dir / "c.ckpt", c);
  EXPECT_EQ(io::read_checkpoint(dir / "c.ckpt"), c);
  const auto bytes = slurp(dir / "c.ckpt");
  spit(dir / "t.ckpt", bytes.substr(0, bytes.size() - 1));
  spit(dir / "x.ckpt", bytes + "z");
  spit(dir / "m.ckpt", "DRDX" + bytes.substr(4));
  for (const char* name : {"t.ckpt", "x.ckpt", "m.ckpt", "nope.ckpt"}) EXPECT_THROW(io::read_checkpoint(dir / name), IoError) << name;
}

TEST(Format, DoubleRoundTripProperty) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 20) - 10);
    EXPECT_EQ(std::stod(io::format_double(v)), v);
  }
  EXPECT_EQ(io::format_double(sim::kNoNoise), "inf");
  EXPECT_EQ(io::format_metric(97.5), "97.500000");
  EXPECT_EQ(io::format_metric(std::nan("")), "nan");
  EXPECT_EQ(io::comment_block("a\nb\n"), "# a\n# b\n");
}
