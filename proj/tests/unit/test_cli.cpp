#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <iterator>

#include "../common/tempdir.hpp"

namespace {

int run(const std::string& args, const std::filesystem::path& cwd) {
  const std::string cmd = "cd '" + cwd.string() + "' && '" DRD_CLI_PATH "' " + args + " > out.txt 2> err.txt";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

const char* kTiny =
    "radar.n_samples = 32\nradar.n_chirps = 32\ndataset.n_radars = 10\ndataset.frames_per_radar = 2\n"
    "model.widths = 4,8\nmodel.crop_channels = 8\nmodel.fc = 16,8,8\ntrain.epochs = 1\ntrain.rd_only_epochs = 0\n"
    "train.batch = 4\ntrain.val_frames = -1\nfinetune.epochs = 1\n";

}  // namespace

TEST(Cli, HelpIsSuccessAndUsageErrorsExitOne) {
  TempDir d;
  EXPECT_EQ(run("--help", d.path()), 0);
  EXPECT_EQ(run("", d.path()), 1);
  EXPECT_EQ(run("no-such-command", d.path()), 1);
  EXPECT_EQ(run("eval --method nope", d.path()), 1);
  EXPECT_EQ(run("--threads 0 simulate", d.path()), 1);
}

TEST(Cli, MissingInputsExitOne) {
  TempDir d;
  EXPECT_EQ(run("--config missing.cfg simulate", d.path()), 1);
  EXPECT_EQ(run("infer --checkpoint missing.ckpt frame.drdf", d.path()), 1);
  EXPECT_EQ(run("train --manifest missing/manifest.csv", d.path()), 1);
  std::ofstream(d / "bad.cfg") << "unknown.key = 1\n";
  EXPECT_EQ(run("--config bad.cfg simulate", d.path()), 1);
  EXPECT_NE(slurp(d / "err.txt").find("unknown.key"), std::string::npos);
}

TEST(Cli, SimulateTrainInferRoundTrip) {
  TempDir d;
  std::ofstream(d / "t.cfg") << kTiny;
  ASSERT_EQ(run("--config t.cfg simulate", d.path()), 0);
  EXPECT_TRUE(std::filesystem::exists(d / "data" / "manifest.csv"));
  ASSERT_EQ(run("--config t.cfg --out run train", d.path()), 0);
  EXPECT_TRUE(slurp(d / "run" / "train_log.csv").find("epoch,step,lr,l_rd,l_azi,l_ele,val_rd_acc,val_az_acc,val_el_acc\n") !=
              std::string::npos);
  std::string frame;
  for (const auto& e : std::filesystem::recursive_directory_iterator(d / "data")) {
    if (e.path().extension() == ".drdf") {
      frame = e.path().string();
      break;
    }
  }
  ASSERT_FALSE(frame.empty());
  EXPECT_EQ(run("--config t.cfg infer --checkpoint run/drd.ckpt '" + frame + "'", d.path()), 0);
  EXPECT_TRUE(slurp(d / "out.txt").starts_with("r_bin,d_bin,az_bin,el_bin,class,score\n"));
  // Default config has another architecture than the checkpoint.
  EXPECT_EQ(run("infer --checkpoint run/drd.ckpt '" + frame + "'", d.path()), 1);
}
