#include <gtest/gtest.h>

#include <cmath>

#include "drd/config.hpp"

using namespace drd;
using drd::config::RunConfig;

TEST(Config, DefaultsEchoParsesBackIdentically) {
  const RunConfig a = config::parse("");
  const auto echo = a.echo();
  EXPECT_EQ(config::parse(echo).echo(), echo);
  EXPECT_NE(echo.find("seed = 1\n"), std::string::npos);
  EXPECT_NE(echo.find("cfar2.window = 10\n"), std::string::npos);
}

TEST(Config, EveryKeyAppearsOnceInEcho) {
  const auto echo = config::parse("").echo();
  for (const auto& k : RunConfig::keys()) {
    const auto needle = k + " = ";
    const auto first = echo.find(needle);
    ASSERT_NE(first, std::string::npos) << k;
    EXPECT_TRUE(first == 0 || echo[first - 1] == '\n') << k;
  }
}

TEST(Config, OverridesCommentsAndWhitespace) {
  const auto c = config::parse("# header\n  seed = 42   # trailing\n\nmodel.widths = 8,16\nsweep.snrs = 40, 0,20\n");
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.rdnet.widths, (std::vector<int>{8, 16}));
  EXPECT_EQ(c.sweep_snrs, (std::vector<double>{40, 0, 20}));
}

TEST(Config, EchoRoundTripsNonDefaultValues) {
  const auto c = config::parse("seed = 9\ntrain.lr = 0.0003\ndataset.snr_min_db = 20\ndataset.snr_max_db = 40\n");
  const auto d = config::parse(c.echo());
  EXPECT_EQ(d.echo(), c.echo());
  EXPECT_EQ(d.schedule.lr0, 0.0003);
}

TEST(Config, FinetuneDecayStepsInheritOrOverride) {
  const auto inherit = config::parse("train.decay_steps = 10,20\n");
  EXPECT_EQ(inherit.finetune_schedule().decay_steps, (std::vector<std::uint64_t>{10, 20}));
  const auto own = config::parse("train.decay_steps = 10,20\nfinetune.decay_steps = 3\n");
  EXPECT_EQ(own.finetune_schedule().decay_steps, (std::vector<std::uint64_t>{3}));
  EXPECT_EQ(own.schedule.decay_steps, (std::vector<std::uint64_t>{10, 20}));
  const auto none = config::parse("finetune.decay_steps =\n");
  EXPECT_TRUE(none.finetune_schedule().decay_steps.empty());
  for (const auto* c : {&inherit, &own, &none}) EXPECT_EQ(config::parse(c->echo()).echo(), c->echo());
  EXPECT_THROW(config::parse("finetune.decay_steps = 5,2\n"), InvalidArgument);
}

TEST(Config, RejectsUnknownKeysAndMalformedValues) {
  EXPECT_THROW(config::parse("no.such.key = 1\n"), InvalidArgument);
  EXPECT_THROW(config::parse("seed = abc\n"), InvalidArgument);
  EXPECT_THROW(config::parse("seed 1\n"), InvalidArgument);
  EXPECT_THROW(config::parse("train.batch = 2.5\n"), InvalidArgument);
  EXPECT_THROW(config::parse("infer.threshold = 1\n"), InvalidArgument);
  EXPECT_THROW(config::parse("sweep.trials = 0\n"), InvalidArgument);
}

TEST(Config, MissingFileIsIoError) {
  EXPECT_THROW(config::load("/nonexistent/dir/x.cfg"), IoError);
}

TEST(Config, ArchitectureMismatchesListOnlyArchitectureKeys) {
  const auto a = config::parse("");
  const auto b = config::parse("model.widths = 8,16,32,64\ntrain.lr = 0.5\nseed = 3\n");
  const auto m = config::architecture_mismatches(a, b);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_TRUE(m[0].starts_with("model.widths"));
  EXPECT_TRUE(config::architecture_mismatches(a, a).empty());
}
