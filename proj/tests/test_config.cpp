#include <gtest/gtest.h>

#include <cstdlib>

#include "eph/config.hpp"
#include "eph/error.hpp"
#include "eph_test_support.hpp"

using namespace eph;

namespace {

// Sets an environment variable for the lifetime of the object.
class ScopedEnv {
 public:
  ScopedEnv(std::string name, const std::string& value) : name_(std::move(name)) {
    ::setenv(name_.c_str(), value.c_str(), 1);
  }
  ~ScopedEnv() { ::unsetenv(name_.c_str()); }

 private:
  std::string name_;
};

}  // namespace

TEST(Config, DefaultsDescribeTheReferenceExperiment) {
  const ExperimentConfig c;
  EXPECT_EQ(c.env.world_size, 16);
  EXPECT_EQ(c.env.field_size, 8);
  EXPECT_EQ(c.env.trials, 6);
  EXPECT_EQ(c.env.step_cap, 120);
  EXPECT_EQ(c.env.object_count, 100);
  EXPECT_EQ(c.env.train_objects, 80);
  EXPECT_EQ(c.model.hidden, 256);
  EXPECT_EQ(c.train.episodes_train, 25000);
  EXPECT_EQ(c.train.episodes_test, 1000);
  EXPECT_EQ(c.train.filter_episodes, 100);
  EXPECT_EQ(c.analysis.r_star_window, 1000);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, TextRoundTripIsExact) {
  ExperimentConfig c = eph::testing::tiny_config();
  c.train.lr = 0.1 + 0.2;  // not representable in short decimal
  c.train.seed = 18446744073709551615ull;
  c.env.shuffle_sides = false;
  const ExperimentConfig back = ExperimentConfig::parse(c.to_text());
  EXPECT_EQ(back, c);
  EXPECT_EQ(back.to_text(), c.to_text());
}

TEST(Config, FileRoundTrip) {
  eph::testing::TempDir dir;
  ExperimentConfig c;
  c.model.hidden = 64;
  c.save(dir / "c.cfg");
  EXPECT_EQ(ExperimentConfig::load(dir / "c.cfg"), c);
  EXPECT_THROW(ExperimentConfig::load(dir / "missing.cfg"), IoError);
}

TEST(Config, ParseSkipsCommentsAndBlanks) {
  const auto c = ExperimentConfig::parse(
      "# header\n\n  train.gamma = 0.5   # inline\r\nmodel.hidden=32\nenv.one_hot_objects = yes\n");
  EXPECT_EQ(c.train.gamma, 0.5);
  EXPECT_EQ(c.model.hidden, 32);
  EXPECT_TRUE(c.env.one_hot_objects);
  EXPECT_EQ(c.train.lr, ExperimentConfig{}.train.lr);
}

TEST(Config, RejectsMalformedInput) {
  EXPECT_THROW(ExperimentConfig::parse("train.gamma 0.5\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("train.gama = 0.5\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("model.hidden = 3.5\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("model.hidden = \n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("train.lr = fast\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("env.shuffle_sides = maybe\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("train.seed = -1\n"), ConfigError);
}

TEST(Config, ValidateRejectsOutOfRangeValues) {
  auto broken = [](auto edit) {
    ExperimentConfig c;
    edit(c);
    return c;
  };
  const std::vector<ExperimentConfig> bad{
      broken([](auto& c) { c.train.gamma = 0.0; }),
      broken([](auto& c) { c.train.gamma = 1.5; }),
      broken([](auto& c) { c.train.lr = std::nan(""); }),
      broken([](auto& c) { c.train.lr = -1e-3; }),
      broken([](auto& c) { c.train.value_coef = INFINITY; }),
      broken([](auto& c) { c.train.entropy_coef_end = std::nan(""); }),
      broken([](auto& c) { c.train.grad_clip_norm = 0.0; }),
      broken([](auto& c) { c.train.rmsprop_alpha = 1.0; }),
      broken([](auto& c) { c.env.train_objects = 99; }),
      broken([](auto& c) { c.env.object_count = 3; }),
      broken([](auto& c) { c.env.step_cap = 0; }),
      broken([](auto& c) { c.model.hidden = 0; }),
      broken([](auto& c) { c.analysis.sparse_threshold = 1.5; }),
      broken([](auto& c) { c.train.episodes_train = 0; }),
  };
  for (std::size_t k = 0; k < bad.size(); ++k) EXPECT_THROW(bad[k].validate(), ConfigError) << k;
}

TEST(Config, EnvironmentVariableNames) {
  EXPECT_EQ(env_variable_for("train.gamma"), "EPH_TRAIN_GAMMA");
  EXPECT_EQ(env_variable_for("analysis.r_star_window"), "EPH_ANALYSIS_R_STAR_WINDOW");
}

TEST(Config, EnvironmentOverridesApply) {
  ScopedEnv a("EPH_TRAIN_GAMMA", "0.75");
  ScopedEnv b("EPH_MODEL_HIDDEN", "48");
  ExperimentConfig c;
  c.apply_environment();
  EXPECT_EQ(c.train.gamma, 0.75);
  EXPECT_EQ(c.model.hidden, 48);
  EXPECT_EQ(c.train.lr, ExperimentConfig{}.train.lr);
}

TEST(Config, BadEnvironmentOverrideIsAnError) {
  ScopedEnv a("EPH_TRAIN_EPISODES_TRAIN", "many");
  ExperimentConfig c;
  EXPECT_THROW(c.apply_environment(), ConfigError);
}

TEST(Config, EveryKeyIsSettableAndListed) {
  const auto keys = ExperimentConfig::keys();
  const auto map = ExperimentConfig{}.to_map();
  EXPECT_EQ(keys.size(), map.size());
  ExperimentConfig c;
  for (const auto& k : keys) EXPECT_NO_THROW(c.set(k, map.at(k))) << k;
  EXPECT_EQ(c, ExperimentConfig{});
}

TEST(Config, ShippedFilesLoad) {
  const std::filesystem::path dir = EPH_CONFIG_DIR;
  ExperimentConfig full = ExperimentConfig::load(dir / "default.cfg");
  EXPECT_EQ(full, ExperimentConfig{});

  const ExperimentConfig reduced = ExperimentConfig::load(dir / "reduced.cfg");
  EXPECT_EQ(reduced.model.hidden, 64);
  EXPECT_EQ(reduced.model.encoder_out, 32);
  EXPECT_EQ(reduced.env.object_count, 20);
  EXPECT_EQ(reduced.env.object_code_dim, 16);
  EXPECT_EQ(reduced.train.lr, 4e-3);
  EXPECT_EQ(reduced.train.gamma, ExperimentConfig{}.train.gamma);
  EXPECT_NO_THROW(reduced.validate());
}
