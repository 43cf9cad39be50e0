#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "stresslane/config.hpp"

namespace stresslane
{
namespace
{

const std::filesystem::path kConfigDir = std::filesystem::path(STRESSLANE_SOURCE_DIR) / "configs";

bool has_issue(const ConfigError& e, const std::string& key)
{
  return std::any_of(e.issues().begin(), e.issues().end(), [&](const ConfigIssue& i) { return i.key == key; });
}

ConfigError error_of(const std::string& text)
{
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e;
  }
  ADD_FAILURE() << "expected a ConfigError for:\n" << text;
  return ConfigError({});
}

TEST(Config, DefaultsAreValid) { EXPECT_TRUE(validate_config(Config{}).empty()); }

TEST(Config, EmptyDocumentGivesDefaults) { EXPECT_EQ(parse_config(""), Config{}); }

TEST(Config, ShippedFileLoads)
{
  const Config c = load_config(kConfigDir / "motorway3.toml");
  EXPECT_EQ(c.road.lane_count, 3);
  EXPECT_DOUBLE_EQ(c.road.length, 5000.0);
  EXPECT_EQ(c.stm.n_ct_max, 20);
  EXPECT_DOUBLE_EQ(c.stm.t_lower, 5.0);
  EXPECT_DOUBLE_EQ(c.stm.t_upper, 10.0);
  EXPECT_EQ(c.stm.braking, BrakingModel::driver);
  EXPECT_DOUBLE_EQ(c.stm.lce.t_m, 6.0);
  EXPECT_DOUBLE_EQ(c.stm.lce.a_max, 1.2);
  EXPECT_EQ(c.run.seeds, (std::vector<std::uint64_t>{1, 2, 3}));
  EXPECT_DOUBLE_EQ(c.run.km, 200.0);
}

TEST(Config, DocumentedKeys)
{
  const Config c = parse_config(R"(
[road]
lanes = 2
length_m = 3000.0
[stm]
sit_s = [1.5, 3.0, 4.5]
n_ct_max = 7
[stm.frame]
lower_s = 4.0
upper_s = 8.0
[braking]
model = "acc"
acc_jerk_ms3 = 2.0
[lce]
t_m_s = 5.0
a_max_ms2 = 0.8
[run]
seed = 42
km = 12.5
)");
  EXPECT_EQ(c.road.lane_count, 2);
  EXPECT_DOUBLE_EQ(c.road.length, 3000.0);
  EXPECT_EQ(c.stm.sit, (std::array<double, 3>{1.5, 3.0, 4.5}));
  EXPECT_EQ(c.stm.n_ct_max, 7);
  EXPECT_DOUBLE_EQ(c.stm.t_lower, 4.0);
  EXPECT_DOUBLE_EQ(c.stm.t_upper, 8.0);
  EXPECT_EQ(c.stm.braking, BrakingModel::acc);
  EXPECT_DOUBLE_EQ(c.stm.acc.jerk_limit, 2.0);
  EXPECT_DOUBLE_EQ(c.stm.lce.t_m, 5.0);
  EXPECT_DOUBLE_EQ(c.stm.lce.a_max, 0.8);
  EXPECT_EQ(c.run.seeds, std::vector<std::uint64_t>{42});
  EXPECT_DOUBLE_EQ(c.run.km, 12.5);
}

TEST(Config, SeedListIsAccepted)
{
  EXPECT_EQ(parse_config("[run]\nseed = [4, 5]\n").run.seeds, (std::vector<std::uint64_t>{4, 5}));
  EXPECT_TRUE(has_issue(error_of("[run]\nseed = -1\n"), "run.seed"));
  EXPECT_TRUE(has_issue(error_of("[run]\nseed = [1, 2.5]\n"), "run.seed"));
  EXPECT_TRUE(has_issue(error_of("[run]\nseed = []\n"), "run.seed"));
}

TEST(Config, RoundTrip)
{
  Config c = load_config(kConfigDir / "motorway3.toml");
  c.stm.braking = BrakingModel::acc;
  c.stm.lce.init_times = {10.0, 20.5, 30.0};
  c.run.seeds = {7, 8};
  c.ego.cut_in_detection = 0.4;
  const Config back = parse_config(serialize_config(c));
  EXPECT_EQ(back, c);
  EXPECT_EQ(serialize_config(back), serialize_config(c));
}

TEST(Config, UnknownKeysAreReported)
{
  const ConfigError e = error_of("[road]\nlanes = 3\nlane_count = 3\n[extra]\nx = 1\n");
  EXPECT_TRUE(has_issue(e, "road.lane_count"));
  EXPECT_TRUE(has_issue(e, "extra"));
  EXPECT_EQ(e.issues().size(), 2u);
}

TEST(Config, WrongTypesAreReported)
{
  const ConfigError e = error_of("[road]\nlanes = 2.5\nlength_m = \"far\"\n[stm]\nsit_s = [1, \"a\", 3]\n");
  EXPECT_TRUE(has_issue(e, "road.lanes"));
  EXPECT_TRUE(has_issue(e, "road.length_m"));
  EXPECT_TRUE(has_issue(e, "stm.sit_s"));
}

TEST(Config, SemanticChecks)
{
  EXPECT_TRUE(has_issue(error_of("[road]\nlanes = 4\n"), "road.lanes"));
  EXPECT_TRUE(has_issue(error_of("[run]\nkm = 0\n"), "run.km"));
  EXPECT_TRUE(has_issue(error_of("[stm]\nsit_s = [2.0, 4.0]\n"), "stm.sit_s"));
  EXPECT_TRUE(has_issue(error_of("[stm]\nsit_s = [2.0, 6.0, 4.0]\n"), "stm.sit_s"));
  EXPECT_TRUE(has_issue(error_of("[stm.frame]\nlower_s = 0\n"), "stm.frame.lower_s"));
  EXPECT_TRUE(has_issue(error_of("[braking]\nmodel = \"hard\"\n"), "braking.model"));
  EXPECT_TRUE(has_issue(error_of("[braking]\na_peak_ms2 = 1.0\n"), "braking.a_peak_ms2"));
  EXPECT_TRUE(has_issue(error_of("[lce]\nt_m_s = -1\n"), "lce.t_m_s"));
  EXPECT_TRUE(has_issue(error_of("[run]\ndt_s = 1.0\n"), "run.dt_s"));
  EXPECT_TRUE(has_issue(error_of("[road]\nlanes = 2\n[run]\nego_lane = 3\n"), "run.ego_lane"));
}

TEST(Config, SyntaxErrorNamesTheLine)
{
  const ConfigError e = error_of("[road]\nlanes = = 3\n");
  ASSERT_EQ(e.issues().size(), 1u);
  EXPECT_EQ(e.issues()[0].key, "line 2");
}

TEST(Config, MissingFileIsAnIoError)
{
  EXPECT_THROW(load_config(kConfigDir / "does_not_exist.toml"), std::ios_base::failure);
}

}  // namespace
}  // namespace stresslane
