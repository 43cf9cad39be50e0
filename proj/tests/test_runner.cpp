#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "stresslane/runner.hpp"

namespace stresslane
{
namespace
{

namespace fs = std::filesystem;

const fs::path kConfig = fs::path(STRESSLANE_SOURCE_DIR) / "configs" / "motorway3.toml";

fs::path scratch_dir(const std::string& name)
{
  const fs::path dir = fs::temp_directory_path() / ("stresslane_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& path)
{
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Config short_config(double km)
{
  Config cfg = load_config(kConfig);
  cfg.run.km = km;
  return cfg;
}

TEST(Simulate, SameSeedGivesIdenticalOutput)
{
  const Config cfg = short_config(3.0);
  const SimulationResult a = simulate(cfg, 11, true);
  const SimulationResult b = simulate(cfg, 11, true);
  EXPECT_EQ(a.scenarios_jsonl, b.scenarios_jsonl);
  EXPECT_EQ(a.events, b.events);
  EXPECT_EQ(summary_csv_row(a.summary), summary_csv_row(b.summary));
  EXPECT_GE(a.summary.km, 3.0);
  EXPECT_EQ(a.summary.seed, 11u);
  EXPECT_TRUE(a.summary.stm_on);
}

TEST(Simulate, RecordsMatchTheSchema)
{
  const Config cfg = short_config(5.0);
  SimulationOptions opts;
  opts.keep_records = true;
  const SimulationResult r = simulate(cfg, 2, true, opts);
  ASSERT_FALSE(r.records.empty());
  std::istringstream lines(r.scenarios_jsonl);
  std::string line;
  std::size_t count = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::ordered_json::parse(line);
    const auto problems = validate_scenario_json(j);
    EXPECT_TRUE(problems.empty()) << problems.front();
    ++count;
  }
  EXPECT_EQ(count, r.records.size());
  EXPECT_EQ(r.triggers.size(), r.records.size());
}

TEST(Simulate, StmOffInjectsNothing)
{
  const SimulationResult r = simulate(short_config(3.0), 4, false);
  EXPECT_TRUE(r.scenarios_jsonl.empty());
  EXPECT_TRUE(r.triggers.empty());
  EXPECT_FALSE(r.summary.stm_on);
}

TEST(ScenarioJson, MissingKeysAreReported)
{
  ScenarioRecord rec;
  rec.triggered = {4};
  rec.lane_count = 3;
  rec.frame.push_back(FrameSample{});
  rec.frame.back().cells = LaneGrid<std::optional<CellSample>>(3, std::nullopt);
  auto j = scenario_to_json(rec, CriticalityLabel::not_critical);
  EXPECT_TRUE(validate_scenario_json(j).empty());
  j.erase("criticality");
  j["frame"][0].erase("ego");
  const auto problems = validate_scenario_json(j);
  ASSERT_EQ(problems.size(), 2u);
  EXPECT_EQ(problems[0].rfind("criticality", 0), 0u);
  EXPECT_EQ(problems[1].rfind("ego", 0), 0u);
}

TEST(ResolveConfig, OverridesAndRevalidates)
{
  RunSpec spec;
  spec.seeds = std::vector<std::uint64_t>{9};
  spec.km = 12.0;
  spec.dt = 0.05;
  const Config cfg = resolve_config(load_config(kConfig), spec);
  EXPECT_EQ(cfg.run.seeds, std::vector<std::uint64_t>{9});
  EXPECT_DOUBLE_EQ(cfg.run.km, 12.0);
  EXPECT_DOUBLE_EQ(cfg.run.dt, 0.05);
  spec.km = -1.0;
  EXPECT_THROW(resolve_config(Config{}, spec), ConfigError);
}

TEST(Run, ExitCodes)
{
  RunSpec spec;
  spec.config_path = kConfig;
  spec.out_dir = scratch_dir("codes");
  spec.km = 0.0;
  EXPECT_EQ(run(spec), 1);
  spec.km.reset();
  spec.config_path = fs::path(STRESSLANE_SOURCE_DIR) / "configs" / "missing.toml";
  EXPECT_EQ(run(spec), 1);

  const fs::path blocker = scratch_dir("blocker");
  std::ofstream(blocker) << "x";
  spec.config_path = kConfig;
  spec.km = 0.5;
  spec.out_dir = blocker / "out";
  EXPECT_EQ(run(spec), 2);
  fs::remove(blocker);
}

TEST(Run, WritesArtifacts)
{
  RunSpec spec;
  spec.config_path = kConfig;
  spec.out_dir = scratch_dir("artifacts");
  spec.seeds = std::vector<std::uint64_t>{3};
  spec.km = 1.0;
  ASSERT_EQ(run(spec), 0);
  for (const char* rel : {"summary.csv", "comparison.txt", "seed_3/stm_on/scenarios.jsonl",
                          "seed_3/stm_off/scenarios.jsonl", "seed_3/stm_on/events.log"}) {
    EXPECT_TRUE(fs::exists(spec.out_dir / rel)) << rel;
  }
  const std::string csv = slurp(spec.out_dir / "summary.csv");
  EXPECT_EQ(csv.rfind(summary_csv_header() + "\n3,", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  fs::remove_all(spec.out_dir);
}

TEST(Cli, ZeroDistanceIsAConfigError)
{
  const std::string cmd = std::string(STRESSLANE_CLI) + " --config " + kConfig.string() + " --km 0 --out " +
                          scratch_dir("cli").string() + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 1);
}

TEST(Trace, WritesOneFilePerQuantity)
{
  const fs::path dir = scratch_dir("trace");
  const Config cfg = load_config(kConfig);
  const auto files = emit_trace(default_trace(TraceKind::lane_change), cfg, dir);
  ASSERT_EQ(files.size(), 3u);
  std::istringstream lateral(slurp(dir / "lane_change_lateral_m.dat"));
  std::string header;
  std::getline(lateral, header);
  EXPECT_EQ(header, "# t lateral_m");
  double t = 0.0;
  double y = 0.0;
  double last_t = 0.0;
  double last_y = 0.0;
  std::size_t rows = 0;
  while (lateral >> t >> y) {
    last_t = t;
    last_y = y;
    ++rows;
  }
  EXPECT_NEAR(last_t, cfg.stm.lce.t_m, 1e-9);
  EXPECT_NEAR(std::abs(last_y), cfg.stm.lce.h, 1e-6);
  EXPECT_GT(rows, 100u);
  EXPECT_EQ(emit_trace(default_trace(TraceKind::driver_brake), cfg, dir).size(), 2u);
  EXPECT_EQ(parse_trace_kind("acc_brake"), TraceKind::acc_brake);
  EXPECT_FALSE(parse_trace_kind("swerve"));
  fs::remove_all(dir);
}

}  // namespace
}  // namespace stresslane
