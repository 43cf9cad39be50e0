#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "stresslane/config.hpp"
#include "stresslane/evaluation.hpp"
#include "stresslane/stm.hpp"

namespace stresslane
{

enum class StmMode { on, off, both };

/// Command-line level request; unset fields fall back to the config file.
struct RunSpec
{
  std::filesystem::path config_path;
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<double> km;
  std::optional<double> dt;
  StmMode stm = StmMode::both;
  std::filesystem::path out_dir = "out";
  int threads = 0;  // 0 = hardware concurrency
};

/// A broken engine invariant detected while running (exit code 3).
class InvariantBreach : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

struct SimulationOptions
{
  bool keep_records = false;  // keep sealed ScenarioRecords in the result
};

struct SimulationResult
{
  RunSummary summary;
  std::string scenarios_jsonl;  // one ScenarioRecord per line
  std::vector<std::string> events;
  std::vector<ScenarioRecord> records;  // only with keep_records
  std::vector<TriggerLogEntry> triggers;
  std::map<int, int> mask_counts;
};

/// One seeded run over cfg.run.km of ego driving, with or without the STM.
SimulationResult simulate(const Config& cfg, std::uint64_t seed, bool stm_on, const SimulationOptions& options = {});

nlohmann::ordered_json scenario_to_json(const ScenarioRecord& record, CriticalityLabel label);
std::string scenario_to_json_line(const ScenarioRecord& record, CriticalityLabel label);

/// Structural check of one scenarios.jsonl object; returns the problems found.
std::vector<std::string> validate_scenario_json(const nlohmann::ordered_json& j);

/// Apply RunSpec overrides to a loaded config and re-validate.
Config resolve_config(const Config& base, const RunSpec& spec);

/// Runs every (seed, mode) pair and writes the artifacts under spec.out_dir.
/// Returns the process exit code (0 ok, 1 config, 2 I/O, 3 invariant breach).
int run(const RunSpec& spec);

enum class TraceKind { driver_brake, acc_brake, lane_change };

struct TraceRequest
{
  TraceKind kind = TraceKind::driver_brake;
  double v0_kmh = 71.03;
  double v_final_kmh = 28.67;
  double dt = 0.01;
};

/// Reference speeds for each trace kind.
TraceRequest default_trace(TraceKind kind);
std::optional<TraceKind> parse_trace_kind(std::string_view name);

/// Writes one two-column "t value" file per plotted quantity and returns
/// their paths.
std::vector<std::filesystem::path> emit_trace(const TraceRequest& request, const Config& cfg,
                                              const std::filesystem::path& out_dir);

}  // namespace stresslane
