#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "stresslane/evaluation.hpp"
#include "stresslane/traffic.hpp"
#include "stresslane/world.hpp"

namespace stresslane
{

struct RunSettings
{
  std::vector<std::uint64_t> seeds{1};
  double km = 200.0;
  double dt = 0.1;
  double warmup = -1.0;  // seconds before the ego enters; negative picks road length / mean speed + 30 s
  int ego_lane = 2;
  double ego_initial_speed = kmh_to_ms(110.0);

  bool operator==(const RunSettings&) const = default;
};

struct Config
{
  RoadConfig road;
  TrafficDemand traffic;
  IdmParams idm;
  EgoControllerParams ego;
  StmParameters stm;
  CriticalityThresholds evaluation;
  RunSettings run;

  bool operator==(const Config&) const = default;
};

struct ConfigIssue
{
  std::string key;  // dotted path, e.g. "stm.frame.lower_s"
  std::string message;
};

class ConfigError : public std::runtime_error
{
public:
  explicit ConfigError(std::vector<ConfigIssue> issues);
  const std::vector<ConfigIssue>& issues() const { return issues_; }

private:
  std::vector<ConfigIssue> issues_;
};

/// Semantic checks; returns every violation found.
std::vector<ConfigIssue> validate_config(const Config& config);

/// Parses TOML text. Unknown keys, wrong types and failed validation throw
/// ConfigError listing all problems.
Config parse_config(std::string_view toml_text);

/// Reads a file; throws std::ios_base::failure when it cannot be read.
Config load_config(const std::filesystem::path& path);

/// TOML text that parse_config turns back into an equal Config.
std::string serialize_config(const Config& config);

}  // namespace stresslane
