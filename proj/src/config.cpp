#include "stresslane/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

namespace stresslane
{

namespace
{

std::string join_issues(const std::vector<ConfigIssue>& issues)
{
  std::string out = "invalid configuration:";
  for (const ConfigIssue& i : issues) {
    out += "\n  " + i.key + ": " + i.message;
  }
  return out;
}

// Pulls typed values out of a parsed document and remembers which keys were
// read, so leftovers can be reported as unknown.
class Reader
{
public:
  Reader(const toml::table& root, std::vector<ConfigIssue>& issues) : root_(root), issues_(issues) {}

  void number(const std::string& path, double& out)
  {
    if (const toml::node* n = find(path)) {
      if (auto v = n->value<double>(); v && (n->is_floating_point() || n->is_integer())) {
        out = *v;
      } else {
        issues_.push_back({path, "expected a number"});
      }
    }
  }

  void integer(const std::string& path, int& out)
  {
    if (const toml::node* n = find(path)) {
      if (auto v = n->value<std::int64_t>(); v && n->is_integer()) {
        out = static_cast<int>(*v);
      } else {
        issues_.push_back({path, "expected an integer"});
      }
    }
  }

  void boolean(const std::string& path, bool& out)
  {
    if (const toml::node* n = find(path)) {
      if (auto v = n->value<bool>()) {
        out = *v;
      } else {
        issues_.push_back({path, "expected true or false"});
      }
    }
  }

  void string(const std::string& path, std::string& out)
  {
    if (const toml::node* n = find(path)) {
      if (auto v = n->value<std::string>()) {
        out = *v;
      } else {
        issues_.push_back({path, "expected a string"});
      }
    }
  }

  void numbers(const std::string& path, std::vector<double>& out)
  {
    const toml::node* n = find(path);
    if (!n) {
      return;
    }
    const toml::array* arr = n->as_array();
    std::vector<double> values;
    bool ok = arr != nullptr;
    if (arr) {
      for (const toml::node& e : *arr) {
        auto v = e.value<double>();
        ok = ok && v.has_value();
        values.push_back(v.value_or(0.0));
      }
    }
    if (ok) {
      out = std::move(values);
    } else {
      issues_.push_back({path, "expected an array of numbers"});
    }
  }

  void seeds(const std::string& path, std::vector<std::uint64_t>& out)
  {
    const toml::node* n = find(path);
    if (!n) {
      return;
    }
    if (auto single = n->value<std::int64_t>(); single && n->is_integer()) {
      if (*single >= 0) {
        out = {static_cast<std::uint64_t>(*single)};
      } else {
        issues_.push_back({path, "expected a non-negative integer or an array of them"});
      }
      return;
    }
    const toml::array* arr = n->as_array();
    std::vector<std::uint64_t> values;
    bool ok = arr != nullptr;
    if (arr) {
      for (const toml::node& e : *arr) {
        auto v = e.value<std::int64_t>();
        ok = ok && e.is_integer() && v && *v >= 0;
        values.push_back(static_cast<std::uint64_t>(v.value_or(0)));
      }
    }
    if (ok) {
      out = std::move(values);
    } else {
      issues_.push_back({path, "expected a non-negative integer or an array of them"});
    }
  }

  void section(const std::string& path) { known_.insert(path); }

  void report_unknown() { walk(root_, ""); }

private:
  const toml::node* find(const std::string& path)
  {
    known_.insert(path);
    return root_.at_path(path).node();
  }

  void walk(const toml::table& t, const std::string& prefix)
  {
    for (const auto& [key, node] : t) {
      const std::string path = prefix.empty() ? std::string(key.str()) : prefix + "." + std::string(key.str());
      if (!known_.contains(path)) {
        issues_.push_back({path, "unknown key"});
        continue;
      }
      if (const toml::table* sub = node.as_table()) {
        walk(*sub, path);
      }
    }
  }

  const toml::table& root_;
  std::vector<ConfigIssue>& issues_;
  std::set<std::string> known_;
};

void read_config(Reader& r, Config& c)
{
  r.section("road");
  r.integer("road.lanes", c.road.lane_count);
  r.number("road.lane_width_m", c.road.lane_width);
  r.number("road.length_m", c.road.length);
  r.number("road.speed_limit_ms", c.road.speed_limit);

  r.section("traffic");
  r.number("traffic.inflow_veh_h_per_lane", c.traffic.inflow_per_lane);
  r.number("traffic.desired_speed_mean_ms", c.traffic.desired_speed_mean);
  r.number("traffic.desired_speed_sd_ms", c.traffic.desired_speed_sd);

  r.section("idm");
  r.number("idm.a_max", c.idm.a_max);
  r.number("idm.b_comf", c.idm.b_comf);
  r.number("idm.time_headway_s", c.idm.time_headway);
  r.number("idm.jam_distance_m", c.idm.jam_distance);
  r.number("idm.delta", c.idm.delta);
  r.number("idm.max_decel", c.idm.max_decel);
  r.number("idm.lc_duration_s", c.idm.lc_duration);
  r.number("idm.lc_safe_decel", c.idm.lc_safe_decel);
  r.number("idm.lc_threshold", c.idm.lc_threshold);
  r.number("idm.lc_right_bias", c.idm.lc_right_bias);
  r.number("idm.lc_cooldown_s", c.idm.lc_cooldown);

  r.section("ego");
  r.number("ego.time_gap_s", c.ego.time_gap);
  r.number("ego.acc_max_decel", c.ego.acc_max_decel);
  r.number("ego.acc_max_accel", c.ego.acc_max_accel);
  r.number("ego.emergency_decel", c.ego.emergency_decel);
  r.number("ego.set_speed_ms", c.ego.set_speed);
  r.number("ego.standstill_gap_m", c.ego.standstill_gap);
  r.number("ego.gap_gain", c.ego.gap_gain);
  r.number("ego.speed_gain", c.ego.speed_gain);
  r.number("ego.free_gain", c.ego.free_gain);
  r.boolean("ego.lane_changes", c.ego.lane_changes);
  r.number("ego.lc_duration_s", c.ego.lc_duration);
  r.number("ego.cut_in_detection_m", c.ego.cut_in_detection);

  r.section("stm");
  std::vector<double> sit(c.stm.sit.begin(), c.stm.sit.end());
  r.numbers("stm.sit_s", sit);
  if (sit.size() == 3) {
    std::copy(sit.begin(), sit.end(), c.stm.sit.begin());
  } else {
    c.stm.sit = {0.0, 0.0, 0.0};  // flagged by validation
  }
  r.number("stm.t_max_s", c.stm.t_max);
  r.integer("stm.n_ct_max", c.stm.n_ct_max);
  r.number("stm.v_final_kmh", c.stm.v_final_kmh);
  r.number("stm.neighbor_threshold_m", c.stm.neighbor_threshold);
  r.section("braking");
  std::string braking = c.stm.braking == BrakingModel::driver ? "driver" : "acc";
  r.string("braking.model", braking);
  if (braking == "driver") {
    c.stm.braking = BrakingModel::driver;
  } else if (braking == "acc") {
    c.stm.braking = BrakingModel::acc;
  } else {
    throw ConfigError(std::vector<ConfigIssue>{{"braking.model", "expected \"driver\" or \"acc\""}});
  }

  r.section("stm.frame");
  r.number("stm.frame.lower_s", c.stm.t_lower);
  r.number("stm.frame.upper_s", c.stm.t_upper);

  r.number("braking.t_d_s", c.stm.driver.t_d);
  r.number("braking.a_peak_ms2", c.stm.driver.a_peak);
  r.number("braking.shape_m", c.stm.driver.shape_m);
  c.stm.driver.v_final_kmh = c.stm.v_final_kmh;
  r.number("braking.acc_a0_ms2", c.stm.acc.a0);
  r.number("braking.acc_a1_ms2", c.stm.acc.a1);
  r.number("braking.acc_jerk_ms3", c.stm.acc.jerk_limit);

  r.section("lce");
  r.number("lce.t_m_s", c.stm.lce.t_m);
  r.number("lce.h_m", c.stm.lce.h);
  r.number("lce.a_max_ms2", c.stm.lce.a_max);
  r.number("lce.t_int_min_s", c.stm.lce.t_int_min);
  r.numbers("lce.init_times_s", c.stm.lce.init_times);
  r.number("lce.window_behind_m", c.stm.lce.window_behind);
  r.number("lce.window_ahead_m", c.stm.lce.window_ahead);

  r.section("evaluation");
  r.number("evaluation.ttb_very_s", c.evaluation.ttb_very);
  r.number("evaluation.ttb_eventually_s", c.evaluation.ttb_eventually);
  r.number("evaluation.decel_very", c.evaluation.decel_very);
  r.number("evaluation.decel_eventually", c.evaluation.decel_eventually);
  r.number("evaluation.ttb_max_decel", c.evaluation.ttb_max_decel);
  r.number("evaluation.hysteresis_s", c.evaluation.hysteresis);

  r.section("run");
  r.seeds("run.seed", c.run.seeds);
  r.number("run.km", c.run.km);
  r.number("run.dt_s", c.run.dt);
  r.number("run.warmup_s", c.run.warmup);
  r.integer("run.ego_lane", c.run.ego_lane);
  r.number("run.ego_initial_speed_ms", c.run.ego_initial_speed);
}

}  // namespace

ConfigError::ConfigError(std::vector<ConfigIssue> issues)
    : std::runtime_error(join_issues(issues)), issues_(std::move(issues))
{
}

std::vector<ConfigIssue> validate_config(const Config& c)
{
  std::vector<ConfigIssue> out;
  auto require = [&out](bool ok, const char* key, const char* message) {
    if (!ok) {
      out.push_back({key, message});
    }
  };

  require(c.road.lane_count == 2 || c.road.lane_count == 3, "road.lanes", "must be 2 or 3");
  require(c.road.lane_width > 0.0, "road.lane_width_m", "must be positive");
  require(c.road.length >= 500.0, "road.length_m", "must be at least 500");
  require(c.road.speed_limit > 0.0, "road.speed_limit_ms", "must be positive");

  require(c.traffic.inflow_per_lane >= 0.0, "traffic.inflow_veh_h_per_lane", "must be non-negative");
  require(c.traffic.desired_speed_mean > 0.0, "traffic.desired_speed_mean_ms", "must be positive");
  require(c.traffic.desired_speed_sd >= 0.0, "traffic.desired_speed_sd_ms", "must be non-negative");

  require(c.idm.a_max > 0.0, "idm.a_max", "must be positive");
  require(c.idm.b_comf > 0.0, "idm.b_comf", "must be positive");
  require(c.idm.time_headway > 0.0, "idm.time_headway_s", "must be positive");
  require(c.idm.jam_distance >= 0.0, "idm.jam_distance_m", "must be non-negative");
  require(c.idm.delta > 0.0, "idm.delta", "must be positive");
  require(c.idm.max_decel >= c.idm.b_comf, "idm.max_decel", "must be at least b_comf");
  require(c.idm.lc_duration > 0.0, "idm.lc_duration_s", "must be positive");

  require(c.ego.time_gap > 0.0, "ego.time_gap_s", "must be positive");
  require(c.ego.acc_max_decel > 0.0, "ego.acc_max_decel", "must be positive");
  require(c.ego.acc_max_accel > 0.0, "ego.acc_max_accel", "must be positive");
  require(c.ego.emergency_decel >= c.ego.acc_max_decel, "ego.emergency_decel", "must be at least acc_max_decel");
  require(c.ego.set_speed > 0.0, "ego.set_speed_ms", "must be positive");
  require(c.ego.standstill_gap >= 0.0, "ego.standstill_gap_m", "must be non-negative");
  require(c.ego.lc_duration > 0.0, "ego.lc_duration_s", "must be positive");
  require(c.ego.cut_in_detection >= 0.0, "ego.cut_in_detection_m", "must be non-negative");

  const auto& sit = c.stm.sit;
  require(sit[0] > 0.0 && sit[0] < sit[1] && sit[1] < sit[2] && sit[2] < c.stm.t_max, "stm.sit_s",
          "needs three increasing positive times below t_max_s");
  require(c.stm.n_ct_max >= 1, "stm.n_ct_max", "must be at least 1");
  require(c.stm.v_final_kmh >= 0.0, "stm.v_final_kmh", "must be non-negative");
  require(c.stm.neighbor_threshold > 0.0, "stm.neighbor_threshold_m", "must be positive");
  require(c.stm.t_lower > 0.0, "stm.frame.lower_s", "must be positive");
  require(c.stm.t_upper > 0.0, "stm.frame.upper_s", "must be positive");
  require(c.stm.driver.t_d > 0.0, "braking.t_d_s", "must be positive");
  require(c.stm.driver.shape_m > 0.0, "braking.shape_m", "must be positive");
  require(c.stm.driver.a_peak < 0.0, "braking.a_peak_ms2", "must be negative");
  require(c.stm.acc.a1 < 0.0 && c.stm.acc.a0 >= c.stm.acc.a1, "braking.acc_a1_ms2", "needs a1 < 0 and a0 >= a1");
  require(c.stm.acc.jerk_limit > 0.0, "braking.acc_jerk_ms3", "must be positive");
  require(c.stm.lce.t_m > 0.0, "lce.t_m_s", "must be positive");
  require(c.stm.lce.h > 0.0, "lce.h_m", "must be positive");
  require(c.stm.lce.a_max >= 0.0, "lce.a_max_ms2", "must be non-negative");
  require(c.stm.lce.t_int_min >= 0.0, "lce.t_int_min_s", "must be non-negative");
  require(c.stm.lce.window_behind >= 0.0 && c.stm.lce.window_ahead >= 0.0, "lce.window_ahead_m",
          "windows must be non-negative");

  const auto& e = c.evaluation;
  require(e.ttb_very > 0.0 && e.ttb_very < e.ttb_eventually, "evaluation.ttb_very_s",
          "needs 0 < ttb_very_s < ttb_eventually_s");
  require(e.decel_eventually > 0.0 && e.decel_eventually < e.decel_very, "evaluation.decel_eventually",
          "needs 0 < decel_eventually < decel_very");
  require(e.ttb_max_decel > 0.0, "evaluation.ttb_max_decel", "must be positive");
  require(e.hysteresis >= 0.0, "evaluation.hysteresis_s", "must be non-negative");

  require(!c.run.seeds.empty(), "run.seed", "needs at least one seed");
  require(c.run.km > 0.0, "run.km", "must be positive");
  require(c.run.dt > 0.0 && c.run.dt <= 0.5, "run.dt_s", "must be in (0, 0.5]");
  require(c.run.ego_lane >= 1 && c.run.ego_lane <= c.road.lane_count, "run.ego_lane", "must name a road lane");
  require(c.run.ego_initial_speed > 0.0, "run.ego_initial_speed_ms", "must be positive");
  return out;
}

Config parse_config(std::string_view toml_text)
{
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& err) {
    std::ostringstream where;
    where << "line " << err.source().begin.line;
    throw ConfigError(std::vector<ConfigIssue>{{where.str(), std::string(err.description())}});
  }

  Config c;
  std::vector<ConfigIssue> issues;
  Reader reader(root, issues);
  read_config(reader, c);
  reader.report_unknown();
  if (issues.empty()) {
    issues = validate_config(c);
  }
  if (!issues.empty()) {
    throw ConfigError(std::move(issues));
  }
  return c;
}

Config load_config(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) {
    throw std::ios_base::failure("cannot read " + path.string());
  }
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string serialize_config(const Config& c)
{
  auto numbers = [](auto begin, auto end) {
    toml::array a;
    for (auto it = begin; it != end; ++it) {
      a.push_back(*it);
    }
    return a;
  };
  toml::array seeds;
  for (std::uint64_t s : c.run.seeds) {
    seeds.push_back(static_cast<std::int64_t>(s));
  }

  toml::table root{
      {"road", toml::table{{"lanes", c.road.lane_count},
                           {"lane_width_m", c.road.lane_width},
                           {"length_m", c.road.length},
                           {"speed_limit_ms", c.road.speed_limit}}},
      {"traffic", toml::table{{"inflow_veh_h_per_lane", c.traffic.inflow_per_lane},
                              {"desired_speed_mean_ms", c.traffic.desired_speed_mean},
                              {"desired_speed_sd_ms", c.traffic.desired_speed_sd}}},
      {"idm", toml::table{{"a_max", c.idm.a_max},
                          {"b_comf", c.idm.b_comf},
                          {"time_headway_s", c.idm.time_headway},
                          {"jam_distance_m", c.idm.jam_distance},
                          {"delta", c.idm.delta},
                          {"max_decel", c.idm.max_decel},
                          {"lc_duration_s", c.idm.lc_duration},
                          {"lc_safe_decel", c.idm.lc_safe_decel},
                          {"lc_threshold", c.idm.lc_threshold},
                          {"lc_right_bias", c.idm.lc_right_bias},
                          {"lc_cooldown_s", c.idm.lc_cooldown}}},
      {"ego", toml::table{{"time_gap_s", c.ego.time_gap},
                          {"acc_max_decel", c.ego.acc_max_decel},
                          {"acc_max_accel", c.ego.acc_max_accel},
                          {"emergency_decel", c.ego.emergency_decel},
                          {"set_speed_ms", c.ego.set_speed},
                          {"standstill_gap_m", c.ego.standstill_gap},
                          {"gap_gain", c.ego.gap_gain},
                          {"speed_gain", c.ego.speed_gain},
                          {"free_gain", c.ego.free_gain},
                          {"lane_changes", c.ego.lane_changes},
                          {"lc_duration_s", c.ego.lc_duration},
                          {"cut_in_detection_m", c.ego.cut_in_detection}}},
      {"stm",
       toml::table{
           {"sit_s", numbers(c.stm.sit.begin(), c.stm.sit.end())},
           {"t_max_s", c.stm.t_max},
           {"n_ct_max", c.stm.n_ct_max},
           {"v_final_kmh", c.stm.v_final_kmh},
           {"neighbor_threshold_m", c.stm.neighbor_threshold},
           {"frame", toml::table{{"lower_s", c.stm.t_lower}, {"upper_s", c.stm.t_upper}}},
       }},
      {"braking", toml::table{{"model", c.stm.braking == BrakingModel::driver ? "driver" : "acc"},
                              {"t_d_s", c.stm.driver.t_d},
                              {"a_peak_ms2", c.stm.driver.a_peak},
                              {"shape_m", c.stm.driver.shape_m},
                              {"acc_a0_ms2", c.stm.acc.a0},
                              {"acc_a1_ms2", c.stm.acc.a1},
                              {"acc_jerk_ms3", c.stm.acc.jerk_limit}}},
      {"lce", toml::table{{"t_m_s", c.stm.lce.t_m},
                          {"h_m", c.stm.lce.h},
                          {"a_max_ms2", c.stm.lce.a_max},
                          {"t_int_min_s", c.stm.lce.t_int_min},
                          {"init_times_s", numbers(c.stm.lce.init_times.begin(), c.stm.lce.init_times.end())},
                          {"window_behind_m", c.stm.lce.window_behind},
                          {"window_ahead_m", c.stm.lce.window_ahead}}},
      {"evaluation", toml::table{{"ttb_very_s", c.evaluation.ttb_very},
                                 {"ttb_eventually_s", c.evaluation.ttb_eventually},
                                 {"decel_very", c.evaluation.decel_very},
                                 {"decel_eventually", c.evaluation.decel_eventually},
                                 {"ttb_max_decel", c.evaluation.ttb_max_decel},
                                 {"hysteresis_s", c.evaluation.hysteresis}}},
      {"run", toml::table{{"seed", seeds},
                          {"km", c.run.km},
                          {"dt_s", c.run.dt},
                          {"warmup_s", c.run.warmup},
                          {"ego_lane", c.run.ego_lane},
                          {"ego_initial_speed_ms", c.run.ego_initial_speed}}},
  };
  std::ostringstream out;
  out << root << '\n';
  return out.str();
}

}  // namespace stresslane
