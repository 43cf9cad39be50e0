#include "stresslane/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "stresslane/injector.hpp"

namespace stresslane
{

using nlohmann::ordered_json;

namespace
{

ordered_json optional_json(const std::optional<CellSample>& c)
{
  if (!c) {
    return nullptr;
  }
  return ordered_json{{"id", c->id}, {"s", c->s}, {"v", c->v}, {"a", c->a}, {"distance", c->distance}, {"d", c->d}};
}

ordered_json sample_json(const FrameSample& s)
{
  ordered_json cells = ordered_json::array();
  for (int lane = 1; lane <= s.cells.lanes(); ++lane) {
    ordered_json row = ordered_json::array();
    for (int col = 1; col <= kColumns; ++col) {
      row.push_back(optional_json(s.cells.at(lane, col)));
    }
    cells.push_back(std::move(row));
  }
  ordered_json tracked = ordered_json::array();
  for (const VehicleState& v : s.nearby) {
    tracked.push_back({{"id", v.id}, {"lane", v.lane}, {"s", v.s}, {"y_lat", v.y_lat}, {"v", v.v}, {"a", v.a}});
  }
  ordered_json lead = nullptr;
  if (s.lead) {
    lead = {{"id", s.lead->id}, {"gap", s.lead->gap}, {"v", s.lead->v}, {"a", s.lead->a}};
  }
  return {{"step", s.step},
          {"t", s.time},
          {"ego",
           {{"s", s.s_ego}, {"v", s.v_ego}, {"a", s.a_ego}, {"distance", s.distance_ego}, {"lane", s.lane_ego}}},
          {"lead", lead},
          {"cells", cells},
          {"tracked", tracked},
          {"ego_collision", s.ego_collision}};
}

double default_warmup(const Config& cfg)
{
  return cfg.run.warmup >= 0.0 ? cfg.run.warmup : cfg.road.length / cfg.traffic.desired_speed_mean + 30.0;
}

void write_file(const std::filesystem::path& path, const std::string& content)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::ios_base::failure("cannot write " + path.string());
  }
  out << content;
  if (!out) {
    throw std::ios_base::failure("write failed for " + path.string());
  }
}

}  // namespace

ordered_json scenario_to_json(const ScenarioRecord& r, CriticalityLabel label)
{
  ordered_json frame = ordered_json::array();
  for (const FrameSample& s : r.frame) {
    frame.push_back(sample_json(s));
  }
  ordered_json collisions = ordered_json::array();
  for (const CollisionNote& c : r.collisions) {
    collisions.push_back({{"t", c.time}, {"a", c.a}, {"b", c.b}});
  }
  return {{"trigger_time", r.trigger_time},
          {"trigger_step", r.trigger_step},
          {"kind", r.kind == EventKind::braking ? "braking" : "lane_change"},
          {"mask_id", r.mask_id ? ordered_json(*r.mask_id) : ordered_json(nullptr)},
          {"triggered", r.triggered},
          {"partial", r.partial},
          {"lane_count", r.lane_count},
          {"t_lower", r.t_lower},
          {"t_upper", r.t_upper},
          {"criticality", std::string(to_string(label))},
          {"collisions", collisions},
          {"frame", frame}};
}

std::string scenario_to_json_line(const ScenarioRecord& record, CriticalityLabel label)
{
  return scenario_to_json(record, label).dump() + "\n";
}

std::vector<std::string> validate_scenario_json(const ordered_json& j)
{
  std::vector<std::string> problems;
  auto need = [&](const ordered_json& obj, const char* key, auto check, const char* what) {
    if (!obj.is_object() || !obj.contains(key) || !check(obj.at(key))) {
      problems.push_back(std::string(key) + ": expected " + what);
      return false;
    }
    return true;
  };
  auto is_number = [](const ordered_json& v) { return v.is_number(); };
  auto is_int = [](const ordered_json& v) { return v.is_number_integer(); };
  auto is_bool = [](const ordered_json& v) { return v.is_boolean(); };
  auto is_array = [](const ordered_json& v) { return v.is_array(); };

  need(j, "trigger_time", is_number, "number");
  need(j, "trigger_step", is_int, "integer");
  need(j, "kind", [](const ordered_json& v) { return v == "braking" || v == "lane_change"; },
       "\"braking\" or \"lane_change\"");
  need(j, "mask_id", [](const ordered_json& v) { return v.is_null() || v.is_number_integer(); }, "integer or null");
  need(j, "triggered", [](const ordered_json& v) {
    return v.is_array() && !v.empty() && std::all_of(v.begin(), v.end(), [](const auto& x) {
      return x.is_number_integer();
    });
  }, "non-empty array of ids");
  need(j, "partial", is_bool, "boolean");
  need(j, "lane_count", [](const ordered_json& v) { return v == 2 || v == 3; }, "2 or 3");
  need(j, "t_lower", is_number, "number");
  need(j, "t_upper", is_number, "number");
  need(j, "criticality", [](const ordered_json& v) {
    return v == "not_critical" || v == "eventually_critical" || v == "very_critical";
  }, "criticality label");
  need(j, "collisions", is_array, "array");
  if (!need(j, "frame", is_array, "array")) {
    return problems;
  }

  const int lanes = j.value("lane_count", 0);
  for (const auto& s : j.at("frame")) {
    need(s, "step", is_int, "integer");
    need(s, "t", is_number, "number");
    need(s, "ego_collision", is_bool, "boolean");
    need(s, "tracked", is_array, "array");
    need(s, "lead", [](const ordered_json& v) { return v.is_null() || v.is_object(); }, "object or null");
    if (need(s, "ego", [](const ordered_json& v) { return v.is_object(); }, "object")) {
      for (const char* key : {"s", "v", "a", "distance"}) {
        need(s.at("ego"), key, is_number, "number");
      }
      need(s.at("ego"), "lane", is_int, "integer");
    }
    need(s, "cells", [lanes](const ordered_json& v) {
      if (!v.is_array() || static_cast<int>(v.size()) != lanes) {
        return false;
      }
      return std::all_of(v.begin(), v.end(), [](const auto& row) {
        return row.is_array() && row.size() == static_cast<std::size_t>(kColumns) &&
               std::all_of(row.begin(), row.end(), [](const auto& c) {
                 return c.is_null() || (c.is_object() && c.contains("id") && c.contains("d"));
               });
      });
    }, "lanes x 3 grid");
    if (!problems.empty()) {
      break;
    }
  }
  return problems;
}

SimulationResult simulate(const Config& cfg, std::uint64_t seed, bool stm_on, const SimulationOptions& options)
{
  const double dt = cfg.run.dt;
  TrafficDemand demand = cfg.traffic;
  demand.seed = seed;

  World world(cfg.road, demand, dt);
  world.set_idm(cfg.idm);
  world.set_ego_controller(cfg.ego);
  const double warmup = default_warmup(cfg);
  world.set_ego_setup({true, warmup, cfg.run.ego_lane, cfg.run.ego_initial_speed});

  InjectorSettings settings;
  settings.neighbor_threshold = cfg.stm.neighbor_threshold;
  settings.front_only = false;
  settings.column_times = {cfg.stm.sit[0], cfg.stm.sit[1], cfg.stm.sit[2], cfg.stm.t_max};
  Injector injector(world, settings);

  std::shared_ptr<StmPlugin> plugin;
  if (stm_on) {
    plugin = std::make_shared<StmPlugin>(cfg.road, cfg.stm, dt);
    injector.register_plugin(plugin);
  }

  SimulationResult result;
  result.summary.seed = seed;
  result.summary.stm_on = stm_on;

  CollisionDetector detector;
  CriticalityMonitor monitor(cfg.evaluation);
  std::ostringstream jsonl;
  std::size_t log_seen = 0;

  auto drain = [&](std::vector<ScenarioRecord> sealed) {
    for (ScenarioRecord& r : sealed) {
      const CriticalityLabel label = classify(r, cfg.evaluation);
      jsonl << scenario_to_json_line(r, label);
      ++result.summary.scenarios;
      result.summary.partial_scenarios += r.partial ? 1 : 0;
      if (options.keep_records) {
        result.records.push_back(std::move(r));
      }
    }
  };

  const double target_m = cfg.run.km * 1000.0;
  // an ego averaging less than 2 m/s means the traffic has broken down
  const double time_limit = warmup + target_m / 2.0 + 600.0;

  while (world.ego_distance() < target_m) {
    injector.step();
    const double t = world.clock().t();
    if (t > time_limit) {
      throw InvariantBreach("ego stalled: " + std::to_string(world.ego_distance()) + " m after " +
                            std::to_string(t) + " s");
    }

    if (plugin) {
      const auto& log = plugin->event_log();
      for (; log_seen < log.size(); ++log_seen) {
        result.events.push_back(log[log_seen]);
      }
    }

    bool ego_hit = false;
    for (const CollisionEvent& c : detector.detect(world.states(), t, cfg.road.lane_width, world.ego_id())) {
      char line[128];
      std::snprintf(line, sizeof line, "t=%.2f step=%lld collision %lld-%lld%s", t,
                    static_cast<long long>(world.clock().step_index), static_cast<long long>(c.a),
                    static_cast<long long>(c.b), c.involves_ego ? " ego" : "");
      result.events.emplace_back(line);
      if (plugin) {
        plugin->note_collision(t, c.a, c.b);
      }
      if (c.involves_ego) {
        ++result.summary.ego_collisions;
        ego_hit = true;
      } else {
        ++result.summary.traffic_collisions;
      }
      // wrecked background vehicles leave the road; the ego keeps driving
      for (VehicleId id : {c.a, c.b}) {
        if (id != world.ego_id() && world.find(id)) {
          if (plugin) {
            plugin->note_removed(id);
          }
          world.remove_vehicle(id);
        }
      }
    }

    if (const auto ego = world.ego()) {
      std::optional<LeaderInfo> lead;
      if (const auto l = world.leader_of(ego->id)) {
        lead = LeaderInfo{l->s - ego->front(), l->v, l->a};
      }
      monitor.observe(t, ego->v, lead, ego_hit);
    }

    if (plugin) {
      drain(plugin->take_sealed());
    }
  }

  injector.finish();
  monitor.finish();
  if (plugin) {
    drain(plugin->take_sealed());
    const auto& log = plugin->event_log();
    for (; log_seen < log.size(); ++log_seen) {
      result.events.push_back(log[log_seen]);
    }
    result.triggers = plugin->triggers();
    result.mask_counts = plugin->counter().counts();
    for (const auto& [mask, count] : result.mask_counts) {
      if (count > cfg.stm.n_ct_max) {
        throw InvariantBreach("mask C" + std::to_string(mask) + " exceeded its trigger cap");
      }
    }
    for (const TriggerLogEntry& e : result.triggers) {
      (e.kind == EventKind::braking ? result.summary.braking_events : result.summary.lane_change_events) += 1;
    }
  }
  for (const std::string& incident : injector.incidents()) {
    result.events.push_back("incident " + incident);
  }

  result.summary.km = world.ego_distance() / 1000.0;
  result.summary.sim_time = world.clock().t();
  result.summary.very_critical = monitor.very_critical();
  result.summary.eventually_critical = monitor.eventually_critical();
  result.summary.incidents = static_cast<int>(injector.summary().incidents);
  result.scenarios_jsonl = jsonl.str();
  return result;
}

Config resolve_config(const Config& base, const RunSpec& spec)
{
  Config cfg = base;
  if (spec.seeds) {
    cfg.run.seeds = *spec.seeds;
  }
  if (spec.km) {
    cfg.run.km = *spec.km;
  }
  if (spec.dt) {
    cfg.run.dt = *spec.dt;
  }
  if (auto issues = validate_config(cfg); !issues.empty()) {
    throw ConfigError(std::move(issues));
  }
  return cfg;
}

int run(const RunSpec& spec)
{
  Config cfg;
  try {
    const Config base = spec.config_path.empty() ? Config{} : load_config(spec.config_path);
    cfg = resolve_config(base, spec);
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const std::ios_base::failure& e) {
    spdlog::error("{}", e.what());
    return 1;
  }

  std::error_code ec;
  std::filesystem::create_directories(spec.out_dir, ec);
  const auto probe = spec.out_dir / ".write_probe";
  if (ec || !std::ofstream(probe)) {
    spdlog::error("output directory {} is not writable", spec.out_dir.string());
    return 2;
  }
  std::filesystem::remove(probe, ec);

  struct Job
  {
    std::uint64_t seed;
    bool stm_on;
    std::optional<SimulationResult> result;
    std::string error;
    bool breach = false;
  };
  std::vector<Job> jobs;
  for (std::uint64_t seed : cfg.run.seeds) {
    if (spec.stm != StmMode::on) {
      jobs.push_back({seed, false, std::nullopt, {}, false});
    }
    if (spec.stm != StmMode::off) {
      jobs.push_back({seed, true, std::nullopt, {}, false});
    }
  }

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers =
      std::min<unsigned>(spec.threads > 0 ? static_cast<unsigned>(spec.threads) : hw, static_cast<unsigned>(jobs.size()));
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < jobs.size(); i = next++) {
        Job& job = jobs[i];
        spdlog::info("seed {} stm {}: start", job.seed, job.stm_on ? "on" : "off");
        try {
          job.result = simulate(cfg, job.seed, job.stm_on);
          spdlog::info("seed {} stm {}: {:.1f} km, {} collisions", job.seed, job.stm_on ? "on" : "off",
                       job.result->summary.km, job.result->summary.ego_collisions);
        } catch (const InvariantBreach& e) {
          job.error = e.what();
          job.breach = true;
        } catch (const std::logic_error& e) {
          job.error = e.what();
          job.breach = true;
        } catch (const std::exception& e) {
          job.error = e.what();
        }
      }
    });
  }
  for (std::thread& t : pool) {
    t.join();
  }

  int code = 0;
  for (const Job& job : jobs) {
    if (!job.error.empty()) {
      spdlog::error("seed {} stm {}: {}", job.seed, job.stm_on ? "on" : "off", job.error);
      code = std::max(code, job.breach ? 3 : 2);
    }
  }
  if (code != 0) {
    return code;
  }

  try {
    std::string csv = summary_csv_header() + "\n";
    std::string report;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      const Job& job = jobs[i];
      const SimulationResult& r = *job.result;
      csv += summary_csv_row(r.summary) + "\n";
      const auto dir = spec.out_dir / ("seed_" + std::to_string(job.seed)) / (job.stm_on ? "stm_on" : "stm_off");
      std::filesystem::create_directories(dir);
      write_file(dir / "scenarios.jsonl", r.scenarios_jsonl);
      std::string events;
      for (const std::string& e : r.events) {
        events += e + "\n";
      }
      write_file(dir / "events.log", events);
      if (spec.stm == StmMode::both && !job.stm_on) {
        const RunComparison cmp = compare_runs(r.summary, jobs[i + 1].result->summary, 0.5);
        report += format_comparison(cmp) + "\n";
      }
    }
    write_file(spec.out_dir / "summary.csv", csv);
    if (!report.empty()) {
      write_file(spec.out_dir / "comparison.txt", report);
    }
  } catch (const std::invalid_argument& e) {
    spdlog::error("{}", e.what());
    return 3;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 0;
}

TraceRequest default_trace(TraceKind kind)
{
  switch (kind) {
    case TraceKind::driver_brake:
      return {kind, 71.03, 28.67, 0.01};
    case TraceKind::acc_brake:
      return {kind, 70.97, 42.25, 0.01};
    case TraceKind::lane_change:
      return {kind, 100.0, 100.0, 0.01};
  }
  return {};
}

std::optional<TraceKind> parse_trace_kind(std::string_view name)
{
  if (name == "driver_brake") {
    return TraceKind::driver_brake;
  }
  if (name == "acc_brake") {
    return TraceKind::acc_brake;
  }
  if (name == "lane_change") {
    return TraceKind::lane_change;
  }
  return std::nullopt;
}

std::vector<std::filesystem::path> emit_trace(const TraceRequest& request, const Config& cfg,
                                              const std::filesystem::path& out_dir)
{
  ManeuverProfile p;
  std::string stem;
  const double v0 = kmh_to_ms(request.v0_kmh);
  switch (request.kind) {
    case TraceKind::driver_brake: {
      DriverBrakeParams params = cfg.stm.driver;
      params.v_final_kmh = request.v_final_kmh;
      p = driver_brake_profile(v0, params, request.dt);
      stem = "driver_brake";
      break;
    }
    case TraceKind::acc_brake:
      p = acc_brake_profile(cfg.stm.acc, v0, kmh_to_ms(request.v_final_kmh), request.dt);
      stem = "acc_brake";
      break;
    case TraceKind::lane_change:
      p = lane_change_trajectory(cfg.stm.lce, v0, LaneDirection::right, request.dt);
      stem = "lane_change";
      break;
  }

  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  auto series = [&](const std::string& name, const std::vector<double>& values, double scale) {
    std::string text = "# t " + name + "\n";
    char line[64];
    for (std::size_t i = 0; i < p.size(); ++i) {
      std::snprintf(line, sizeof line, "%.4f %.9g\n", p.t[i], values[i] * scale);
      text += line;
    }
    const auto path = out_dir / (stem + "_" + name + ".dat");
    write_file(path, text);
    written.push_back(path);
  };
  series("accel_ms2", p.a, 1.0);
  series("speed_kmh", p.v, 3.6);
  if (request.kind == TraceKind::lane_change) {
    series("lateral_m", p.y_lat, 1.0);
  }
  return written;
}

}  // namespace stresslane
