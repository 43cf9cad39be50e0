#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "stresslane/stm.hpp"
#include "stresslane/traffic.hpp"

namespace stresslane
{

enum class CriticalityLabel { not_critical, eventually_critical, very_critical };

std::string_view to_string(CriticalityLabel label);

struct CriticalityThresholds
{
  double ttb_very = 0.8;          // [s]
  double ttb_eventually = 1.6;    // [s]
  double decel_very = 5.5;        // required deceleration [m/s^2]
  double decel_eventually = 3.5;  // [m/s^2]
  double ttb_max_decel = 8.5;     // braking capability assumed by TTB [m/s^2]
  double hysteresis = 1.0;        // quiet time that closes an episode [s]

  bool operator==(const CriticalityThresholds&) const = default;
};

/// Time left before the follower must brake at a_max to avoid impact.
/// +inf when it is not closing in; negative when braking is already too late.
double time_to_brake(double gap, double v_rel, double a_max);

/// Level of a single instant from the ego's view of its leader.
CriticalityLabel instant_level(double v_ego, const LeaderInfo& lead, const CriticalityThresholds& th);

bool footprints_overlap(const VehicleState& a, const VehicleState& b, double lane_width);

struct CollisionEvent
{
  double time;
  VehicleId a;  // a < b
  VehicleId b;
  bool involves_ego;
};

/// Reports each overlapping pair once per contact episode.
class CollisionDetector
{
public:
  std::vector<CollisionEvent> detect(const std::vector<VehicleState>& states, double time, double lane_width,
                                     VehicleId ego_id);

private:
  std::set<std::pair<VehicleId, VehicleId>> touching_;
};

/// Label of one captured scenario from its ego/leader samples.
CriticalityLabel classify(const ScenarioRecord& record, const CriticalityThresholds& th);

/// Counts critical episodes over a whole run, with or without the STM.
class CriticalityMonitor
{
public:
  explicit CriticalityMonitor(CriticalityThresholds th) : th_(th) {}

  void observe(double time, double v_ego, const std::optional<LeaderInfo>& lead, bool ego_collision);
  void finish();

  int very_critical() const { return very_; }
  int eventually_critical() const { return eventually_; }
  int total() const { return very_ + eventually_; }

private:
  void close_episode();

  CriticalityThresholds th_;
  bool open_ = false;
  CriticalityLabel peak_ = CriticalityLabel::not_critical;
  double last_critical_ = 0.0;
  int very_ = 0;
  int eventually_ = 0;
};

struct RunSummary
{
  std::uint64_t seed = 0;
  bool stm_on = false;
  double km = 0.0;
  double sim_time = 0.0;
  int ego_collisions = 0;
  int traffic_collisions = 0;
  int very_critical = 0;
  int eventually_critical = 0;
  int braking_events = 0;
  int lane_change_events = 0;
  int scenarios = 0;
  int partial_scenarios = 0;
  int incidents = 0;

  int criticals() const { return very_critical + eventually_critical; }
};

std::string summary_csv_header();
std::string summary_csv_row(const RunSummary& s);

struct RunComparison
{
  std::uint64_t seed;
  double km;
  int collisions_off;
  int collisions_on;
  int eventually_off;
  int eventually_on;
  int very_off;
  int very_on;

  /// Collisions appear only with the STM and both critical counts rise.
  bool stm_more_critical() const
  {
    return collisions_off == 0 && collisions_on > 0 && eventually_on > eventually_off && very_on > very_off;
  }
};

/// Pair an STM-off and an STM-on run; throws std::invalid_argument when they
/// differ in seed or driven distance.
RunComparison compare_runs(const RunSummary& off, const RunSummary& on, double km_tolerance = 0.5);

/// Side-by-side table of both runs with on/off ratios.
std::string format_comparison(const RunComparison& c);

}  // namespace stresslane
