#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "stresslane/world.hpp"

namespace stresslane
{

struct TrafficDemand
{
  double inflow_per_lane = 1200.0;  // [veh/h]
  double desired_speed_mean = kmh_to_ms(110.0);
  double desired_speed_sd = kmh_to_ms(10.0);
  std::uint64_t seed = 1;

  bool operator==(const TrafficDemand&) const = default;
};

/// Intelligent-Driver-Model parameters for background traffic, plus the
/// gap-acceptance settings of its lane changes.
struct IdmParams
{
  double a_max = 1.4;
  double b_comf = 2.0;
  double time_headway = 1.5;
  double jam_distance = 2.0;
  double delta = 4.0;
  double max_decel = 8.5;

  double lc_duration = 4.0;
  double lc_safe_decel = 2.0;   // new follower may not be forced below -lc_safe_decel
  double lc_threshold = 0.3;    // acceleration gain needed to change lanes
  double lc_right_bias = 0.1;   // eases changes to the right by this much
  double lc_cooldown = 10.0;

  bool operator==(const IdmParams&) const = default;
};

struct EgoControllerParams
{
  double time_gap = 1.8;
  double acc_max_decel = 3.5;
  double acc_max_accel = 1.5;
  double emergency_decel = 8.5;
  double set_speed = kmh_to_ms(130.0);
  double standstill_gap = 5.0;
  double gap_gain = 0.15;
  double speed_gain = 0.6;
  double free_gain = 0.5;
  bool lane_changes = true;
  double lc_duration = 5.0;
  /// A vehicle becomes the ACC target once this much of its body is inside
  /// the ego lane [m]; 0 reacts to any overlap.
  double cut_in_detection = 0.9;

  bool operator==(const EgoControllerParams&) const = default;
};

struct LeaderInfo
{
  double gap;  // bumper to bumper [m]
  double v;
  double a = 0.0;
};

/// Car-following acceleration of a background vehicle, clamped to
/// [-max_decel, a_max].
double idm_acceleration(const IdmParams& p, double v, double v_desired, const std::optional<LeaderInfo>& leader);

/// Deceleration an ego at speed v must hold to avoid reaching the leader,
/// from constant-deceleration kinematics. Zero when no braking is needed.
double required_decel(double v, const LeaderInfo& leader, double standstill_gap);

struct EgoCommand
{
  double a;
  bool emergency;  // comfort range was insufficient
};

/// ACC: time-gap tracking behind the leader, free cruise otherwise.
EgoCommand ego_acceleration(const EgoControllerParams& p, double v, const std::optional<LeaderInfo>& leader);

struct SpawnStats
{
  int arrivals = 0;
  int spawned = 0;
};

struct EgoSetup
{
  bool enabled = false;
  double insert_time = 0.0;
  int lane = 1;
  double initial_speed = kmh_to_ms(120.0);
};

/// Microscopic traffic on one straight multilane segment. Vehicles enter at
/// s = 0 and leave at s = length; the ego re-enters at s = 0 after reaching
/// the end so one run can accumulate an arbitrary driven distance.
class World
{
public:
  World(RoadConfig road, TrafficDemand demand, double dt);

  void set_idm(const IdmParams& p) { idm_ = p; }
  void set_ego_controller(const EgoControllerParams& p) { ego_params_ = p; }
  void set_ego_setup(const EgoSetup& setup);

  const RoadConfig& road() const { return road_; }
  const SimClock& clock() const { return clock_; }
  const IdmParams& idm() const { return idm_; }
  const EgoControllerParams& ego_controller() const { return ego_params_; }

  /// All vehicles currently on the road, sorted by id.
  std::vector<VehicleState> states() const;
  std::size_t vehicle_count() const { return vehicles_.size(); }
  const VehicleState* find(VehicleId id) const;
  std::optional<VehicleState> ego() const;
  VehicleId ego_id() const { return ego_id_; }
  double ego_distance() const;
  int ego_laps() const { return ego_laps_; }

  /// Place a vehicle directly (scenario scripting). Returns its id.
  VehicleId add_vehicle(VehicleState state, double v_desired);
  void remove_vehicle(VehicleId id);

  /// Nearest vehicle ahead sharing a lane with `id`, if any, by footprint.
  std::optional<VehicleState> leader_of(VehicleId id) const;

  // Step phases. step() runs spawn_step, compute_controls and advance.
  SpawnStats spawn_step();
  void compute_controls();
  void advance();
  void step();

  /// Sticky overrides; a vehicle with any override is stm_plugin-controlled.
  bool set_override(VehicleId id, std::optional<double> accel, std::optional<double> lateral_rate);
  bool release(VehicleId id);

  /// Internally planned lane change (background traffic and ego).
  bool start_lane_change(VehicleId id, LaneDirection direction, double duration);

  std::mt19937_64& rng() { return rng_; }

private:
  struct LateralPlan
  {
    int direction;
    double h;
    double duration;
    double elapsed = 0.0;
  };

  struct Vehicle
  {
    VehicleState state;
    double v_desired = 0.0;
    double control_a = 0.0;
    std::optional<LateralPlan> plan;
    double lc_blocked_until = 0.0;
    std::optional<double> accel_override;
    std::optional<double> lateral_rate;
  };

  Vehicle* lookup(VehicleId id);
  const Vehicle* lookup(VehicleId id) const;
  void rebuild_lane_index();
  std::optional<LeaderInfo> leader_info(std::size_t idx, double min_intrusion = 0.0) const;
  std::optional<std::size_t> leader_index(std::size_t idx, double min_intrusion = 0.0) const;
  bool entry_clear(int lane, double v_desired, double* entry_speed) const;
  void consider_lane_change(std::size_t idx, std::vector<std::pair<std::size_t, int>>& committed);
  void try_insert_ego();

  RoadConfig road_;
  TrafficDemand demand_;
  IdmParams idm_;
  EgoControllerParams ego_params_;
  EgoSetup ego_setup_;
  SimClock clock_;
  std::mt19937_64 rng_;
  std::vector<Vehicle> vehicles_;
  std::vector<std::vector<std::size_t>> lane_index_;  // per lane, indices sorted by s
  std::vector<std::vector<int>> lane_pos_;            // per lane, position of each vehicle or -1
  std::vector<int> pending_;
  VehicleId next_id_ = 1;
  VehicleId ego_id_ = 0;
  std::optional<Vehicle> parked_ego_;
  int ego_laps_ = 0;
};

}  // namespace stresslane
