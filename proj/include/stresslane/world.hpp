#pragma once

#include <algorithm>
#include <array>
#include <cstdint>

#include "stresslane/maneuvers.hpp"

namespace stresslane
{

using VehicleId = std::int64_t;

/// Lane 1 is the leftmost lane; lane indices grow to the right.
struct RoadConfig
{
  int lane_count = 3;
  double lane_width = 3.5;
  double length = 5000.0;
  double speed_limit = kmh_to_ms(130.0);

  bool operator==(const RoadConfig&) const = default;
};

enum class VehicleKind { ego, traffic };
enum class Controller { internal_model, stm_plugin };

/// Kinematic state of one driver-vehicle unit. `s` is the rear bumper
/// position, so the body occupies [s, s + len]. `y_lat` is positive towards
/// higher lane indices (to the right).
struct VehicleState
{
  VehicleId id = 0;
  VehicleKind kind = VehicleKind::traffic;
  int lane = 1;
  double s = 0.0;
  double y_lat = 0.0;
  double v = 0.0;
  double a = 0.0;
  double len = 4.5;
  double width = 1.8;
  Controller controlled_by = Controller::internal_model;
  double distance = 0.0;  // driven distance since entering the simulation

  double front() const { return s + len; }
};

/// Lateral position of the vehicle centre measured from the left road edge.
inline double lateral_center(const VehicleState& v, double lane_width)
{
  return (v.lane - 0.5) * lane_width + v.y_lat;
}

/// Width of the vehicle body lying inside the given lane [m].
inline double lane_intrusion(const VehicleState& v, int lane, double lane_width)
{
  const double c = lateral_center(v, lane_width);
  const double lo = std::max(c - v.width / 2.0, (lane - 1) * lane_width);
  const double hi = std::min(c + v.width / 2.0, lane * lane_width);
  return std::max(0.0, hi - lo);
}

/// Whether the vehicle body overlaps the given lane.
inline bool covers_lane(const VehicleState& v, int lane, double lane_width)
{
  const double c = lateral_center(v, lane_width);
  const double lo = (lane - 1) * lane_width;
  const double hi = lane * lane_width;
  return c + v.width / 2.0 > lo && c - v.width / 2.0 < hi;
}

/// Simulation time is kept as an integer step count to avoid drift.
struct SimClock
{
  double dt = 0.1;
  std::int64_t step_index = 0;

  double t() const { return static_cast<double>(step_index) * dt; }
  double time_at(std::int64_t step) const { return static_cast<double>(step) * dt; }
};

enum class BrakingModel { driver, acc };

struct StmParameters
{
  std::array<double, 3> sit{2.0, 4.0, 6.0};  // safety interval times [s]
  double t_max = 8.0;                          // outer edge of the third band [s]
  int n_ct_max = 20;
  double t_lower = 5.0;
  double t_upper = 10.0;
  BrakingModel braking = BrakingModel::driver;
  DriverBrakeParams driver;
  AccBrakeParams acc;
  LceParams lce;
  double v_final_kmh = 20.0;
  double neighbor_threshold = 400.0;

  bool operator==(const StmParameters&) const = default;
};

}  // namespace stresslane
