#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace stresslane
{

constexpr double kmh_to_ms(double kmh) { return kmh / 3.6; }
constexpr double ms_to_kmh(double ms) { return ms * 3.6; }

/// Comfort and emergency deceleration bounds for human braking [m/s^2].
constexpr double kComfortDecelLimit = -3.5;
constexpr double kEmergencyDecelLimit = -8.5;

struct DriverBrakeParams
{
  double t_d = 12.0;          // total braking duration [s]
  double v_final_kmh = 20.0;  // target speed at the end of braking
  double a_peak = -1.7;       // nominal peak deceleration [m/s^2], negative
  double shape_m = 1.0;       // skew exponent of the polynomial shape

  bool operator==(const DriverBrakeParams&) const = default;
};

struct AccBrakeParams
{
  double a0 = 0.0;          // initial acceleration [m/s^2]
  double a1 = -3.0;         // plateau acceleration [m/s^2]
  double jerk_limit = 1.5;  // magnitude [m/s^3], further capped by iso_limits()

  bool operator==(const AccBrakeParams&) const = default;
};

struct LceParams
{
  double t_m = 6.0;                 // maneuver time [s]
  double h = 3.5;                   // lateral displacement [m]
  double a_max = 1.2;               // peak longitudinal acceleration [m/s^2]
  double t_int_min = 300.0;         // minimum spacing between two events [s]
  std::vector<double> init_times;   // earliest start of each catalog entry in the first cycle [s]
  double window_behind = 4.0;       // candidate may trail the ego front by up to this [m]
  double window_ahead = 10.0;       // or lead the ego rear by up to this [m]

  bool operator==(const LceParams&) const = default;
};

enum class ProfileKind { driver_brake, acc_brake, lane_change };

/// Time-indexed command sequence, one sample every dt starting at t = 0.
/// For braking profiles `v` is the speed the profile produces when followed
/// exactly; for lane changes it is the longitudinal speed under a(t).
struct ManeuverProfile
{
  ProfileKind kind = ProfileKind::driver_brake;
  double dt = 0.1;
  double duration = 0.0;
  std::vector<double> t;
  std::vector<double> a;
  std::vector<double> v;
  std::vector<double> y_lat;

  std::size_t size() const { return t.size(); }
};

class InfeasibleManeuver : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Driver braking
// ---------------------------------------------------------------------------

/// Unnormalised single-peak shape theta * (1 - theta^m)^2 on [0, 1].
double driver_brake_shape(double theta, double m);

/// Location and height of the interior maximum of driver_brake_shape().
struct ShapePeak
{
  double theta;
  double value;
};
ShapePeak driver_brake_shape_peak(double m);

/// Peak deceleration that removes (v0 - v_final) over t_d with the normalised
/// shape. Throws InfeasibleManeuver when the result is below -8.5 m/s^2.
double derive_driver_peak(double v0, double v_final, double t_d, double m);

/// a(t) = r * a_peak * theta * (1 - theta^m)^2, theta = t / t_d, where the
/// normaliser r makes the extremum equal a_peak. a_peak is derived from
/// (v0, v_final, t_d) so the profile integrates to v_final - v0 exactly.
ManeuverProfile driver_brake_profile(double v0, const DriverBrakeParams& params, double dt);

// ---------------------------------------------------------------------------
// ACC braking
// ---------------------------------------------------------------------------

struct IsoLimits
{
  double max_decel;  // [m/s^2], magnitude
  double max_jerk;   // [m/s^3], magnitude
};

/// Speed-dependent ACC deceleration and jerk caps; linear between 5 and 20 m/s.
IsoLimits iso_limits(double v);

/// y(t) = A t^2 + B t + C with vertex (delta, a1).
struct ParabolicSegment
{
  double A;
  double B;
  double C;
  double delta;

  double value(double t) const { return (A * t + B) * t + C; }
  double slope(double t) const { return 2.0 * A * t + B; }
};

/// Transition from a0 to a1 whose peak jerk 2|a0 - a1| / delta equals jerk.
ParabolicSegment acc_transition(double a0, double a1, double jerk);

/// Parabolic onset to a1, plateau, then a mirrored release to zero timed so
/// the speed settles exactly on v_target. The onset is cut short when the
/// speed budget does not allow the full plateau.
ManeuverProfile acc_brake_profile(const AccBrakeParams& params, double v0, double v_target, double dt);

// ---------------------------------------------------------------------------
// Deceleration table by approach speed
// ---------------------------------------------------------------------------

struct DecelCell
{
  double mean_speed_kmh;
  double decel;  // positive magnitude [m/s^2]
};

struct DecelLookupResult
{
  double decel;
  double mean_speed_kmh;
  bool fallback;  // requested cell undefined, nearest defined one returned
};

class DecelLookup
{
public:
  static constexpr int kApproachBuckets = 5;   // 40-50 ... 80-90 km/h
  static constexpr int kSpeedIntervals = 9;    // 0-10 ... 80-90 km/h

  DecelLookup();

  std::optional<DecelCell> cell(int approach_bucket, int speed_interval) const;

  /// Throws std::out_of_range outside 40-90 km/h approach or 0-90 km/h speed.
  DecelLookupResult lookup(double approach_kmh, double current_kmh) const;

private:
  std::array<std::array<std::optional<DecelCell>, kApproachBuckets>, kSpeedIntervals> table_;
};

// ---------------------------------------------------------------------------
// Lane change
// ---------------------------------------------------------------------------

enum class LaneDirection { left = -1, right = 1 };

inline int sign_of(LaneDirection d) { return static_cast<int>(d); }

/// Magnitude coefficients of y(t) = c5 t^5 - c4 t^4 + c3 t^3.
struct QuinticCoefficients
{
  double c5;
  double c4;
  double c3;
};

QuinticCoefficients lane_change_coefficients(double h, double t_m);

/// Unsigned lateral offset, clamped to [0, h] outside [0, t_m].
double lane_change_offset(double h, double t_m, double t);
double lane_change_lateral_speed(double h, double t_m, double t);
double lane_change_lateral_accel(double h, double t_m, double t);
double lane_change_longitudinal_accel(double a_max, double t_m, double t);

ManeuverProfile lane_change_trajectory(const LceParams& params, double v_m, LaneDirection direction, double dt);

}  // namespace stresslane
