#include "stresslane/maneuvers.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace stresslane
{

namespace
{

std::size_t sample_count(double duration, double dt)
{
  // number of intervals, rounding up unless duration is a multiple of dt
  const double n = duration / dt;
  const double rounded = std::round(n);
  if (std::abs(n - rounded) < 1e-9) {
    return static_cast<std::size_t>(rounded);
  }
  return static_cast<std::size_t>(std::ceil(n));
}

// Antiderivative of driver_brake_shape() with F(0) = 0.
double driver_brake_shape_integral(double theta, double m)
{
  return theta * theta / 2.0 - 2.0 * std::pow(theta, m + 2.0) / (m + 2.0) +
         std::pow(theta, 2.0 * m + 2.0) / (2.0 * m + 2.0);
}

}  // namespace

double driver_brake_shape(double theta, double m)
{
  const double tail = 1.0 - std::pow(theta, m);
  return theta * tail * tail;
}

ShapePeak driver_brake_shape_peak(double m)
{
  // d/dtheta vanishes where theta^m = 1 / (1 + 2m)
  const double theta = std::pow(1.0 / (1.0 + 2.0 * m), 1.0 / m);
  return {theta, driver_brake_shape(theta, m)};
}

double derive_driver_peak(double v0, double v_final, double t_d, double m)
{
  if (t_d <= 0.0 || m <= 0.0) {
    throw std::invalid_argument("driver braking needs t_d > 0 and shape_m > 0");
  }
  const double area = driver_brake_shape_integral(1.0, m) / driver_brake_shape_peak(m).value;
  const double a_peak = (v_final - v0) / (area * t_d);
  if (a_peak < kEmergencyDecelLimit) {
    throw InfeasibleManeuver("infeasible braking demand");
  }
  return a_peak;
}

ManeuverProfile driver_brake_profile(double v0, const DriverBrakeParams& params, double dt)
{
  const double v_final = kmh_to_ms(params.v_final_kmh);
  if (dt <= 0.0) {
    throw std::invalid_argument("dt must be positive");
  }
  if (v0 < v_final) {
    throw std::invalid_argument("driver braking requires v0 >= v_final");
  }

  ManeuverProfile profile;
  profile.kind = ProfileKind::driver_brake;
  profile.dt = dt;
  profile.duration = params.t_d;

  const double m = params.shape_m;
  const double a_peak = v0 == v_final ? 0.0 : derive_driver_peak(v0, v_final, params.t_d, m);
  const double r = 1.0 / driver_brake_shape_peak(m).value;

  const std::size_t n = sample_count(params.t_d, dt);
  profile.t.reserve(n + 1);
  profile.a.reserve(n + 1);
  profile.v.reserve(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    const double t = static_cast<double>(k) * dt;
    const double theta = std::min(t / params.t_d, 1.0);
    profile.t.push_back(t);
    profile.a.push_back(r * a_peak * driver_brake_shape(theta, m));
    profile.v.push_back(v0 + r * a_peak * params.t_d * driver_brake_shape_integral(theta, m));
  }
  profile.y_lat.assign(profile.t.size(), 0.0);
  return profile;
}

IsoLimits iso_limits(double v)
{
  auto blend = [v](double low_speed_value, double high_speed_value) {
    if (v <= 5.0) {
      return low_speed_value;
    }
    if (v >= 20.0) {
      return high_speed_value;
    }
    const double w = (v - 5.0) / 15.0;
    return low_speed_value + w * (high_speed_value - low_speed_value);
  };
  return {blend(5.0, 3.5), blend(5.0, 2.5)};
}

ParabolicSegment acc_transition(double a0, double a1, double jerk)
{
  if (jerk <= 0.0) {
    throw std::invalid_argument("jerk limit must be positive");
  }
  const double delta = 2.0 * std::abs(a0 - a1) / jerk;
  if (delta == 0.0) {
    return {0.0, 0.0, a0, 0.0};
  }
  const double A = (a0 - a1) / (delta * delta);
  return {A, -2.0 * A * delta, a0, delta};
}

ManeuverProfile acc_brake_profile(const AccBrakeParams& params, double v0, double v_target, double dt)
{
  if (dt <= 0.0) {
    throw std::invalid_argument("dt must be positive");
  }
  if (!(v0 > v_target && v_target >= 0.0)) {
    throw std::invalid_argument("ACC braking requires v0 > v_target >= 0");
  }
  if (params.a1 >= 0.0 || params.a0 < params.a1) {
    throw std::invalid_argument("ACC braking requires a1 < 0 and a0 >= a1");
  }
  const IsoLimits iso = iso_limits(v0);
  if (std::abs(params.a1) > iso.max_decel) {
    throw InfeasibleManeuver("ACC deceleration exceeds the automatic braking cap");
  }
  const double jerk = std::min(params.jerk_limit, iso.max_jerk);
  const ParabolicSegment onset = acc_transition(params.a0, params.a1, jerk);

  auto onset_speed = [&](double t) {
    return v0 + onset.A * t * t * t / 3.0 + onset.B * t * t / 2.0 + onset.C * t;
  };
  // speed still to shed once a release from acceleration a has started
  auto release_loss = [jerk](double a) { return 4.0 / 3.0 * a * a / jerk; };
  auto budget = [&](double t) {
    return onset_speed(t) - v_target - release_loss(onset.value(t));
  };

  double t_release = 0.0;
  if (budget(0.0) <= 0.0) {
    t_release = 0.0;
  } else if (budget(onset.delta) <= 0.0) {
    double lo = 0.0;
    double hi = onset.delta;
    for (int i = 0; i < 200 && hi - lo > 1e-13; ++i) {
      const double mid = 0.5 * (lo + hi);
      (budget(mid) > 0.0 ? lo : hi) = mid;
    }
    t_release = 0.5 * (lo + hi);
  } else {
    t_release = onset.delta + budget(onset.delta) / std::abs(params.a1);
  }

  const double a_release = t_release <= onset.delta ? onset.value(t_release) : params.a1;
  const double v_release = t_release <= onset.delta
                             ? onset_speed(t_release)
                             : onset_speed(onset.delta) + params.a1 * (t_release - onset.delta);
  const double release_span = 2.0 * std::abs(a_release) / jerk;
  const double total = t_release + release_span;

  auto accel_at = [&](double t) {
    if (t < t_release) {
      return t <= onset.delta ? onset.value(t) : params.a1;
    }
    if (t >= total || release_span == 0.0) {
      return 0.0;
    }
    const double u = (t - t_release) / release_span;
    return a_release * (1.0 - u * u);
  };
  auto speed_at = [&](double t) {
    if (t < t_release) {
      return t <= onset.delta ? onset_speed(t)
                              : onset_speed(onset.delta) + params.a1 * (t - onset.delta);
    }
    if (t >= total || release_span == 0.0) {
      return v_target;
    }
    const double tau = t - t_release;
    return v_release + a_release * (tau - tau * tau * tau / (3.0 * release_span * release_span));
  };

  ManeuverProfile profile;
  profile.kind = ProfileKind::acc_brake;
  profile.dt = dt;
  profile.duration = total;
  const std::size_t n = sample_count(total, dt);
  for (std::size_t k = 0; k <= n; ++k) {
    const double t = static_cast<double>(k) * dt;
    profile.t.push_back(t);
    profile.a.push_back(accel_at(t));
    profile.v.push_back(speed_at(t));
  }
  profile.y_lat.assign(profile.t.size(), 0.0);
  return profile;
}

DecelLookup::DecelLookup()
{
  using C = DecelCell;
  const std::optional<C> none;
  table_ = {{
    {C{2.64, 0.91}, C{2.81, 0.84}, C{2.43, 0.88}, C{2.62, 0.89}, C{2.6, 0.87}},
    {C{14.95, 1.92}, C{14.91, 1.87}, C{14.82, 1.91}, C{14.95, 2.0}, C{14.77, 1.9}},
    {C{25.1, 1.82}, C{25.03, 1.92}, C{25.07, 2.12}, C{24.84, 1.71}, C{24.87, 2.07}},
    {C{35.46, 1.26}, C{35.32, 1.67}, C{35.2, 2.06}, C{35.29, 1.83}, C{34.57, 2.12}},
    {C{44.04, 0.67}, C{45.46, 1.1}, C{45.23, 1.75}, C{44.83, 1.76}, C{45.12, 2.02}},
    {none, C{54.01, 0.58}, C{55.41, 1.07}, C{55.16, 1.37}, C{55.3, 1.83}},
    {none, none, C{63.69, 0.58}, C{65.49, 0.78}, C{65.2, 1.34}},
    {none, none, none, C{72.88, 0.45}, C{75.86, 0.91}},
    {none, none, none, none, C{82.9, 0.48}},
  }};
}

std::optional<DecelCell> DecelLookup::cell(int approach_bucket, int speed_interval) const
{
  if (approach_bucket < 0 || approach_bucket >= kApproachBuckets || speed_interval < 0 ||
      speed_interval >= kSpeedIntervals) {
    return std::nullopt;
  }
  return table_[speed_interval][approach_bucket];
}

DecelLookupResult DecelLookup::lookup(double approach_kmh, double current_kmh) const
{
  if (!(approach_kmh >= 40.0 && approach_kmh <= 90.0)) {
    throw std::out_of_range("approach speed outside 40-90 km/h");
  }
  if (!(current_kmh >= 0.0 && current_kmh <= 90.0)) {
    throw std::out_of_range("speed outside 0-90 km/h");
  }
  const int col = std::min(static_cast<int>((approach_kmh - 40.0) / 10.0), kApproachBuckets - 1);
  const int row = std::min(static_cast<int>(current_kmh / 10.0), kSpeedIntervals - 1);

  if (const auto hit = table_[row][col]) {
    return {hit->decel, hit->mean_speed_kmh, false};
  }
  for (int offset = 1; offset < kSpeedIntervals; ++offset) {
    for (const int r : {row - offset, row + offset}) {
      if (r >= 0 && r < kSpeedIntervals && table_[r][col]) {
        return {table_[r][col]->decel, table_[r][col]->mean_speed_kmh, true};
      }
    }
  }
  throw std::logic_error("deceleration table column has no defined cell");
}

QuinticCoefficients lane_change_coefficients(double h, double t_m)
{
  return {6.0 * h / std::pow(t_m, 5), 15.0 * h / std::pow(t_m, 4), 10.0 * h / std::pow(t_m, 3)};
}

double lane_change_offset(double h, double t_m, double t)
{
  const double tau = std::clamp(t / t_m, 0.0, 1.0);
  return h * tau * tau * tau * (10.0 + tau * (-15.0 + 6.0 * tau));
}

double lane_change_lateral_speed(double h, double t_m, double t)
{
  if (t <= 0.0 || t >= t_m) {
    return 0.0;
  }
  const double tau = t / t_m;
  return 30.0 * h / t_m * tau * tau * (1.0 - tau) * (1.0 - tau);
}

double lane_change_lateral_accel(double h, double t_m, double t)
{
  if (t <= 0.0 || t >= t_m) {
    return 0.0;
  }
  const double tau = t / t_m;
  return 60.0 * h / (t_m * t_m) * tau * (1.0 - tau) * (1.0 - 2.0 * tau);
}

double lane_change_longitudinal_accel(double a_max, double t_m, double t)
{
  if (t <= 0.0 || t >= t_m) {
    return 0.0;
  }
  return a_max * std::sin(2.0 * std::numbers::pi * t / t_m);
}

ManeuverProfile lane_change_trajectory(const LceParams& params, double v_m, LaneDirection direction, double dt)
{
  if (params.t_m <= 0.0 || dt <= 0.0) {
    throw std::invalid_argument("lane change needs t_m > 0 and dt > 0");
  }
  ManeuverProfile profile;
  profile.kind = ProfileKind::lane_change;
  profile.dt = dt;
  profile.duration = params.t_m;

  const double sign = sign_of(direction);
  const double omega = 2.0 * std::numbers::pi / params.t_m;
  const std::size_t n = sample_count(params.t_m, dt);
  for (std::size_t k = 0; k <= n; ++k) {
    const double t = std::min(static_cast<double>(k) * dt, params.t_m);
    profile.t.push_back(static_cast<double>(k) * dt);
    profile.a.push_back(lane_change_longitudinal_accel(params.a_max, params.t_m, t));
    profile.v.push_back(v_m + params.a_max / omega * (1.0 - std::cos(omega * t)));
    profile.y_lat.push_back(sign * lane_change_offset(params.h, params.t_m, t));
  }
  return profile;
}

}  // namespace stresslane
