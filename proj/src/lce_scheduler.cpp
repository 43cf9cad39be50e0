#include "stresslane/lce_scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stresslane
{

LceScheduler::LceScheduler(LceParams params, int lane_count) : params_(std::move(params)), lane_count_(lane_count)
{
  if (lane_count_ < 2) {
    throw std::invalid_argument("cut-ins need at least two lanes");
  }
  if (lane_count_ == 2) {
    catalog_ = {CutInSide::from_left, CutInSide::from_right};
  } else {
    catalog_ = {CutInSide::from_left, CutInSide::from_right, CutInSide::either};
  }
}

bool LceScheduler::due(double t) const
{
  if (last_fire_ && t - *last_fire_ < params_.t_int_min) {
    return false;
  }
  const auto first_cycle = static_cast<std::size_t>(fired_);
  if (first_cycle < catalog_.size() && first_cycle < params_.init_times.size()) {
    return t >= params_.init_times[first_cycle];
  }
  return true;
}

std::optional<VehicleId> LceScheduler::candidate(const VehicleState& ego, int source,
                                                 std::span<const VehicleState> neighbors,
                                                 std::span<const VehicleId> busy) const
{
  if (source < 1 || source > lane_count_) {
    return std::nullopt;
  }
  const double lo = ego.front() - params_.window_behind;
  const double hi = ego.s + params_.window_ahead;
  std::optional<VehicleId> best;
  double best_d = 0.0;
  for (const VehicleState& v : neighbors) {
    if (v.lane != source || v.kind != VehicleKind::traffic || v.controlled_by != Controller::internal_model) {
      continue;
    }
    if (std::abs(v.y_lat) > 1e-9 || v.s < lo || v.s > hi) {
      continue;
    }
    if (std::find(busy.begin(), busy.end(), v.id) != busy.end()) {
      continue;
    }
    const double d = std::abs(v.s - ego.s);
    if (!best || d < best_d || (d == best_d && v.id < *best)) {
      best = v.id;
      best_d = d;
    }
  }
  return best;
}

std::optional<LceDecision> LceScheduler::poll(double t, const VehicleState& ego,
                                              std::span<const VehicleState> neighbors,
                                              std::span<const VehicleId> busy)
{
  if (!due(t)) {
    return std::nullopt;
  }
  const CutInSide side = catalog_[static_cast<std::size_t>(cursor_)];
  std::optional<LceDecision> decision;
  auto try_side = [&](CutInSide s) {
    // a vehicle in the lane to the left moves right into the ego lane
    const bool left = s == CutInSide::from_left;
    const int source = left ? ego.lane - 1 : ego.lane + 1;
    if (auto id = candidate(ego, source, neighbors, busy)) {
      decision = LceDecision{*id, left ? LaneDirection::right : LaneDirection::left, cursor_};
    }
  };
  if (side == CutInSide::either) {
    try_side(CutInSide::from_left);
    if (!decision) {
      try_side(CutInSide::from_right);
    }
  } else {
    try_side(side);
  }
  if (decision) {
    cursor_ = (cursor_ + 1) % static_cast<int>(catalog_.size());
    ++fired_;
    last_fire_ = t;
  }
  return decision;
}

}  // namespace stresslane
