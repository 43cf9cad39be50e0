#include "stresslane/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace stresslane
{

double idm_acceleration(const IdmParams& p, double v, double v_desired, const std::optional<LeaderInfo>& leader)
{
  const double v0 = std::max(v_desired, 0.1);
  double a = p.a_max * (1.0 - std::pow(v / v0, p.delta));
  if (leader) {
    const double dv = v - leader->v;
    const double s_star =
      p.jam_distance + std::max(0.0, v * p.time_headway + v * dv / (2.0 * std::sqrt(p.a_max * p.b_comf)));
    const double gap = std::max(leader->gap, 0.01);
    a -= p.a_max * (s_star / gap) * (s_star / gap);
  }
  return std::clamp(a, -p.max_decel, p.a_max);
}

double required_decel(double v, const LeaderInfo& leader, double standstill_gap)
{
  const double room = leader.gap - standstill_gap;
  if (room <= 0.0) {
    return v > 0.0 || leader.v < v ? std::numeric_limits<double>::infinity() : 0.0;
  }
  double need = 0.0;
  if (v > leader.v) {
    need = (v - leader.v) * (v - leader.v) / (2.0 * room);
  }
  if (leader.a < -0.5) {
    // leader is braking to a stop: both stopping distances must fit in the gap
    const double leader_stop = leader.v * leader.v / (2.0 * -leader.a);
    need = std::max(need, v * v / (2.0 * (room + leader_stop)));
  }
  return need;
}

EgoCommand ego_acceleration(const EgoControllerParams& p, double v, const std::optional<LeaderInfo>& leader)
{
  double cmd = std::min(p.free_gain * (p.set_speed - v), p.acc_max_accel);
  if (!leader) {
    return {std::clamp(cmd, -p.acc_max_decel, p.acc_max_accel), false};
  }
  const double desired_gap = std::max(p.standstill_gap, p.time_gap * v);
  const double follow = p.gap_gain * (leader->gap - desired_gap) + p.speed_gain * (leader->v - v);
  cmd = std::clamp(std::min(cmd, follow), -p.acc_max_decel, p.acc_max_accel);

  const double need = required_decel(v, *leader, 1.0);
  if (need > p.acc_max_decel) {
    const double brake = std::min(p.emergency_decel, std::max(1.1 * need, -cmd));
    return {-brake, true};
  }
  return {cmd, false};
}

World::World(RoadConfig road, TrafficDemand demand, double dt)
  : road_(road), demand_(demand), rng_(demand.seed)
{
  if (road_.lane_count < 1) {
    throw std::invalid_argument("road needs at least one lane");
  }
  if (dt <= 0.0) {
    throw std::invalid_argument("dt must be positive");
  }
  clock_.dt = dt;
  lane_index_.resize(static_cast<std::size_t>(road_.lane_count) + 1);
  lane_pos_.resize(static_cast<std::size_t>(road_.lane_count) + 1);
  pending_.assign(static_cast<std::size_t>(road_.lane_count) + 1, 0);
}

void World::set_ego_setup(const EgoSetup& setup)
{
  ego_setup_ = setup;
  if (!setup.enabled) {
    return;
  }
  Vehicle ego;
  ego.state.id = next_id_++;
  ego.state.kind = VehicleKind::ego;
  ego.state.lane = std::clamp(setup.lane, 1, road_.lane_count);
  ego.state.v = setup.initial_speed;
  ego.v_desired = ego_params_.set_speed;
  ego_id_ = ego.state.id;
  parked_ego_ = ego;
}

std::vector<VehicleState> World::states() const
{
  std::vector<VehicleState> out;
  out.reserve(vehicles_.size());
  for (const auto& v : vehicles_) {
    out.push_back(v.state);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

World::Vehicle* World::lookup(VehicleId id)
{
  auto it = std::find_if(vehicles_.begin(), vehicles_.end(), [id](const Vehicle& v) { return v.state.id == id; });
  return it == vehicles_.end() ? nullptr : &*it;
}

const World::Vehicle* World::lookup(VehicleId id) const
{
  auto it = std::find_if(vehicles_.begin(), vehicles_.end(), [id](const Vehicle& v) { return v.state.id == id; });
  return it == vehicles_.end() ? nullptr : &*it;
}

const VehicleState* World::find(VehicleId id) const
{
  const Vehicle* v = lookup(id);
  return v ? &v->state : nullptr;
}

std::optional<VehicleState> World::ego() const
{
  if (ego_id_ == 0) {
    return std::nullopt;
  }
  if (const VehicleState* s = find(ego_id_)) {
    return *s;
  }
  return std::nullopt;
}

double World::ego_distance() const
{
  if (parked_ego_) {
    return parked_ego_->state.distance;
  }
  const VehicleState* s = ego_id_ ? find(ego_id_) : nullptr;
  return s ? s->distance : 0.0;
}

VehicleId World::add_vehicle(VehicleState state, double v_desired)
{
  if (state.lane < 1 || state.lane > road_.lane_count) {
    throw std::invalid_argument("lane index outside road");
  }
  state.id = next_id_++;
  if (state.kind == VehicleKind::ego) {
    if (ego_id_ != 0) {
      throw std::invalid_argument("world already has an ego vehicle");
    }
    ego_id_ = state.id;
  }
  Vehicle v;
  v.state = state;
  v.v_desired = v_desired;
  vehicles_.push_back(v);
  rebuild_lane_index();
  return state.id;
}

void World::remove_vehicle(VehicleId id)
{
  std::erase_if(vehicles_, [id](const Vehicle& v) { return v.state.id == id; });
  rebuild_lane_index();
}

void World::rebuild_lane_index()
{
  for (auto& lane : lane_index_) {
    lane.clear();
  }
  for (std::size_t i = 0; i < vehicles_.size(); ++i) {
    for (int lane = 1; lane <= road_.lane_count; ++lane) {
      if (covers_lane(vehicles_[i].state, lane, road_.lane_width)) {
        lane_index_[lane].push_back(i);
      }
    }
  }
  for (auto& lane : lane_index_) {
    std::sort(lane.begin(), lane.end(), [this](std::size_t a, std::size_t b) {
      const auto& sa = vehicles_[a].state;
      const auto& sb = vehicles_[b].state;
      return sa.s != sb.s ? sa.s < sb.s : sa.id < sb.id;
    });
  }
  for (int lane = 1; lane <= road_.lane_count; ++lane) {
    auto& pos = lane_pos_[lane];
    pos.assign(vehicles_.size(), -1);
    const auto& list = lane_index_[lane];
    for (std::size_t k = 0; k < list.size(); ++k) {
      pos[list[k]] = static_cast<int>(k);
    }
  }
}

std::optional<std::size_t> World::leader_index(std::size_t idx, double min_intrusion) const
{
  std::optional<std::size_t> best;
  for (int lane = 1; lane <= road_.lane_count; ++lane) {
    const auto& list = lane_index_[lane];
    const int pos = lane_pos_[lane][idx];
    if (pos < 0) {
      continue;
    }
    for (std::size_t k = static_cast<std::size_t>(pos) + 1; k < list.size(); ++k) {
      const VehicleState& cand = vehicles_[list[k]].state;
      if (best && cand.s > vehicles_[*best].state.s) {
        break;
      }
      if (min_intrusion > 0.0 && lane_intrusion(cand, lane, road_.lane_width) < min_intrusion) {
        continue;
      }
      if (!best || cand.s < vehicles_[*best].state.s ||
          (cand.s == vehicles_[*best].state.s && cand.id < vehicles_[*best].state.id)) {
        best = list[k];
      }
      break;
    }
  }
  return best;
}

std::optional<LeaderInfo> World::leader_info(std::size_t idx, double min_intrusion) const
{
  const auto lead = leader_index(idx, min_intrusion);
  if (!lead) {
    return std::nullopt;
  }
  const VehicleState& me = vehicles_[idx].state;
  const VehicleState& other = vehicles_[*lead].state;
  return LeaderInfo{other.s - me.front(), other.v, other.a};
}

std::optional<VehicleState> World::leader_of(VehicleId id) const
{
  for (std::size_t i = 0; i < vehicles_.size(); ++i) {
    if (vehicles_[i].state.id == id) {
      const auto lead = leader_index(i);
      return lead ? std::optional<VehicleState>(vehicles_[*lead].state) : std::nullopt;
    }
  }
  return std::nullopt;
}

bool World::entry_clear(int lane, double v_desired, double* entry_speed) const
{
  constexpr double kNewLength = 4.5;
  // the nearest vehicle covering the lane or about to move into it
  const VehicleState* first = nullptr;
  if (!lane_index_[lane].empty()) {
    first = &vehicles_[lane_index_[lane].front()].state;
  }
  for (const Vehicle& v : vehicles_) {
    const bool entering = v.plan && v.state.lane + v.plan->direction == lane;
    if (entering && (!first || v.state.s < first->s)) {
      first = &v.state;
    }
  }
  if (!first) {
    *entry_speed = v_desired;
    return true;
  }
  const double gap = first->s - kNewLength;
  if (gap < 2.0 * v_desired || gap <= idm_.jam_distance) {
    return false;
  }
  *entry_speed = gap < 200.0 ? std::min(v_desired, first->v) : v_desired;
  return true;
}

void World::try_insert_ego()
{
  if (!parked_ego_ || clock_.t() < ego_setup_.insert_time) {
    return;
  }
  const int preferred = parked_ego_->state.lane;
  std::vector<int> lanes{preferred};
  for (int lane = 1; lane <= road_.lane_count; ++lane) {
    if (lane != preferred) {
      lanes.push_back(lane);
    }
  }
  for (const int lane : lanes) {
    double speed = 0.0;
    const double v_ref = std::max(parked_ego_->state.v, 1.0);
    if (entry_clear(lane, v_ref, &speed)) {
      Vehicle ego = *parked_ego_;
      ego.state.lane = lane;
      ego.state.s = 0.0;
      ego.state.y_lat = 0.0;
      ego.state.v = std::min(ego.state.v, speed);
      ego.state.a = 0.0;
      ego.plan.reset();
      vehicles_.push_back(ego);
      parked_ego_.reset();
      rebuild_lane_index();
      return;
    }
  }
}

SpawnStats World::spawn_step()
{
  rebuild_lane_index();
  try_insert_ego();

  SpawnStats stats;
  const double rate = demand_.inflow_per_lane / 3600.0 * clock_.dt;
  std::normal_distribution<double> desired(demand_.desired_speed_mean, demand_.desired_speed_sd);
  for (int lane = 1; lane <= road_.lane_count; ++lane) {
    if (rate > 0.0) {
      std::poisson_distribution<int> arrivals(rate);
      const int n = arrivals(rng_);
      stats.arrivals += n;
      pending_[lane] += n;
    }
    if (pending_[lane] == 0) {
      continue;
    }
    const double v_des = std::clamp(desired(rng_), 0.6 * demand_.desired_speed_mean,
                                    1.4 * demand_.desired_speed_mean);
    double speed = 0.0;
    if (!entry_clear(lane, v_des, &speed)) {
      continue;
    }
    Vehicle v;
    v.state.id = next_id_++;
    v.state.kind = VehicleKind::traffic;
    v.state.lane = lane;
    v.state.v = speed;
    v.v_desired = v_des;
    vehicles_.push_back(v);
    --pending_[lane];
    ++stats.spawned;
    rebuild_lane_index();
  }
  return stats;
}

void World::compute_controls()
{
  rebuild_lane_index();
  for (std::size_t i = 0; i < vehicles_.size(); ++i) {
    Vehicle& veh = vehicles_[i];
    if (veh.state.kind == VehicleKind::ego) {
      const auto leader = leader_info(i, ego_params_.cut_in_detection);
      veh.control_a = ego_acceleration(ego_params_, veh.state.v, leader).a;
    } else {
      veh.control_a = idm_acceleration(idm_, veh.state.v, veh.v_desired, leader_info(i));
    }
  }

  std::vector<std::pair<std::size_t, int>> committed;
  for (std::size_t i = 0; i < vehicles_.size(); ++i) {
    consider_lane_change(i, committed);
  }
}

void World::consider_lane_change(std::size_t idx, std::vector<std::pair<std::size_t, int>>& committed)
{
  Vehicle& veh = vehicles_[idx];
  const VehicleState& me = veh.state;
  const bool is_ego = me.kind == VehicleKind::ego;
  if (veh.plan || veh.accel_override || veh.lateral_rate || me.y_lat != 0.0 ||
      clock_.t() < veh.lc_blocked_until || (is_ego && !ego_params_.lane_changes)) {
    return;
  }
  // each vehicle reconsiders once per second, staggered by id
  if ((clock_.step_index + me.id) % 10 != 0) {
    return;
  }

  const auto current = leader_info(idx);
  const double a_current = idm_acceleration(idm_, me.v, veh.v_desired, current);
  if (!current && a_current >= 0.0) {
    return;
  }

  double best_gain = -std::numeric_limits<double>::infinity();
  int best_dir = 0;
  for (const int dir : {-1, 1}) {
    const int target = me.lane + dir;
    if (target < 1 || target > road_.lane_count) {
      continue;
    }
    std::vector<std::size_t> occupants = lane_index_[target];
    for (const auto& [other, lane] : committed) {
      if (lane == target) {
        occupants.push_back(other);
      }
    }
    for (std::size_t i = 0; i < vehicles_.size(); ++i) {
      if (vehicles_[i].plan && vehicles_[i].state.lane + vehicles_[i].plan->direction == target) {
        occupants.push_back(i);
      }
    }

    const Vehicle* lead = nullptr;
    const Vehicle* follow = nullptr;
    bool blocked = false;
    for (const std::size_t o : occupants) {
      if (o == idx) {
        continue;
      }
      const Vehicle& other = vehicles_[o];
      if (other.state.front() > me.s && other.state.s < me.front()) {
        blocked = true;  // alongside
        break;
      }
      if (other.state.s >= me.s) {
        if (!lead || other.state.s < lead->state.s) {
          lead = &other;
        }
      } else if (!follow || other.state.s > follow->state.s) {
        follow = &other;
      }
    }
    if (blocked) {
      continue;
    }

    std::optional<LeaderInfo> new_leader;
    if (lead) {
      const double gap = lead->state.s - me.front();
      if (gap <= idm_.jam_distance) {
        continue;
      }
      new_leader = LeaderInfo{gap, lead->state.v, lead->state.a};
    }
    const double a_new = is_ego ? ego_acceleration(ego_params_, me.v, new_leader).a
                                : idm_acceleration(idm_, me.v, veh.v_desired, new_leader);
    if (a_new < -idm_.lc_safe_decel) {
      continue;
    }
    if (is_ego && new_leader && required_decel(me.v, *new_leader, 1.0) > 0.5 * ego_params_.acc_max_decel) {
      continue;
    }
    if (follow) {
      const double gap = me.s - follow->state.front();
      if (gap <= idm_.jam_distance) {
        continue;
      }
      const LeaderInfo as_leader{gap, me.v, 0.0};
      double a_follow = 0.0;
      if (follow->state.kind == VehicleKind::ego) {
        const EgoCommand cmd = ego_acceleration(ego_params_, follow->state.v, as_leader);
        if (cmd.emergency) {
          continue;
        }
        a_follow = cmd.a;
      } else {
        a_follow = idm_acceleration(idm_, follow->state.v, follow->v_desired, as_leader);
      }
      if (a_follow < -idm_.lc_safe_decel) {
        continue;
      }
    }

    const double a_reference = is_ego ? ego_acceleration(ego_params_, me.v, current).a : a_current;
    double gain = a_new - a_reference;
    if (dir > 0) {
      gain += idm_.lc_right_bias;
    }
    if (gain > idm_.lc_threshold && gain > best_gain) {
      best_gain = gain;
      best_dir = dir;
    }
  }

  if (best_dir != 0) {
    const double duration = is_ego ? ego_params_.lc_duration : idm_.lc_duration;
    veh.plan = LateralPlan{best_dir, road_.lane_width, duration};
    veh.lc_blocked_until = clock_.t() + duration + idm_.lc_cooldown;
    committed.emplace_back(idx, me.lane + best_dir);
  }
}

bool World::start_lane_change(VehicleId id, LaneDirection direction, double duration)
{
  Vehicle* veh = lookup(id);
  if (!veh || veh->plan || duration <= 0.0) {
    return false;
  }
  const int target = veh->state.lane + sign_of(direction);
  if (target < 1 || target > road_.lane_count) {
    return false;
  }
  veh->plan = LateralPlan{sign_of(direction), road_.lane_width, duration};
  return true;
}

bool World::set_override(VehicleId id, std::optional<double> accel, std::optional<double> lateral_rate)
{
  Vehicle* veh = lookup(id);
  if (!veh) {
    return false;
  }
  if (accel) {
    veh->accel_override = accel;
  }
  if (lateral_rate) {
    veh->lateral_rate = lateral_rate;
    veh->plan.reset();
  }
  if (veh->accel_override || veh->lateral_rate) {
    veh->state.controlled_by = Controller::stm_plugin;
  }
  return true;
}

bool World::release(VehicleId id)
{
  Vehicle* veh = lookup(id);
  if (!veh) {
    return false;
  }
  veh->accel_override.reset();
  veh->lateral_rate.reset();
  veh->state.controlled_by = Controller::internal_model;
  if (std::abs(veh->state.y_lat) < 1e-6) {
    veh->state.y_lat = 0.0;
  } else if (!veh->plan) {
    // re-centre in the current lane
    const int dir = veh->state.y_lat > 0.0 ? -1 : 1;
    veh->plan = LateralPlan{dir, std::abs(veh->state.y_lat), 2.0};
  }
  veh->lc_blocked_until = clock_.t() + idm_.lc_cooldown;
  return true;
}

void World::advance()
{
  const double dt = clock_.dt;
  const double half = road_.lane_width / 2.0;
  for (auto& veh : vehicles_) {
    VehicleState& st = veh.state;
    const double a = veh.accel_override.value_or(veh.control_a);
    const double v_next = st.v + a * dt;
    if (v_next < 0.0) {
      st.a = -st.v / dt;
      st.v = 0.0;
    } else {
      st.a = a;
      st.v = v_next;
    }
    st.s += st.v * dt;
    st.distance += st.v * dt;

    double dy = 0.0;
    bool plan_done = false;
    if (veh.lateral_rate) {
      dy = *veh.lateral_rate * dt;
    } else if (veh.plan) {
      LateralPlan& p = *veh.plan;
      const double before = lane_change_offset(p.h, p.duration, p.elapsed);
      p.elapsed += dt;
      const double after = lane_change_offset(p.h, p.duration, p.elapsed);
      dy = p.direction * (after - before);
      plan_done = p.elapsed >= p.duration - 1e-9;
    }
    st.y_lat += dy;
    if (st.y_lat > half && st.lane < road_.lane_count) {
      ++st.lane;
      st.y_lat -= road_.lane_width;
    } else if (st.y_lat < -half && st.lane > 1) {
      --st.lane;
      st.y_lat += road_.lane_width;
    }
    st.y_lat = std::clamp(st.y_lat, -half, half);
    if (plan_done) {
      veh.plan.reset();
      if (std::abs(st.y_lat) < 1e-6) {
        st.y_lat = 0.0;
      }
    }
  }

  ++clock_.step_index;

  for (auto it = vehicles_.begin(); it != vehicles_.end();) {
    if (it->state.s <= road_.length) {
      ++it;
      continue;
    }
    if (it->state.kind == VehicleKind::ego) {
      parked_ego_ = *it;
      ++ego_laps_;
    }
    it = vehicles_.erase(it);
  }
  rebuild_lane_index();
}

void World::step()
{
  spawn_step();
  compute_controls();
  advance();
}

}  // namespace stresslane
