#include "stresslane/stm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace stresslane
{

TvcBands tvc_bands(double v_ego, const std::array<double, 3>& sit, double t_max)
{
  if (!(sit[0] > 0.0 && sit[0] < sit[1] && sit[1] < sit[2] && sit[2] < t_max)) {
    throw std::invalid_argument("safety interval times must satisfy 0 < t1 < t2 < t3 < t_max");
  }
  if (v_ego < 0.0) {
    throw std::invalid_argument("ego speed must be non-negative");
  }
  return {{v_ego * sit[0], v_ego * sit[1], v_ego * sit[2], v_ego * t_max}};
}

DistanceMatrix distance_matrix(const VehicleState& ego, const NeighborView& view)
{
  DistanceMatrix d(view.lane_count(), kNoVehicle);
  for (int lane = 1; lane <= view.lane_count(); ++lane) {
    for (int col = 1; col <= kColumns; ++col) {
      const auto id = view.cell(col, lane);
      if (!id) {
        continue;
      }
      const VehicleState* v = view.state_of(*id);
      if (!v) {
        throw std::logic_error("relative map references a vehicle outside the flat list");
      }
      d.at(lane, col) = v->s - ego.s;
    }
  }
  return d;
}

EventMatrix compute_tem(const DistanceMatrix& d, const TvcBands& bands)
{
  EventMatrix e(d.lanes(), false);
  for (int lane = 1; lane <= d.lanes(); ++lane) {
    for (int col = 1; col <= kColumns; ++col) {
      const double x = d.at(lane, col);
      const double lo = bands.d[static_cast<std::size_t>(col - 1)];
      const double hi = bands.d[static_cast<std::size_t>(col)];
      e.at(lane, col) = lo < x && x < hi;
    }
  }
  return e;
}

EventMatrix event_matrix_from_bits(int lanes, std::string_view bits)
{
  if (bits.size() != static_cast<std::size_t>(lanes * kColumns)) {
    throw std::invalid_argument("event matrix needs lanes * 3 entries");
  }
  EventMatrix e(lanes, false);
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] != '0' && bits[i] != '1') {
      throw std::invalid_argument("event matrix entries must be 0 or 1");
    }
    e.at(static_cast<int>(i) / kColumns + 1, static_cast<int>(i) % kColumns + 1) = bits[i] == '1';
  }
  return e;
}

std::vector<GridCell> CombinationMask::brake_set() const
{
  std::vector<GridCell> out;
  for (int lane = 1; lane <= lanes(); ++lane) {
    for (int col = 1; col <= kColumns; ++col) {
      if (ones.at(lane, col)) {
        out.push_back({lane, col});
      }
    }
  }
  return out;
}

std::optional<int> CombinationMask::column() const
{
  std::optional<int> col;
  for (const GridCell& c : brake_set()) {
    if (col && *col != c.column) {
      return std::nullopt;
    }
    col = c.column;
  }
  return col;
}

CombinationMask make_mask(int id, int lanes, std::string_view pattern)
{
  if (pattern.size() != static_cast<std::size_t>(lanes * kColumns)) {
    throw std::invalid_argument("mask pattern needs lanes * 3 entries");
  }
  CombinationMask mask{id, LaneGrid<bool>(lanes, false)};
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    if (pattern[i] != '1' && pattern[i] != 'X') {
      throw std::invalid_argument("mask entries must be '1' or 'X'");
    }
    mask.ones.at(static_cast<int>(i) / kColumns + 1, static_cast<int>(i) % kColumns + 1) = pattern[i] == '1';
  }
  if (mask.brake_set().empty()) {
    throw std::invalid_argument("mask needs at least one One entry");
  }
  return mask;
}

namespace
{

std::vector<CombinationMask> build_catalog(int lanes, std::initializer_list<std::string_view> patterns)
{
  std::vector<CombinationMask> out;
  int id = 1;
  for (std::string_view p : patterns) {
    out.push_back(make_mask(id++, lanes, p));
  }
  return out;
}

}  // namespace

const std::vector<CombinationMask>& two_lane_catalog()
{
  static const std::vector<CombinationMask> catalog = build_catalog(
      2, {"1XXXXX", "1XX1XX", "X1XXXX", "X1XX1X", "XX1XXX", "XX1XX1", "XXX1XX", "XXXX1X", "XXXXX1"});
  return catalog;
}

const std::vector<CombinationMask>& three_lane_catalog()
{
  // C6 and C9 span two columns and therefore never trigger
  static const std::vector<CombinationMask> catalog =
      build_catalog(3, {"1XX1XX1XX", "X1XX1XX1X", "XX1XX1XX1", "1XXXXXXXX", "XXX1XXXXX", "XX1XXX1XX",
                        "X1XXXXXXX", "XXXX1XXXX", "XX1XXXX1X", "XX1XXXXXX", "XXXXX1XXX", "XXXXXXXX1"});
  return catalog;
}

const std::vector<CombinationMask>& catalog_for(int lanes)
{
  switch (lanes) {
    case 2:
      return two_lane_catalog();
    case 3:
      return three_lane_catalog();
    default:
      throw std::invalid_argument("no combination catalog for " + std::to_string(lanes) + " lanes");
  }
}

EventCounter::EventCounter(int n_ct_max) : cap_(n_ct_max)
{
  if (n_ct_max < 1) {
    throw std::invalid_argument("n_ct_max must be >= 1");
  }
}

int EventCounter::count(int mask_id) const
{
  auto it = counts_.find(mask_id);
  return it == counts_.end() ? 0 : it->second;
}

bool EventCounter::all_saturated(std::span<const CombinationMask> catalog) const
{
  return std::all_of(catalog.begin(), catalog.end(), [this](const CombinationMask& m) {
    return saturated(m.id) || !m.column();
  });
}

void EventCounter::increment(int mask_id)
{
  int& c = counts_[mask_id];
  if (c >= cap_) {
    throw std::logic_error("mask " + std::to_string(mask_id) + " already at its trigger cap");
  }
  ++c;
}

std::optional<TriggerMatch> match_combinations(const EventMatrix& e, std::span<const CombinationMask> catalog,
                                               const EventCounter& counter, int ego_lane)
{
  std::vector<const CombinationMask*> order;
  for (const CombinationMask& m : catalog) {
    if (m.lanes() != e.lanes()) {
      throw std::invalid_argument("mask and event matrix lane counts differ");
    }
    if (m.column()) {
      order.push_back(&m);
    }
  }
  std::stable_sort(order.begin(), order.end(), [](const CombinationMask* a, const CombinationMask* b) {
    return *a->column() != *b->column() ? *a->column() < *b->column() : a->id < b->id;
  });

  for (const CombinationMask* m : order) {
    if (counter.saturated(m->id)) {
      continue;
    }
    const auto cells = m->brake_set();
    const bool hits_ego_lane =
        std::any_of(cells.begin(), cells.end(), [ego_lane](const GridCell& c) { return c.lane == ego_lane; });
    const bool all_set = std::all_of(cells.begin(), cells.end(), [&e](const GridCell& c) {
      return e.at(c.lane, c.column);
    });
    if (hits_ego_lane && all_set) {
      return TriggerMatch{m->id, cells};
    }
  }
  return std::nullopt;
}

bool in_scenario_frame(std::int64_t step, std::int64_t trigger_step, double t_lower, double t_upper, double dt)
{
  // the boundary times are grid points when t_lower / dt is integral; compare
  // step offsets with a small tolerance so those points stay excluded
  const double offset = static_cast<double>(step - trigger_step);
  const double lo = -t_lower / dt;
  const double hi = t_upper / dt;
  constexpr double eps = 1e-9;
  return offset > lo + eps && offset < hi - eps;
}

ScenarioRecord capture_scenario(std::span<const FrameSample> history, std::int64_t trigger_step, double dt,
                                double t_lower, double t_upper, std::span<const VehicleId> relevant)
{
  ScenarioRecord rec;
  rec.trigger_step = trigger_step;
  rec.trigger_time = static_cast<double>(trigger_step) * dt;
  rec.t_lower = t_lower;
  rec.t_upper = t_upper;

  for (const FrameSample& s : history) {
    if (!in_scenario_frame(s.step, trigger_step, t_lower, t_upper, dt)) {
      continue;
    }
    FrameSample copy = s;
    std::erase_if(copy.nearby, [relevant](const VehicleState& v) {
      return std::find(relevant.begin(), relevant.end(), v.id) == relevant.end();
    });
    rec.frame.push_back(std::move(copy));
  }
  if (!rec.frame.empty()) {
    rec.lane_count = rec.frame.front().cells.lanes();
  }

  // count the grid points strictly inside the window to detect truncation
  std::int64_t expected = 0;
  const auto lo_steps = static_cast<std::int64_t>(std::floor(-t_lower / dt)) - 1;
  const auto hi_steps = static_cast<std::int64_t>(std::ceil(t_upper / dt)) + 1;
  for (std::int64_t k = trigger_step + lo_steps; k <= trigger_step + hi_steps; ++k) {
    if (in_scenario_frame(k, trigger_step, t_lower, t_upper, dt)) {
      ++expected;
    }
  }
  rec.partial = static_cast<std::int64_t>(rec.frame.size()) < expected;
  return rec;
}

StmPlugin::StmPlugin(RoadConfig road, StmParameters params, double dt)
    : road_(road),
      params_(std::move(params)),
      dt_(dt),
      counter_(params_.n_ct_max),
      scheduler_(params_.lce, road.lane_count)
{
  if (dt_ <= 0.0) {
    throw std::invalid_argument("dt must be positive");
  }
  if (params_.t_lower <= 0.0 || params_.t_upper <= 0.0) {
    throw std::invalid_argument("scenario frame bounds must be positive");
  }
  catalog_for(road_.lane_count);  // reject unsupported lane counts early
  tvc_bands(0.0, params_.sit, params_.t_max);
  ring_capacity_ = static_cast<std::size_t>(std::ceil((params_.t_lower + params_.t_upper) / dt_)) + 2;
}

void StmPlugin::log(const SimClock& clock, const std::string& text)
{
  char head[48];
  std::snprintf(head, sizeof head, "t=%.2f step=%lld ", clock.t(), static_cast<long long>(clock.step_index));
  log_.push_back(head + text);
}

bool StmPlugin::busy(VehicleId id) const
{
  return std::any_of(maneuvers_.begin(), maneuvers_.end(), [id](const ActiveManeuver& m) { return m.id == id; });
}

FrameSample StmPlugin::make_sample(const SimClock& clock, const VehicleState& ego, const NeighborView& view,
                                   const DistanceMatrix& d) const
{
  FrameSample s;
  s.step = clock.step_index;
  s.time = clock.t();
  s.s_ego = ego.s;
  s.v_ego = ego.v;
  s.a_ego = ego.a;
  s.distance_ego = ego.distance;
  s.lane_ego = ego.lane;
  s.cells = LaneGrid<std::optional<CellSample>>(view.lane_count(), std::nullopt);
  for (int lane = 1; lane <= view.lane_count(); ++lane) {
    for (int col = 1; col <= kColumns; ++col) {
      const auto id = view.cell(col, lane);
      if (!id) {
        continue;
      }
      const VehicleState* v = view.state_of(*id);
      s.cells.at(lane, col) = CellSample{v->id, v->s, v->v, v->a, v->distance, d.at(lane, col)};
    }
  }
  constexpr double kNearbyRange = 60.0;
  for (const VehicleState& v : view.flat) {
    const double dist = v.s - ego.s;
    if (std::abs(dist) <= kNearbyRange) {
      s.nearby.push_back(v);
    }
    const double gap = v.s - ego.front();
    if (covers_lane(v, ego.lane, road_.lane_width) && dist > 0.0 && (!s.lead || gap < s.lead->gap)) {
      s.lead = LeadSample{v.id, gap, v.v, v.a};
    }
  }
  return s;
}

void StmPlugin::seal(const OpenCapture& capture, bool truncated)
{
  std::vector<FrameSample> history(ring_.begin(), ring_.end());
  std::vector<VehicleId> relevant = capture.triggered;
  ScenarioRecord rec =
      capture_scenario(history, capture.trigger_step, dt_, params_.t_lower, params_.t_upper, relevant);
  rec.kind = capture.kind;
  rec.mask_id = capture.mask_id;
  rec.triggered = capture.triggered;
  rec.lane_count = road_.lane_count;
  rec.partial = rec.partial || truncated;
  for (const CollisionNote& c : collisions_) {
    const auto step = static_cast<std::int64_t>(std::llround(c.time / dt_));
    if (in_scenario_frame(step, capture.trigger_step, params_.t_lower, params_.t_upper, dt_)) {
      rec.collisions.push_back(c);
    }
  }
  sealed_.push_back(std::move(rec));
}

void StmPlugin::try_braking(const SimClock& clock, const VehicleState& ego, const NeighborView& view,
                            const EventMatrix& e)
{
  const auto& catalog = catalog_for(road_.lane_count);
  const bool braking_active = std::any_of(maneuvers_.begin(), maneuvers_.end(), [](const ActiveManeuver& m) {
    return m.kind == EventKind::braking;
  });
  if (braking_active || counter_.all_saturated(catalog)) {
    return;
  }
  const auto match = match_combinations(e, catalog, counter_, ego.lane);
  if (!match) {
    return;
  }

  std::vector<std::pair<VehicleId, ManeuverProfile>> planned;
  for (const GridCell& c : match->brake_set) {
    const VehicleId id = *view.cell(c.column, c.lane);
    if (busy(id)) {
      return;  // a cut-in is still running on this vehicle
    }
    const VehicleState* v = view.state_of(id);
    const double v_final = kmh_to_ms(params_.v_final_kmh);
    if (v->v <= v_final) {
      log(clock, "skip vehicle " + std::to_string(id) + ": already below the final speed");
      continue;
    }
    try {
      if (params_.braking == BrakingModel::driver) {
        DriverBrakeParams p = params_.driver;
        p.v_final_kmh = params_.v_final_kmh;
        planned.emplace_back(id, driver_brake_profile(v->v, p, dt_));
      } else {
        planned.emplace_back(id, acc_brake_profile(params_.acc, v->v, v_final, dt_));
      }
    } catch (const InfeasibleManeuver& ex) {
      log(clock, "skip vehicle " + std::to_string(id) + ": " + ex.what());
    }
  }
  if (planned.empty()) {
    log(clock, "mask C" + std::to_string(match->mask_id) + " matched but no vehicle could brake");
    return;
  }

  counter_.increment(match->mask_id);
  std::vector<VehicleId> ids;
  for (auto& [id, profile] : planned) {
    ids.push_back(id);
    maneuvers_.push_back({id, std::move(profile), clock.step_index, EventKind::braking});
  }
  open_.push_back({clock.step_index, EventKind::braking, match->mask_id, ids});
  triggers_.push_back({clock.step_index, clock.t(), EventKind::braking, match->mask_id, ids});

  std::string text = "braking mask=C" + std::to_string(match->mask_id) + " count=" +
                     std::to_string(counter_.count(match->mask_id)) + " vehicles=";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    text += (i ? "," : "") + std::to_string(ids[i]);
  }
  log(clock, text);
}

void StmPlugin::try_lane_change(const SimClock& clock, const VehicleState& ego, const NeighborView& view)
{
  if (params_.lce.t_m <= 0.0 || !scheduler_.due(clock.t())) {
    return;
  }
  std::vector<VehicleId> busy_ids;
  for (const ActiveManeuver& m : maneuvers_) {
    busy_ids.push_back(m.id);
  }
  const auto decision = scheduler_.poll(clock.t(), ego, view.flat, busy_ids);
  if (!decision) {
    return;
  }
  const VehicleState* v = view.state_of(decision->vehicle);
  LceParams p = params_.lce;
  p.h = road_.lane_width;
  maneuvers_.push_back({v->id, lane_change_trajectory(p, v->v, decision->direction, dt_), clock.step_index,
                        EventKind::lane_change});
  open_.push_back({clock.step_index, EventKind::lane_change, std::nullopt, {v->id}});
  triggers_.push_back({clock.step_index, clock.t(), EventKind::lane_change, -1, {v->id}});
  log(clock, "lane_change vehicle=" + std::to_string(v->id) + " from_lane=" + std::to_string(v->lane) +
                 " direction=" + (decision->direction == LaneDirection::left ? "left" : "right"));
}

std::vector<VehicleCommand> StmPlugin::inject(const SimClock& clock, const VehicleState& ego,
                                              const NeighborView& view)
{
  std::vector<VehicleCommand> commands;

  // running maneuvers first: sample j drives the step from t_j to t_j + dt
  for (auto it = maneuvers_.begin(); it != maneuvers_.end();) {
    const auto j = static_cast<std::size_t>(clock.step_index - it->start_step);
    const ManeuverProfile& p = it->profile;
    // a vehicle outside the view has left the road or the neighbourhood
    if (j + 1 >= p.size() || !view.state_of(it->id)) {
      commands.push_back(VehicleCommand::release_of(it->id));
      it = maneuvers_.erase(it);
      continue;
    }
    VehicleCommand cmd{it->id, p.a[j], std::nullopt, false};
    if (it->kind == EventKind::lane_change) {
      cmd.lateral_rate = (p.y_lat[j + 1] - p.y_lat[j]) / p.dt;
    }
    commands.push_back(cmd);
    ++it;
  }

  if (view.ego_missing) {
    pending_collisions_.clear();
    return commands;
  }

  const TvcBands bands = tvc_bands(ego.v, params_.sit, params_.t_max);
  const DistanceMatrix d = distance_matrix(ego, view);
  const EventMatrix e = compute_tem(d, bands);

  FrameSample sample = make_sample(clock, ego, view, d);
  for (const CollisionNote& c : pending_collisions_) {
    sample.ego_collision = sample.ego_collision || c.a == ego.id || c.b == ego.id;
    collisions_.push_back(c);
  }
  pending_collisions_.clear();
  ring_.push_back(std::move(sample));
  while (ring_.size() > ring_capacity_) {
    ring_.pop_front();
  }
  while (!collisions_.empty() && collisions_.front().time < clock.t() - params_.t_lower - params_.t_upper - 1.0) {
    collisions_.pop_front();
  }

  // seal captures whose window has fully elapsed
  for (auto it = open_.begin(); it != open_.end();) {
    const auto last_inside = static_cast<double>(clock.step_index + 1 - it->trigger_step) * dt_;
    if (last_inside >= params_.t_upper - 1e-9) {
      seal(*it, false);
      it = open_.erase(it);
    } else {
      ++it;
    }
  }

  // new commands only start on the next call, so a fresh maneuver's first
  // sample is emitted here directly
  const std::size_t before = maneuvers_.size();
  try_braking(clock, ego, view, e);
  try_lane_change(clock, ego, view);
  for (std::size_t i = before; i < maneuvers_.size(); ++i) {
    const ActiveManeuver& m = maneuvers_[i];
    VehicleCommand cmd{m.id, m.profile.a[0], std::nullopt, false};
    if (m.kind == EventKind::lane_change) {
      cmd.lateral_rate = (m.profile.y_lat[1] - m.profile.y_lat[0]) / m.profile.dt;
    }
    commands.push_back(cmd);
  }
  return commands;
}

void StmPlugin::on_finish(const InjectorSummary& /*summary*/)
{
  for (const OpenCapture& c : open_) {
    seal(c, true);
  }
  open_.clear();
}

void StmPlugin::note_collision(double time, VehicleId a, VehicleId b)
{
  pending_collisions_.push_back({time, a, b});
}

void StmPlugin::note_removed(VehicleId id)
{
  std::erase_if(maneuvers_, [id](const ActiveManeuver& m) { return m.id == id; });
}

std::vector<ScenarioRecord> StmPlugin::take_sealed()
{
  std::vector<ScenarioRecord> out;
  out.swap(sealed_);
  return out;
}

}  // namespace stresslane
