#include "stresslane/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace stresslane
{

std::string_view to_string(CriticalityLabel label)
{
  switch (label) {
    case CriticalityLabel::not_critical:
      return "not_critical";
    case CriticalityLabel::eventually_critical:
      return "eventually_critical";
    case CriticalityLabel::very_critical:
      return "very_critical";
  }
  return "unknown";
}

double time_to_brake(double gap, double v_rel, double a_max)
{
  if (a_max <= 0.0) {
    throw std::invalid_argument("a_max must be positive");
  }
  if (v_rel <= 0.0) {
    return std::numeric_limits<double>::infinity();
  }
  return (gap - v_rel * v_rel / (2.0 * a_max)) / v_rel;
}

CriticalityLabel instant_level(double v_ego, const LeaderInfo& lead, const CriticalityThresholds& th)
{
  const double ttb = time_to_brake(lead.gap, v_ego - lead.v, th.ttb_max_decel);
  const double need = required_decel(v_ego, lead, 0.0);
  if (lead.gap <= 0.0 || ttb < th.ttb_very || need > th.decel_very) {
    return CriticalityLabel::very_critical;
  }
  if (ttb < th.ttb_eventually || need > th.decel_eventually) {
    return CriticalityLabel::eventually_critical;
  }
  return CriticalityLabel::not_critical;
}

bool footprints_overlap(const VehicleState& a, const VehicleState& b, double lane_width)
{
  const bool longitudinal = a.s < b.front() && b.s < a.front();
  const double ca = lateral_center(a, lane_width);
  const double cb = lateral_center(b, lane_width);
  const bool lateral = std::abs(ca - cb) < 0.5 * (a.width + b.width);
  return longitudinal && lateral;
}

std::vector<CollisionEvent> CollisionDetector::detect(const std::vector<VehicleState>& states, double time,
                                                      double lane_width, VehicleId ego_id)
{
  std::vector<const VehicleState*> order;
  order.reserve(states.size());
  for (const VehicleState& v : states) {
    order.push_back(&v);
  }
  std::sort(order.begin(), order.end(), [](const VehicleState* a, const VehicleState* b) { return a->s < b->s; });

  std::set<std::pair<VehicleId, VehicleId>> now;
  std::vector<CollisionEvent> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (std::size_t j = i + 1; j < order.size() && order[j]->s < order[i]->front(); ++j) {
      if (!footprints_overlap(*order[i], *order[j], lane_width)) {
        continue;
      }
      const auto key = std::minmax(order[i]->id, order[j]->id);
      now.insert(key);
      if (!touching_.contains(key)) {
        out.push_back({time, key.first, key.second, key.first == ego_id || key.second == ego_id});
      }
    }
  }
  touching_ = std::move(now);
  std::sort(out.begin(), out.end(), [](const CollisionEvent& x, const CollisionEvent& y) {
    return std::tie(x.a, x.b) < std::tie(y.a, y.b);
  });
  return out;
}

CriticalityLabel classify(const ScenarioRecord& record, const CriticalityThresholds& th)
{
  CriticalityLabel worst = CriticalityLabel::not_critical;
  for (const FrameSample& s : record.frame) {
    if (s.ego_collision) {
      return CriticalityLabel::very_critical;
    }
    if (s.lead) {
      worst = std::max(worst, instant_level(s.v_ego, {s.lead->gap, s.lead->v, s.lead->a}, th));
    }
  }
  return worst;
}

void CriticalityMonitor::observe(double time, double v_ego, const std::optional<LeaderInfo>& lead,
                                 bool ego_collision)
{
  CriticalityLabel level = CriticalityLabel::not_critical;
  if (ego_collision) {
    level = CriticalityLabel::very_critical;
  } else if (lead) {
    level = instant_level(v_ego, *lead, th_);
  }

  if (level != CriticalityLabel::not_critical) {
    if (!open_) {
      open_ = true;
      peak_ = level;
    }
    peak_ = std::max(peak_, level);
    last_critical_ = time;
  } else if (open_ && time - last_critical_ >= th_.hysteresis) {
    close_episode();
  }
}

void CriticalityMonitor::finish()
{
  if (open_) {
    close_episode();
  }
}

void CriticalityMonitor::close_episode()
{
  if (peak_ == CriticalityLabel::very_critical) {
    ++very_;
  } else {
    ++eventually_;
  }
  open_ = false;
  peak_ = CriticalityLabel::not_critical;
}

std::string summary_csv_header()
{
  return "seed,km,stm,collisions,eventually_critical,very_critical,traffic_collisions,braking_events,"
         "lane_change_events,scenarios,partial_scenarios,incidents,sim_time_s";
}

std::string summary_csv_row(const RunSummary& s)
{
  char buf[256];
  std::snprintf(buf, sizeof buf, "%llu,%.3f,%s,%d,%d,%d,%d,%d,%d,%d,%d,%d,%.2f",
                static_cast<unsigned long long>(s.seed), s.km, s.stm_on ? "on" : "off", s.ego_collisions,
                s.eventually_critical, s.very_critical, s.traffic_collisions, s.braking_events,
                s.lane_change_events, s.scenarios, s.partial_scenarios, s.incidents, s.sim_time);
  return buf;
}

RunComparison compare_runs(const RunSummary& off, const RunSummary& on, double km_tolerance)
{
  if (off.seed != on.seed) {
    throw std::invalid_argument("runs use different seeds");
  }
  if (std::abs(off.km - on.km) > km_tolerance) {
    throw std::invalid_argument("runs cover different distances");
  }
  return {off.seed,
          off.km,
          off.ego_collisions,
          on.ego_collisions,
          off.eventually_critical,
          on.eventually_critical,
          off.very_critical,
          on.very_critical};
}

std::string format_comparison(const RunComparison& c)
{
  auto ratio = [](int off, int on) -> std::string {
    if (off == on) {
      return "1.00";
    }
    if (off == 0) {
      return "n/a";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", static_cast<double>(on) / off);
    return buf;
  };
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "seed %llu, %.1f km\n"
                "%-22s %10s %10s %8s\n"
                "%-22s %10d %10d %8s\n"
                "%-22s %10d %10d %8s\n"
                "%-22s %10d %10d %8s\n",
                static_cast<unsigned long long>(c.seed), c.km, "", "without", "with", "ratio", "collisions",
                c.collisions_off, c.collisions_on, ratio(c.collisions_off, c.collisions_on).c_str(),
                "eventually critical", c.eventually_off, c.eventually_on,
                ratio(c.eventually_off, c.eventually_on).c_str(), "very critical", c.very_off, c.very_on,
                ratio(c.very_off, c.very_on).c_str());
  return buf;
}

}  // namespace stresslane
