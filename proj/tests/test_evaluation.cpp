#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "stresslane/evaluation.hpp"

namespace stresslane
{
namespace
{

// Relative motion on the simulation grid: coast while the next grid point
// is still before the braking instant, then brake at a_max with exact
// constant-deceleration sub-steps until the closing speed is gone.
double final_gap_after_braking(double gap, double v_rel, double a_max, double brake_at, double dt)
{
  const auto coast_steps = static_cast<long>(std::floor(brake_at / dt));
  for (long k = 0; k < coast_steps; ++k) {
    gap -= v_rel * dt;
  }
  const double h = 1e-4;
  double v = v_rel;
  while (v > a_max * h) {
    gap -= v * h - 0.5 * a_max * h * h;
    v -= a_max * h;
  }
  gap -= v * v / (2.0 * a_max);
  return gap;
}

TEST(TimeToBrake, BrakingAtTheInstantStopsWithinOneStep)
{
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> gap_d(2.0, 200.0);
  std::uniform_real_distribution<double> vrel_d(0.5, 30.0);
  std::uniform_real_distribution<double> a_d(3.0, 9.0);
  const double dt = 0.1;
  int cases = 0;
  while (cases < 1000) {
    const double gap = gap_d(rng);
    const double v_rel = vrel_d(rng);
    const double a_max = a_d(rng);
    const double ttb = time_to_brake(gap, v_rel, a_max);
    if (ttb < 0.0) {
      continue;
    }
    ++cases;
    const double left = final_gap_after_braking(gap, v_rel, a_max, ttb, dt);
    EXPECT_GE(left, -1e-9) << gap << " " << v_rel << " " << a_max;
    EXPECT_LE(left, v_rel * dt + 1e-9) << gap << " " << v_rel << " " << a_max;
  }
}

TEST(TimeToBrake, SpecialCases)
{
  EXPECT_TRUE(std::isinf(time_to_brake(10.0, 0.0, 8.5)));
  EXPECT_TRUE(std::isinf(time_to_brake(10.0, -2.0, 8.5)));
  EXPECT_LT(time_to_brake(1.0, 20.0, 8.5), 0.0);
  EXPECT_THROW(time_to_brake(10.0, 5.0, 0.0), std::invalid_argument);
}

TEST(InstantLevel, Thresholds)
{
  const CriticalityThresholds th;
  EXPECT_EQ(instant_level(25.0, {100.0, 25.0}, th), CriticalityLabel::not_critical);
  EXPECT_EQ(instant_level(25.0, {0.0, 25.0}, th), CriticalityLabel::very_critical);
  EXPECT_EQ(instant_level(25.0, {-1.0, 25.0}, th), CriticalityLabel::very_critical);
  // v_rel 10: ttb = (gap - 100/17) / 10
  EXPECT_EQ(instant_level(30.0, {5.8824 + 10.0 * 0.7, 20.0}, th), CriticalityLabel::very_critical);
  EXPECT_EQ(instant_level(30.0, {5.8824 + 10.0 * 1.2, 20.0}, th), CriticalityLabel::eventually_critical);
  EXPECT_EQ(instant_level(30.0, {5.8824 + 10.0 * 1.8, 20.0, -2.0}, th), CriticalityLabel::eventually_critical);
}

TEST(InstantLevel, ShrinkingGapNeverLowersLevel)
{
  const CriticalityThresholds th;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> v_d(0.0, 40.0);
  std::uniform_real_distribution<double> a_d(-6.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const double v = v_d(rng);
    const double lead_v = v_d(rng);
    const double lead_a = a_d(rng);
    CriticalityLabel prev = CriticalityLabel::not_critical;
    for (double gap = 200.0; gap >= -1.0; gap -= 0.5) {
      const CriticalityLabel now = instant_level(v, {gap, lead_v, lead_a}, th);
      EXPECT_GE(static_cast<int>(now), static_cast<int>(prev));
      prev = now;
    }
    EXPECT_EQ(prev, CriticalityLabel::very_critical);
  }
}

// Independent box test: intervals along s and along the lateral axis.
bool boxes_overlap(const VehicleState& a, const VehicleState& b, double lw)
{
  const double ay = (a.lane - 1) * lw + lw / 2 + a.y_lat;
  const double by = (b.lane - 1) * lw + lw / 2 + b.y_lat;
  const double s_lo = std::max(a.s, b.s);
  const double s_hi = std::min(a.s + a.len, b.s + b.len);
  const double y_lo = std::max(ay - a.width / 2, by - b.width / 2);
  const double y_hi = std::min(ay + a.width / 2, by + b.width / 2);
  return s_lo < s_hi && y_lo < y_hi;
}

TEST(Footprints, MatchIntervalOracle)
{
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> s_d(0.0, 12.0);
  std::uniform_real_distribution<double> y_d(-1.7, 1.7);
  std::uniform_int_distribution<int> lane_d(1, 3);
  int hits = 0;
  for (int i = 0; i < 5000; ++i) {
    VehicleState a;
    VehicleState b;
    a.id = 1;
    b.id = 2;
    a.s = s_d(rng);
    b.s = s_d(rng);
    a.lane = lane_d(rng);
    b.lane = lane_d(rng);
    a.y_lat = y_d(rng);
    b.y_lat = y_d(rng);
    const bool want = boxes_overlap(a, b, 3.5);
    hits += want ? 1 : 0;
    EXPECT_EQ(footprints_overlap(a, b, 3.5), want);
    EXPECT_EQ(footprints_overlap(b, a, 3.5), want);
  }
  EXPECT_GT(hits, 100);
}

VehicleState at(VehicleId id, int lane, double s)
{
  VehicleState v;
  v.id = id;
  v.lane = lane;
  v.s = s;
  return v;
}

TEST(Collisions, ReportedOncePerContact)
{
  CollisionDetector det;
  std::vector<VehicleState> states = {at(3, 2, 100.0), at(1, 2, 103.0), at(5, 1, 101.0)};
  auto c = det.detect(states, 1.0, 3.5, 1);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].a, 1);
  EXPECT_EQ(c[0].b, 3);
  EXPECT_TRUE(c[0].involves_ego);
  EXPECT_TRUE(det.detect(states, 1.1, 3.5, 1).empty());
  states[1].s = 110.0;
  EXPECT_TRUE(det.detect(states, 1.2, 3.5, 1).empty());
  states[1].s = 104.0;
  EXPECT_EQ(det.detect(states, 1.3, 3.5, 1).size(), 1u);
}

TEST(Collisions, BackgroundPairsDoNotInvolveEgo)
{
  CollisionDetector det;
  const std::vector<VehicleState> states = {at(7, 3, 50.0), at(8, 3, 52.0)};
  const auto c = det.detect(states, 0.0, 3.5, 1);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_FALSE(c[0].involves_ego);
}

ScenarioRecord record_with(std::vector<std::optional<LeadSample>> leads, int collision_at = -1)
{
  ScenarioRecord r;
  for (std::size_t i = 0; i < leads.size(); ++i) {
    FrameSample s;
    s.v_ego = 25.0;
    s.lead = leads[i];
    s.ego_collision = static_cast<int>(i) == collision_at;
    r.frame.push_back(s);
  }
  return r;
}

TEST(Classify, CollisionIsAlwaysVeryCritical)
{
  const CriticalityThresholds th;
  EXPECT_EQ(classify(record_with({std::nullopt, std::nullopt}, 1), th), CriticalityLabel::very_critical);
  EXPECT_EQ(classify(record_with({LeadSample{2, 200.0, 25.0, 0.0}}, 0), th), CriticalityLabel::very_critical);
}

TEST(Classify, WorstSampleWins)
{
  const CriticalityThresholds th;
  EXPECT_EQ(classify(record_with({}), th), CriticalityLabel::not_critical);
  const auto r = record_with({LeadSample{2, 100.0, 25.0, 0.0}, LeadSample{2, 18.0, 15.0, 0.0},
                              LeadSample{2, 100.0, 25.0, 0.0}});
  EXPECT_EQ(classify(r, th), CriticalityLabel::eventually_critical);
}

TEST(Monitor, EpisodesCloseAfterQuietTime)
{
  CriticalityMonitor m(CriticalityThresholds{});
  const LeaderInfo calm{100.0, 25.0};
  const LeaderInfo tight{18.0, 15.0};
  const LeaderInfo touching{0.0, 15.0};
  double t = 0.0;
  auto feed = [&](const std::optional<LeaderInfo>& lead, int steps, bool collision = false) {
    for (int i = 0; i < steps; ++i, t += 0.1) {
      m.observe(t, 25.0, lead, collision);
    }
  };
  feed(calm, 10);
  feed(tight, 5);
  feed(calm, 5);   // 0.5 s gap keeps the episode open
  feed(touching, 1);
  feed(calm, 20);  // closes as very critical
  feed(tight, 3);
  feed(calm, 20);  // closes as eventually critical
  feed(std::nullopt, 2, true);
  m.finish();      // open collision episode
  EXPECT_EQ(m.very_critical(), 2);
  EXPECT_EQ(m.eventually_critical(), 1);
  EXPECT_EQ(m.total(), 3);
}

TEST(Summary, CsvStartsWithRequiredColumns)
{
  EXPECT_EQ(summary_csv_header().rfind("seed,km,stm,collisions,eventually_critical,very_critical", 0), 0u);
  RunSummary s;
  s.seed = 4;
  s.km = 200.0;
  s.stm_on = true;
  s.ego_collisions = 3;
  s.eventually_critical = 10;
  s.very_critical = 7;
  EXPECT_EQ(summary_csv_row(s).rfind("4,200.000,on,3,10,7,", 0), 0u);
  const auto commas = [](const std::string& x) { return std::count(x.begin(), x.end(), ','); };
  EXPECT_EQ(commas(summary_csv_row(s)), commas(summary_csv_header()));
}

TEST(Compare, IdenticalRunsGiveUnitRatios)
{
  RunSummary s;
  s.seed = 2;
  s.km = 200.0;
  s.ego_collisions = 4;
  s.eventually_critical = 9;
  s.very_critical = 6;
  const RunComparison c = compare_runs(s, s);
  EXPECT_FALSE(c.stm_more_critical());
  const std::string text = format_comparison(c);
  std::size_t count = 0;
  for (std::size_t p = text.find("1.00"); p != std::string::npos; p = text.find("1.00", p + 1)) {
    ++count;
  }
  EXPECT_EQ(count, 3u);
}

TEST(Compare, MismatchedRunsAreRejected)
{
  RunSummary off;
  off.seed = 1;
  off.km = 200.0;
  RunSummary on = off;
  on.km = 150.0;
  EXPECT_THROW(compare_runs(off, on), std::invalid_argument);
  on = off;
  on.seed = 2;
  EXPECT_THROW(compare_runs(off, on), std::invalid_argument);
}

TEST(Compare, DirectionalCheck)
{
  RunSummary off;
  off.seed = 1;
  off.km = 200.0;
  off.eventually_critical = 1;
  RunSummary on = off;
  on.ego_collisions = 2;
  on.eventually_critical = 5;
  on.very_critical = 3;
  const RunComparison c = compare_runs(off, on);
  EXPECT_TRUE(c.stm_more_critical());
  EXPECT_NE(format_comparison(c).find("5.00"), std::string::npos);
  EXPECT_NE(format_comparison(c).find("n/a"), std::string::npos);
}

}  // namespace
}  // namespace stresslane
