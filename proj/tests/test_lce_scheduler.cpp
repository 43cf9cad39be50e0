#include <gtest/gtest.h>

#include "stresslane/lce_scheduler.hpp"

namespace stresslane
{
namespace
{

VehicleState car(VehicleId id, int lane, double s)
{
  VehicleState st;
  st.id = id;
  st.lane = lane;
  st.s = s;
  st.v = 25.0;
  return st;
}

VehicleState ego_at(int lane, double s)
{
  VehicleState e = car(1, lane, s);
  e.kind = VehicleKind::ego;
  return e;
}

TEST(LceScheduler, CatalogDependsOnLaneCount)
{
  EXPECT_THROW(LceScheduler(LceParams{}, 1), std::invalid_argument);
  EXPECT_EQ(LceScheduler(LceParams{}, 2).catalog(),
            (std::vector<CutInSide>{CutInSide::from_left, CutInSide::from_right}));
  EXPECT_EQ(LceScheduler(LceParams{}, 3).catalog(),
            (std::vector<CutInSide>{CutInSide::from_left, CutInSide::from_right, CutInSide::either}));
}

TEST(LceScheduler, FirstCycleWaitsForInitTimesThenSpacing)
{
  LceParams p;
  p.t_int_min = 300.0;
  p.init_times = {50.0, 400.0};
  LceScheduler s(p, 3);
  EXPECT_FALSE(s.due(49.9));
  EXPECT_TRUE(s.due(50.0));
  const VehicleState ego = ego_at(2, 100.0);
  const VehicleState left = car(2, 1, 102.0);
  ASSERT_TRUE(s.poll(50.0, ego, std::span(&left, 1), {}));
  EXPECT_EQ(s.last_fire(), 50.0);
  EXPECT_FALSE(s.due(349.9));
  EXPECT_FALSE(s.due(399.0));  // spacing met, second init time not yet
  EXPECT_TRUE(s.due(400.0));
}

TEST(LceScheduler, SpacingAppliesAfterFirstCycle)
{
  LceParams p;
  p.t_int_min = 100.0;
  LceScheduler s(p, 2);
  const VehicleState ego = ego_at(1, 100.0);
  const VehicleState right = car(2, 2, 105.0);
  EXPECT_TRUE(s.due(0.0));
  // catalog entry 0 needs a vehicle on the left, which lane 1 does not have
  EXPECT_FALSE(s.poll(0.0, ego, std::span(&right, 1), {}));
  EXPECT_EQ(s.cursor(), 0);
  const VehicleState ego2 = ego_at(2, 100.0);
  const VehicleState left = car(3, 1, 105.0);
  const auto d = s.poll(10.0, ego2, std::span(&left, 1), {});
  ASSERT_TRUE(d);
  EXPECT_EQ(d->vehicle, 3);
  EXPECT_EQ(d->direction, LaneDirection::right);
  EXPECT_EQ(d->catalog_index, 0);
  EXPECT_EQ(s.cursor(), 1);
  EXPECT_FALSE(s.due(109.9));
  EXPECT_TRUE(s.due(110.0));
  const auto d2 = s.poll(110.0, ego, std::span(&right, 1), {});
  ASSERT_TRUE(d2);
  EXPECT_EQ(d2->direction, LaneDirection::left);
  EXPECT_EQ(s.cursor(), 0);
}

TEST(LceScheduler, EitherSidePrefersLeft)
{
  LceParams p;
  p.t_int_min = 0.0;
  LceScheduler s(p, 3);
  const VehicleState ego = ego_at(2, 100.0);
  const std::vector<VehicleState> both = {car(2, 1, 103.0), car(3, 3, 101.0)};
  ASSERT_TRUE(s.poll(0.0, ego, both, {}));  // entry 0: from_left
  ASSERT_TRUE(s.poll(1.0, ego, both, {}));  // entry 1: from_right
  const auto d = s.poll(2.0, ego, both, {});
  ASSERT_TRUE(d);
  EXPECT_EQ(d->catalog_index, 2);
  EXPECT_EQ(d->vehicle, 2);
  const std::vector<VehicleState> right_only = {car(3, 3, 101.0)};
  const auto d2 = s.poll(3.0, ego, right_only, {});  // entry 0 again
  EXPECT_FALSE(d2);
}

TEST(LceScheduler, CandidateWindowAndFilters)
{
  LceParams p;
  p.window_behind = 4.0;
  p.window_ahead = 10.0;
  LceScheduler s(p, 3);
  const VehicleState ego = ego_at(2, 100.0);  // front at 104.5, window [100.5, 110]
  std::vector<VehicleState> n = {car(2, 1, 100.4), car(3, 1, 110.1), car(4, 1, 106.0), car(5, 1, 104.0)};
  EXPECT_EQ(s.candidate(ego, 1, n, {}), 5);
  const VehicleId busy[] = {5};
  EXPECT_EQ(s.candidate(ego, 1, n, busy), 4);

  n[3].controlled_by = Controller::stm_plugin;
  EXPECT_EQ(s.candidate(ego, 1, n, {}), 4);
  n[2].y_lat = 0.3;
  EXPECT_FALSE(s.candidate(ego, 1, n, {}));
  EXPECT_FALSE(s.candidate(ego, 0, n, {}));
  EXPECT_FALSE(s.candidate(ego, 4, n, {}));
}

TEST(LceScheduler, EqualDistanceTiesBreakById)
{
  LceScheduler s(LceParams{}, 3);
  const VehicleState ego = ego_at(2, 100.0);
  const std::vector<VehicleState> n = {car(9, 1, 103.0), car(4, 1, 103.0)};
  EXPECT_EQ(s.candidate(ego, 1, n, {}), 4);
}

TEST(LceScheduler, EgoIsNeverACandidate)
{
  LceScheduler s(LceParams{}, 3);
  const VehicleState ego = ego_at(2, 100.0);
  VehicleState other_ego = ego_at(1, 103.0);
  other_ego.id = 8;
  EXPECT_FALSE(s.candidate(ego, 1, std::span(&other_ego, 1), {}));
}

}  // namespace
}  // namespace stresslane
