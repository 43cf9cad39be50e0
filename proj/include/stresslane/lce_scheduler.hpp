#pragma once

#include <optional>
#include <span>
#include <vector>

#include "stresslane/maneuvers.hpp"
#include "stresslane/world.hpp"

namespace stresslane
{

/// Which adjacent lane the cut-in vehicle comes from.
enum class CutInSide { from_left, from_right, either };

struct LceDecision
{
  VehicleId vehicle;
  LaneDirection direction;  // direction of the cutter's lateral motion
  int catalog_index;
};

/// Round-robin cut-in scheduler. Deterministic: no random draws, so two
/// runs that differ only in the plugin see the same background traffic up
/// to the first event.
class LceScheduler
{
public:
  LceScheduler(LceParams params, int lane_count);

  const std::vector<CutInSide>& catalog() const { return catalog_; }
  int cursor() const { return cursor_; }
  std::optional<double> last_fire() const { return last_fire_; }

  /// True when the spacing (and, during the first cycle, the entry's
  /// initialisation time) allows an event at time t.
  bool due(double t) const;

  /// Pick a cutter for the current catalog entry. On success the cursor
  /// advances and t becomes the last fire time. `busy` vehicles are skipped.
  std::optional<LceDecision> poll(double t, const VehicleState& ego, std::span<const VehicleState> neighbors,
                                  std::span<const VehicleId> busy);

  /// Candidate in lane `source` inside the cut-in window, nearest first.
  std::optional<VehicleId> candidate(const VehicleState& ego, int source, std::span<const VehicleState> neighbors,
                                     std::span<const VehicleId> busy) const;

private:
  LceParams params_;
  int lane_count_;
  std::vector<CutInSide> catalog_;
  int cursor_ = 0;
  int fired_ = 0;
  std::optional<double> last_fire_;
};

}  // namespace stresslane
