#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stresslane/injector.hpp"
#include "stresslane/lce_scheduler.hpp"
#include "stresslane/world.hpp"

namespace stresslane
{

// ---------------------------------------------------------------------------
// Bands and matrices
// ---------------------------------------------------------------------------

/// Distance thresholds d1 < d2 < d3 < d_max ahead of the ego [m].
struct TvcBands
{
  std::array<double, 4> d{};
};

TvcBands tvc_bands(double v_ego, const std::array<double, 3>& sit, double t_max);

/// Lane-major grid: rows are lanes 1..lane_count, columns are TVC 1..3.
/// Accessors take 1-based (lane, column).
template <typename T>
class LaneGrid
{
public:
  LaneGrid() = default;
  LaneGrid(int lanes, T fill) : cells_(static_cast<std::size_t>(lanes) * kColumns, fill), lanes_(lanes) {}

  int lanes() const { return lanes_; }
  static constexpr int columns() { return kColumns; }

  T& at(int lane, int column) { return cells_.at(index(lane, column)); }
  const T& at(int lane, int column) const { return cells_.at(index(lane, column)); }

  bool operator==(const LaneGrid&) const = default;

private:
  std::size_t index(int lane, int column) const
  {
    if (lane < 1 || lane > lanes_ || column < 1 || column > kColumns) {
      throw std::out_of_range("grid index out of range");
    }
    return static_cast<std::size_t>((lane - 1) * kColumns + (column - 1));
  }

  std::deque<T> cells_;  // not vector: LaneGrid<bool> needs real references
  int lanes_ = 0;
};

constexpr double kNoVehicle = std::numeric_limits<double>::infinity();

using DistanceMatrix = LaneGrid<double>;
using EventMatrix = LaneGrid<bool>;

/// d = s_target - s_ego for every occupied cell of the relative map,
/// kNoVehicle elsewhere.
DistanceMatrix distance_matrix(const VehicleState& ego, const NeighborView& view);

/// A cell is set iff its distance lies strictly inside the band of its column.
EventMatrix compute_tem(const DistanceMatrix& d, const TvcBands& bands);

/// Parse a lane-major 0/1 string ("110010...") into an event matrix.
EventMatrix event_matrix_from_bits(int lanes, std::string_view bits);

// ---------------------------------------------------------------------------
// Combination masks
// ---------------------------------------------------------------------------

struct GridCell
{
  int lane;
  int column;

  bool operator==(const GridCell&) const = default;
  auto operator<=>(const GridCell&) const = default;
};

struct CombinationMask
{
  int id = 0;
  LaneGrid<bool> ones;  // true where the entry is One, false for don't-care

  int lanes() const { return ones.lanes(); }
  std::vector<GridCell> brake_set() const;
  /// The TVC column shared by every One entry, if there is exactly one.
  std::optional<int> column() const;
};

/// Mask from a lane-major pattern of '1' and 'X' characters.
CombinationMask make_mask(int id, int lanes, std::string_view pattern);

const std::vector<CombinationMask>& two_lane_catalog();
const std::vector<CombinationMask>& three_lane_catalog();
const std::vector<CombinationMask>& catalog_for(int lanes);

class EventCounter
{
public:
  explicit EventCounter(int n_ct_max);

  int cap() const { return cap_; }
  int count(int mask_id) const;
  bool saturated(int mask_id) const { return count(mask_id) >= cap_; }
  bool all_saturated(std::span<const CombinationMask> catalog) const;
  /// Throws std::logic_error when the mask is already at the cap.
  void increment(int mask_id);
  const std::map<int, int>& counts() const { return counts_; }

private:
  int cap_;
  std::map<int, int> counts_;
};

struct TriggerMatch
{
  int mask_id;
  std::vector<GridCell> brake_set;
};

/// First admissible mask in column order (TVC1, TVC2, TVC3; then by id):
/// every One entry set in E, at least one One in the ego lane, all Ones in a
/// single column and the mask below its trigger cap.
std::optional<TriggerMatch> match_combinations(const EventMatrix& e, std::span<const CombinationMask> catalog,
                                               const EventCounter& counter, int ego_lane);

// ---------------------------------------------------------------------------
// Scenario capture
// ---------------------------------------------------------------------------

struct CellSample
{
  VehicleId id;
  double s;
  double v;
  double a;
  double distance;  // driven distance of the traffic vehicle
  double d;         // s - s_ego
};

struct LeadSample
{
  VehicleId id;
  double gap;
  double v;
  double a;
};

struct FrameSample
{
  std::int64_t step = 0;
  double time = 0.0;
  double s_ego = 0.0;
  double v_ego = 0.0;
  double a_ego = 0.0;
  double distance_ego = 0.0;
  int lane_ego = 1;
  LaneGrid<std::optional<CellSample>> cells;
  std::optional<LeadSample> lead;
  std::vector<VehicleState> nearby;  // vehicles close to the ego, filtered on capture
  bool ego_collision = false;
};

enum class EventKind { braking, lane_change };

struct CollisionNote
{
  double time;
  VehicleId a;
  VehicleId b;
};

struct ScenarioRecord
{
  double trigger_time = 0.0;
  std::int64_t trigger_step = 0;
  EventKind kind = EventKind::braking;
  std::optional<int> mask_id;
  std::vector<VehicleId> triggered;
  bool partial = false;
  int lane_count = 0;
  double t_lower = 0.0;
  double t_upper = 0.0;
  std::vector<FrameSample> frame;
  std::vector<CollisionNote> collisions;
};

/// Strict window test t_trigger - t_lower < t < t_trigger + t_upper evaluated
/// on step indices, so grid points on the boundary are always excluded.
bool in_scenario_frame(std::int64_t step, std::int64_t trigger_step, double t_lower, double t_upper, double dt);

/// Build a record from buffered samples; keeps exactly the samples inside
/// the frame and, in `nearby`, only the relevant vehicles.
ScenarioRecord capture_scenario(std::span<const FrameSample> history, std::int64_t trigger_step, double dt,
                                double t_lower, double t_upper, std::span<const VehicleId> relevant);

// ---------------------------------------------------------------------------
// Plugin
// ---------------------------------------------------------------------------

struct TriggerLogEntry
{
  std::int64_t step;
  double time;
  EventKind kind;
  int mask_id;  // -1 for lane changes
  std::vector<VehicleId> vehicles;
};

/// The stress-testing procedure as an injector plugin: bands -> D -> E ->
/// match -> braking profile, plus scheduled cut-ins, each opening a capture.
class StmPlugin : public InjectorPlugin
{
public:
  StmPlugin(RoadConfig road, StmParameters params, double dt);

  std::vector<VehicleCommand> inject(const SimClock& clock, const VehicleState& ego,
                                     const NeighborView& view) override;
  void on_finish(const InjectorSummary& summary) override;

  /// Collision detected after the last advance; attached to the next sample.
  void note_collision(double time, VehicleId a, VehicleId b);

  /// The vehicle was taken off the road; its maneuver ends without a release.
  void note_removed(VehicleId id);

  /// Records sealed since the last call, in trigger order.
  std::vector<ScenarioRecord> take_sealed();

  const EventCounter& counter() const { return counter_; }
  const std::vector<TriggerLogEntry>& triggers() const { return triggers_; }
  const std::vector<std::string>& event_log() const { return log_; }
  std::size_t open_captures() const { return open_.size(); }
  std::size_t active_maneuvers() const { return maneuvers_.size(); }

private:
  struct ActiveManeuver
  {
    VehicleId id;
    ManeuverProfile profile;
    std::int64_t start_step;
    EventKind kind;
  };

  struct OpenCapture
  {
    std::int64_t trigger_step;
    EventKind kind;
    std::optional<int> mask_id;
    std::vector<VehicleId> triggered;
  };

  FrameSample make_sample(const SimClock& clock, const VehicleState& ego, const NeighborView& view,
                          const DistanceMatrix& d) const;
  void seal(const OpenCapture& capture, bool truncated);
  void try_braking(const SimClock& clock, const VehicleState& ego, const NeighborView& view, const EventMatrix& e);
  void try_lane_change(const SimClock& clock, const VehicleState& ego, const NeighborView& view);
  bool busy(VehicleId id) const;
  void log(const SimClock& clock, const std::string& text);

  RoadConfig road_;
  StmParameters params_;
  double dt_;
  EventCounter counter_;
  LceScheduler scheduler_;
  std::deque<FrameSample> ring_;
  std::size_t ring_capacity_;
  std::vector<OpenCapture> open_;
  std::vector<ScenarioRecord> sealed_;
  std::vector<ActiveManeuver> maneuvers_;
  std::vector<CollisionNote> pending_collisions_;
  std::deque<CollisionNote> collisions_;
  std::vector<TriggerLogEntry> triggers_;
  std::vector<std::string> log_;
};

}  // namespace stresslane
