#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stresslane/traffic.hpp"

namespace stresslane
{

struct InjectorSettings
{
  VehicleId ego_id = 0;
  double neighbor_threshold = 400.0;  // [m]
  bool front_only = true;
  int apply_every_n_steps = 1;
  /// Band edges of the relative map in seconds of ego travel: a vehicle is
  /// placed in column i when its distance lies in (v*t[i-1], v*t[i]).
  std::array<double, 4> column_times{2.0, 4.0, 6.0, 8.0};
};

constexpr int kColumns = 3;

/// Vehicles around the ego. `relative_map[lane - 1][column - 1]` mirrors the
/// on-road placement relative to the ego.
struct NeighborView
{
  std::vector<VehicleState> flat;  // ordered by |distance|, then id
  std::vector<std::array<std::optional<VehicleId>, kColumns>> relative_map;
  bool ego_missing = false;

  int lane_count() const { return static_cast<int>(relative_map.size()); }
  std::optional<VehicleId> cell(int column, int lane) const { return relative_map.at(lane - 1).at(column - 1); }
  const VehicleState* state_of(VehicleId id) const;
};

struct VehicleCommand
{
  VehicleId target_id = 0;
  std::optional<double> accel_override;
  std::optional<double> lateral_rate;  // dy_lat/dt [m/s]
  bool release = false;

  static VehicleCommand release_of(VehicleId id) { return {id, std::nullopt, std::nullopt, true}; }
};

struct InjectorSummary
{
  std::int64_t steps = 0;
  std::int64_t commands_delivered = 0;
  std::int64_t incidents = 0;
};

/// User-side contract: implement inject(); everything else is optional.
/// The view and states passed in are copies valid for the current call only.
class InjectorPlugin
{
public:
  virtual ~InjectorPlugin() = default;

  virtual std::vector<VehicleCommand> inject(const SimClock& clock, const VehicleState& ego,
                                             const NeighborView& view) = 0;
  virtual void on_start(const InjectorSettings& /*settings*/) {}
  virtual void on_finish(const InjectorSummary& /*summary*/) {}
};

NeighborView extract_neighbors(const World& world, const InjectorSettings& settings);

struct PluginHandle
{
  InjectorPlugin* plugin = nullptr;
};

/// Owns the per-step data flow around one world:
/// extract -> inject -> apply -> advance.
class Injector
{
public:
  Injector(World& world, InjectorSettings settings);

  /// At most one plugin per injector; a second call throws std::logic_error.
  PluginHandle register_plugin(std::shared_ptr<InjectorPlugin> plugin);
  bool has_plugin() const { return plugin_ != nullptr; }

  /// Stage commands; they reach the world on the next step whose index is a
  /// multiple of apply_every_n_steps. Later commands overwrite earlier ones.
  /// Commands for unknown vehicles are logged as incidents, except releases.
  void apply_commands(std::span<const VehicleCommand> commands);

  /// Runs one full step of the world.
  void step();
  void finish();

  const InjectorSettings& settings() const { return settings_; }
  const std::vector<std::string>& incidents() const { return incidents_; }
  const InjectorSummary& summary() const { return summary_; }
  const NeighborView& last_view() const { return last_view_; }

private:
  void deliver_staged();

  World& world_;
  InjectorSettings settings_;
  std::shared_ptr<InjectorPlugin> plugin_;
  std::map<VehicleId, VehicleCommand> staged_;
  std::vector<std::string> incidents_;
  InjectorSummary summary_;
  NeighborView last_view_;
  bool started_ = false;
};

}  // namespace stresslane
