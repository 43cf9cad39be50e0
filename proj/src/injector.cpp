#include "stresslane/injector.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stresslane
{

const VehicleState* NeighborView::state_of(VehicleId id) const
{
  auto it = std::find_if(flat.begin(), flat.end(), [id](const VehicleState& v) { return v.id == id; });
  return it == flat.end() ? nullptr : &*it;
}

NeighborView extract_neighbors(const World& world, const InjectorSettings& settings)
{
  NeighborView view;
  view.relative_map.resize(static_cast<std::size_t>(world.road().lane_count));

  const VehicleId ego_id = settings.ego_id != 0 ? settings.ego_id : world.ego_id();
  const VehicleState* ego = ego_id != 0 ? world.find(ego_id) : nullptr;
  if (!ego) {
    view.ego_missing = true;
    return view;
  }

  for (const VehicleState& v : world.states()) {
    if (v.id == ego->id) {
      continue;
    }
    const double d = v.s - ego->s;
    if (std::abs(d) > settings.neighbor_threshold || (settings.front_only && d < 0.0)) {
      continue;
    }
    view.flat.push_back(v);
  }
  std::sort(view.flat.begin(), view.flat.end(), [ego](const VehicleState& a, const VehicleState& b) {
    const double da = std::abs(a.s - ego->s);
    const double db = std::abs(b.s - ego->s);
    return da != db ? da < db : a.id < b.id;
  });

  // flat is nearest-first, so the first vehicle to land in a cell keeps it
  const auto& t = settings.column_times;
  for (const VehicleState& v : view.flat) {
    const double d = v.s - ego->s;
    for (int col = 0; col < kColumns; ++col) {
      const double lo = ego->v * t[static_cast<std::size_t>(col)];
      const double hi = ego->v * t[static_cast<std::size_t>(col) + 1];
      if (lo < d && d < hi) {
        auto& cell = view.relative_map[static_cast<std::size_t>(v.lane - 1)][static_cast<std::size_t>(col)];
        if (!cell) {
          cell = v.id;
        }
        break;
      }
    }
  }
  return view;
}

Injector::Injector(World& world, InjectorSettings settings) : world_(world), settings_(settings)
{
  if (settings_.apply_every_n_steps < 1) {
    throw std::invalid_argument("apply_every_n_steps must be >= 1");
  }
  if (settings_.neighbor_threshold <= 0.0) {
    throw std::invalid_argument("neighbor_threshold must be positive");
  }
}

PluginHandle Injector::register_plugin(std::shared_ptr<InjectorPlugin> plugin)
{
  if (plugin_) {
    throw std::logic_error("injector already installed");
  }
  if (!plugin) {
    throw std::invalid_argument("plugin must not be null");
  }
  plugin_ = std::move(plugin);
  return {plugin_.get()};
}

void Injector::apply_commands(std::span<const VehicleCommand> commands)
{
  for (const VehicleCommand& cmd : commands) {
    if (!world_.find(cmd.target_id)) {
      if (cmd.release) {
        continue;  // nothing left to release
      }
      incidents_.push_back("step " + std::to_string(world_.clock().step_index) + ": unknown target " +
                           std::to_string(cmd.target_id) + ", command skipped");
      ++summary_.incidents;
      continue;
    }
    auto [it, inserted] = staged_.try_emplace(cmd.target_id, cmd);
    if (inserted) {
      continue;
    }
    VehicleCommand& staged = it->second;
    if (cmd.release) {
      staged = cmd;
      continue;
    }
    staged.release = false;
    if (cmd.accel_override) {
      staged.accel_override = cmd.accel_override;
    }
    if (cmd.lateral_rate) {
      staged.lateral_rate = cmd.lateral_rate;
    }
  }
}

void Injector::deliver_staged()
{
  if (world_.clock().step_index % settings_.apply_every_n_steps != 0) {
    return;
  }
  for (const auto& [id, cmd] : staged_) {
    const bool ok = cmd.release ? world_.release(id) : world_.set_override(id, cmd.accel_override, cmd.lateral_rate);
    if (ok) {
      ++summary_.commands_delivered;
    } else {
      incidents_.push_back("step " + std::to_string(world_.clock().step_index) + ": target " +
                           std::to_string(id) + " left before delivery");
      ++summary_.incidents;
    }
  }
  staged_.clear();
}

void Injector::step()
{
  if (plugin_ && !started_) {
    plugin_->on_start(settings_);
    started_ = true;
  }
  if (plugin_) {
    last_view_ = extract_neighbors(world_, settings_);
    VehicleState ego_state;
    const VehicleId ego_id = settings_.ego_id != 0 ? settings_.ego_id : world_.ego_id();
    if (const VehicleState* ego = world_.find(ego_id)) {
      ego_state = *ego;
    }
    const auto commands = plugin_->inject(world_.clock(), ego_state, last_view_);
    apply_commands(commands);
  }

  world_.spawn_step();
  world_.compute_controls();
  deliver_staged();
  world_.advance();
  ++summary_.steps;
}

void Injector::finish()
{
  if (plugin_) {
    plugin_->on_finish(summary_);
  }
}

}  // namespace stresslane
