#pragma once

#include <cstddef>
#include <optional>

#include "rfrl/scenario.hpp"

namespace rfrl {

/// Channel a scripted entity occupies at one timestep; empty when idle.
struct EntityAction {
  std::optional<std::size_t> channel;

  bool idle() const { return !channel.has_value(); }
  bool operator==(const EntityAction&) const = default;
};

/// Constant entities sit on start_channel; hop entities sweep
/// (start_channel + t * stride) mod num_channels. Entities with duty = false
/// go idle on odd timesteps.
EntityAction entity_channel(const EntitySpec& spec, std::size_t t, std::size_t num_channels);

}  // namespace rfrl
