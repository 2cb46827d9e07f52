#include "rfrl/entities.hpp"

#include <cstdint>

namespace rfrl {

EntityAction entity_channel(const EntitySpec& spec, std::size_t t, std::size_t num_channels) {
  if (!spec.duty && t % 2 == 1) return {};
  if (spec.behavior == EntityBehavior::Constant) return {spec.start_channel};

  // Reduce before multiplying so large t or stride cannot overflow.
  const auto n = static_cast<std::int64_t>(num_channels);
  std::int64_t stride = spec.stride % n;
  if (stride < 0) stride += n;
  const auto steps = static_cast<std::int64_t>(t % num_channels);
  const auto offset = (steps * stride) % n;
  const auto channel = (static_cast<std::int64_t>(spec.start_channel) + offset) % n;
  return {static_cast<std::size_t>(channel)};
}

}  // namespace rfrl
