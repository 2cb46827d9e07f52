#pragma once

// Seed-indexed batch kernels. Trial/episode i always draws from
// derive_seed(base_seed, i), so the serial and OpenMP variants produce
// identical output regardless of thread count or scheduling.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rfrl/iq.hpp"
#include "rfrl/scenario.hpp"

namespace rfrl::kernels {

/// Occupancy inferred from `trials` independent frames, row-major
/// (trials x num_channels).
std::vector<std::uint8_t> detect_batch_serial(std::span<const iq::Assignment> assignments, std::size_t num_channels,
                                              const iq::IQConfig& config, std::uint64_t base_seed,
                                              std::size_t trials);
std::vector<std::uint8_t> detect_batch_parallel(std::span<const iq::Assignment> assignments,
                                                std::size_t num_channels, const iq::IQConfig& config,
                                                std::uint64_t base_seed, std::size_t trials);

/// Scenario-wide reward total of one episode with uniformly random actions.
long random_rollout(const ScenarioSpec& spec, std::uint64_t seed);

std::vector<long> random_rollouts_serial(const ScenarioSpec& spec, std::uint64_t base_seed, std::size_t episodes);
std::vector<long> random_rollouts_parallel(const ScenarioSpec& spec, std::uint64_t base_seed, std::size_t episodes);

}  // namespace rfrl::kernels
