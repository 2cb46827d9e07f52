#include "rfrl/kernels.hpp"

#include <algorithm>
#include <cstdint>
#include <exception>

#include "rfrl/env.hpp"
#include "rfrl/rng.hpp"

namespace rfrl::kernels {

namespace {

void detect_one(std::span<const iq::Assignment> assignments, std::size_t num_channels, const iq::IQConfig& config,
                std::uint64_t seed, std::uint8_t* out) {
  const auto frame = iq::synth_step(assignments, num_channels, config, seed);
  const auto occupancy = iq::infer_occupancy(iq::band_energies(frame, num_channels), config);
  std::copy(occupancy.begin(), occupancy.end(), out);
}

}  // namespace

std::vector<std::uint8_t> detect_batch_serial(std::span<const iq::Assignment> assignments, std::size_t num_channels,
                                              const iq::IQConfig& config, std::uint64_t base_seed,
                                              std::size_t trials) {
  std::vector<std::uint8_t> out(trials * num_channels, 0);
  for (std::size_t i = 0; i < trials; ++i) {
    detect_one(assignments, num_channels, config, derive_seed(base_seed, i), out.data() + i * num_channels);
  }
  return out;
}

std::vector<std::uint8_t> detect_batch_parallel(std::span<const iq::Assignment> assignments,
                                                std::size_t num_channels, const iq::IQConfig& config,
                                                std::uint64_t base_seed, std::size_t trials) {
  config.validate();
  std::vector<std::uint8_t> out(trials * num_channels, 0);
  std::exception_ptr error;
  const auto n = static_cast<std::int64_t>(trials);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      const auto idx = static_cast<std::size_t>(i);
      detect_one(assignments, num_channels, config, derive_seed(base_seed, idx), out.data() + idx * num_channels);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

long random_rollout(const ScenarioSpec& spec, std::uint64_t seed) {
  Environment env(spec);
  env.set_record_histories(false);
  env.reset(seed);
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, action_space_size(spec.num_channels) - 1);
  std::vector<AgentAction> actions(spec.agents.size());
  long total = 0;
  for (bool done = false; !done;) {
    for (auto& a : actions) a = AgentAction::from_index(pick(rng));
    auto step = env.step(actions);
    for (int r : step.rewards) total += r;
    done = step.done;
  }
  return total;
}

std::vector<long> random_rollouts_serial(const ScenarioSpec& spec, std::uint64_t base_seed, std::size_t episodes) {
  std::vector<long> totals(episodes);
  for (std::size_t i = 0; i < episodes; ++i) totals[i] = random_rollout(spec, derive_seed(base_seed, i));
  return totals;
}

std::vector<long> random_rollouts_parallel(const ScenarioSpec& spec, std::uint64_t base_seed, std::size_t episodes) {
  validate_scenario(spec);
  std::vector<long> totals(episodes);
  const auto n = static_cast<std::int64_t>(episodes);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    totals[idx] = random_rollout(spec, derive_seed(base_seed, idx));
  }
  return totals;
}

}  // namespace rfrl::kernels
