#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rfrl {

enum class EntityBehavior { Constant, Hop };
enum class ObservationMode { Detect, Classify };
enum class RewardMode { Dsa, Jam };

std::string_view to_string(EntityBehavior b);
std::string_view to_string(ObservationMode m);
std::string_view to_string(RewardMode m);

struct EntitySpec {
  std::string id;
  EntityBehavior behavior = EntityBehavior::Constant;
  std::size_t start_channel = 0;
  std::int64_t stride = 1;  // hop only
  bool duty = true;         // false: transmit on even timesteps only

  bool operator==(const EntitySpec&) const = default;
};

struct AgentSpec {
  std::string id;
  ObservationMode observation_mode = ObservationMode::Detect;
  RewardMode reward_mode = RewardMode::Dsa;
  std::optional<std::string> target_entity;
  std::size_t history_length = 1;

  bool operator==(const AgentSpec&) const = default;
};

/// Agent groups hold indices into ScenarioSpec::agents.
using AgentGroupSpec = std::vector<std::size_t>;

struct ScenarioSpec {
  std::size_t num_channels = 1;
  std::size_t episode_length = 1;
  std::vector<EntitySpec> entities;
  std::vector<AgentSpec> agents;
  std::vector<AgentGroupSpec> groups;
  std::string comments;

  std::optional<std::size_t> entity_index(std::string_view id) const;
  std::optional<std::size_t> agent_index(std::string_view id) const;
  /// Index of the jam target for agent `agent`, if any.
  std::optional<std::size_t> target_index(std::size_t agent) const;
  /// Group index containing agent `agent`.
  std::size_t group_of(std::size_t agent) const;

  bool operator==(const ScenarioSpec&) const = default;
};

/// Raised for malformed documents and invariant violations. `path()` names
/// the offending location, e.g. `agents[2].target_entity`.
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(std::string path, const std::string& message);
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

ScenarioSpec parse_scenario(std::string_view document);
ScenarioSpec load_scenario(const std::filesystem::path& path);

/// Canonical JSON text; parse_scenario(serialize_scenario(s)) == s.
std::string serialize_scenario(const ScenarioSpec& spec);

/// Partition check over agent indices. Empty iff groups partition the
/// agents; violations are reported, never thrown.
std::vector<std::string> validate_groups(const ScenarioSpec& spec);

/// Full invariant check used by parse_scenario; throws ScenarioError.
void validate_scenario(const ScenarioSpec& spec);

std::vector<AgentGroupSpec> singleton_groups(std::size_t num_agents);

}  // namespace rfrl
