#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rfrl/entities.hpp"
#include "rfrl/scenario.hpp"

namespace rfrl {

/// One agent's choice for a timestep: idle or a channel. The action index
/// space is [0, num_channels]; index 0 is idle and index k + 1 is channel k.
class AgentAction {
 public:
  constexpr AgentAction() = default;

  static constexpr AgentAction idle() { return AgentAction{}; }
  static constexpr AgentAction transmit(std::size_t channel) { return AgentAction{channel + 1}; }
  static constexpr AgentAction from_index(std::size_t index) { return AgentAction{index}; }

  constexpr bool transmits() const { return index_ != 0; }
  constexpr std::size_t channel() const { return index_ - 1; }
  constexpr std::size_t index() const { return index_; }

  constexpr bool operator==(const AgentAction&) const = default;

 private:
  constexpr explicit AgentAction(std::size_t index) : index_(index) {}
  std::size_t index_ = 0;
};

constexpr std::size_t action_space_size(std::size_t num_channels) { return num_channels + 1; }

enum class OccupantKind : std::uint8_t { Entity, Agent };

struct Occupant {
  OccupantKind kind;
  std::size_t index;  // into ScenarioSpec::entities or ::agents

  bool operator==(const Occupant&) const = default;
};

struct OccupancyFrame {
  std::size_t t = 0;
  std::vector<std::vector<Occupant>> occupants;  // per channel

  std::size_t num_channels() const { return occupants.size(); }
  bool operator==(const OccupancyFrame&) const = default;
};

/// Entities at timestep t plus the given agent actions (one per agent, in
/// scenario order).
OccupancyFrame compose_frame(const ScenarioSpec& spec, std::size_t t, std::span<const AgentAction> actions);

std::string occupant_id(const ScenarioSpec& spec, const Occupant& o);

/// Classify labels: 0 = empty, entities 1..E, agents E+1..E+N in scenario
/// order, and E+N+1 for any channel with two or more occupants.
class LabelTable {
 public:
  using Label = std::uint16_t;
  static constexpr Label kEmpty = 0;

  explicit LabelTable(const ScenarioSpec& spec);

  Label label(const Occupant& o) const;
  Label collision() const { return collision_; }
  std::size_t size() const { return static_cast<std::size_t>(collision_) + 1; }

 private:
  std::size_t num_entities_;
  Label collision_;
};

struct Observation {
  ObservationMode mode = ObservationMode::Detect;
  std::size_t num_channels = 0;
  std::size_t history_length = 1;
  /// history_length views of num_channels cells each, most recent first.
  /// Detect cells are 0/1; classify cells are LabelTable labels.
  std::vector<LabelTable::Label> cells;

  std::span<const LabelTable::Label> view(std::size_t age) const {
    return std::span(cells).subspan(age * num_channels, num_channels);
  }
  bool operator==(const Observation&) const = default;
};

/// Binary occupancy of a classify observation (label > 0).
Observation threshold_to_detect(const Observation& obs);

/// Per-channel view of one frame with `self` removed from the occupant lists.
std::vector<LabelTable::Label> channel_view(const OccupancyFrame& frame, ObservationMode mode,
                                            std::optional<std::size_t> self, const LabelTable& labels);

/// `history` is oldest first; the newest history_length frames are used and
/// missing older frames read as empty.
Observation build_observation(std::span<const OccupancyFrame> history, const AgentSpec& agent,
                              std::size_t agent_index, const LabelTable& labels);

int reward_dsa(AgentAction action, const OccupancyFrame& frame, std::size_t self);
int reward_jam(AgentAction action, const EntityAction& target);

/// Per-agent rewards for a composed frame.
std::vector<int> compute_rewards(const ScenarioSpec& spec, const OccupancyFrame& frame,
                                 std::span<const AgentAction> actions);

/// Rewards are indexed by agent; every member must have one.
long group_reward(std::span<const int> per_agent, const AgentGroupSpec& group);
double mean_group_reward(std::span<const int> per_agent, const AgentGroupSpec& group);

class EnvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AgentHistory {
  std::vector<Observation> observations;
  std::vector<AgentAction> actions;
};

struct EnvState {
  std::size_t t = 0;
  std::uint64_t seed = 0;
  bool done = false;
  std::vector<AgentHistory> histories;
  std::vector<long> cumulative_rewards;
};

struct StepResult {
  std::vector<Observation> observations;
  std::vector<int> rewards;
  std::vector<long> group_rewards;
  bool done = false;
  OccupancyFrame frame;
};

using ActionMap = std::map<std::string, AgentAction, std::less<>>;

/// Multi-agent spectrum environment. Deterministic given the action sequence;
/// the seed is recorded but entity behaviour does not consume randomness.
class Environment {
 public:
  explicit Environment(ScenarioSpec spec);

  const ScenarioSpec& spec() const { return spec_; }
  const LabelTable& labels() const { return labels_; }
  const EnvState& state() const { return state_; }
  std::size_t num_agents() const { return spec_.agents.size(); }

  std::vector<Observation> reset(std::uint64_t seed = 0);

  /// Actions in scenario agent order.
  StepResult step(std::span<const AgentAction> actions);
  StepResult step(const ActionMap& actions);

  /// Disable per-agent observation/action logs (training loops that keep
  /// their own transitions). Cumulative rewards are always tracked.
  void set_record_histories(bool record) { record_histories_ = record; }

 private:
  std::vector<Observation> observe() const;

  ScenarioSpec spec_;
  LabelTable labels_;
  EnvState state_;
  std::deque<OccupancyFrame> frames_;
  std::size_t max_history_ = 1;
  bool record_histories_ = true;
  bool started_ = false;
};

}  // namespace rfrl
