#include "rfrl/env.hpp"

#include <algorithm>
#include <limits>

namespace rfrl {

OccupancyFrame compose_frame(const ScenarioSpec& spec, std::size_t t, std::span<const AgentAction> actions) {
  if (actions.size() != spec.agents.size()) {
    throw EnvError("expected " + std::to_string(spec.agents.size()) + " actions, got " +
                   std::to_string(actions.size()));
  }
  OccupancyFrame frame;
  frame.t = t;
  frame.occupants.resize(spec.num_channels);
  for (std::size_t e = 0; e < spec.entities.size(); ++e) {
    if (auto a = entity_channel(spec.entities[e], t, spec.num_channels); a.channel) {
      frame.occupants[*a.channel].push_back({OccupantKind::Entity, e});
    }
  }
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (!actions[i].transmits()) continue;
    if (actions[i].channel() >= spec.num_channels) {
      throw EnvError("agent '" + spec.agents[i].id + "' chose channel " + std::to_string(actions[i].channel()) +
                     " outside [0, " + std::to_string(spec.num_channels) + ")");
    }
    frame.occupants[actions[i].channel()].push_back({OccupantKind::Agent, i});
  }
  return frame;
}

std::string occupant_id(const ScenarioSpec& spec, const Occupant& o) {
  return o.kind == OccupantKind::Entity ? spec.entities.at(o.index).id : spec.agents.at(o.index).id;
}

LabelTable::LabelTable(const ScenarioSpec& spec) : num_entities_(spec.entities.size()) {
  const auto n = spec.entities.size() + spec.agents.size() + 1;
  if (n > std::numeric_limits<Label>::max()) throw EnvError("too many occupants for classify labels");
  collision_ = static_cast<Label>(n);
}

LabelTable::Label LabelTable::label(const Occupant& o) const {
  const auto base = o.kind == OccupantKind::Entity ? 1 : 1 + num_entities_;
  return static_cast<Label>(base + o.index);
}

Observation threshold_to_detect(const Observation& obs) {
  Observation out = obs;
  out.mode = ObservationMode::Detect;
  for (auto& c : out.cells) c = c > 0 ? 1 : 0;
  return out;
}

std::vector<LabelTable::Label> channel_view(const OccupancyFrame& frame, ObservationMode mode,
                                            std::optional<std::size_t> self, const LabelTable& labels) {
  std::vector<LabelTable::Label> view(frame.num_channels(), LabelTable::kEmpty);
  for (std::size_t ch = 0; ch < frame.num_channels(); ++ch) {
    std::size_t count = 0;
    const Occupant* only = nullptr;
    for (const auto& o : frame.occupants[ch]) {
      if (self && o.kind == OccupantKind::Agent && o.index == *self) continue;
      ++count;
      only = &o;
    }
    if (count == 0) continue;
    if (mode == ObservationMode::Detect) {
      view[ch] = 1;
    } else {
      view[ch] = count == 1 ? labels.label(*only) : labels.collision();
    }
  }
  return view;
}

Observation build_observation(std::span<const OccupancyFrame> history, const AgentSpec& agent,
                              std::size_t agent_index, const LabelTable& labels) {
  if (history.empty()) throw EnvError("observation needs at least one frame");
  Observation obs;
  obs.mode = agent.observation_mode;
  obs.num_channels = history.back().num_channels();
  obs.history_length = agent.history_length;
  obs.cells.assign(obs.num_channels * obs.history_length, LabelTable::kEmpty);
  const auto available = std::min(history.size(), agent.history_length);
  for (std::size_t age = 0; age < available; ++age) {
    const auto& frame = history[history.size() - 1 - age];
    auto view = channel_view(frame, agent.observation_mode, agent_index, labels);
    std::copy(view.begin(), view.end(), obs.cells.begin() + static_cast<std::ptrdiff_t>(age * obs.num_channels));
  }
  return obs;
}

int reward_dsa(AgentAction action, const OccupancyFrame& frame, std::size_t self) {
  if (!action.transmits()) return 0;
  for (const auto& o : frame.occupants.at(action.channel())) {
    if (o.kind != OccupantKind::Agent || o.index != self) return -1;
  }
  return 1;
}

int reward_jam(AgentAction action, const EntityAction& target) {
  if (!action.transmits()) return 0;
  return target.channel && *target.channel == action.channel() ? 1 : -1;
}

std::vector<int> compute_rewards(const ScenarioSpec& spec, const OccupancyFrame& frame,
                                 std::span<const AgentAction> actions) {
  std::vector<int> rewards(spec.agents.size(), 0);
  for (std::size_t i = 0; i < spec.agents.size(); ++i) {
    if (spec.agents[i].reward_mode == RewardMode::Dsa) {
      rewards[i] = reward_dsa(actions[i], frame, i);
    } else {
      const auto target = spec.target_index(i).value();
      rewards[i] = reward_jam(actions[i], entity_channel(spec.entities[target], frame.t, spec.num_channels));
    }
  }
  return rewards;
}

long group_reward(std::span<const int> per_agent, const AgentGroupSpec& group) {
  long sum = 0;
  for (auto member : group) {
    if (member >= per_agent.size()) throw std::out_of_range("group member has no reward");
    sum += per_agent[member];
  }
  return sum;
}

double mean_group_reward(std::span<const int> per_agent, const AgentGroupSpec& group) {
  if (group.empty()) throw std::invalid_argument("mean reward of an empty group");
  return static_cast<double>(group_reward(per_agent, group)) / static_cast<double>(group.size());
}

Environment::Environment(ScenarioSpec spec) : spec_(std::move(spec)), labels_(spec_) {
  validate_scenario(spec_);
  for (const auto& a : spec_.agents) max_history_ = std::max(max_history_, a.history_length);
}

std::vector<Observation> Environment::observe() const {
  std::vector<OccupancyFrame> history(frames_.begin(), frames_.end());
  std::vector<Observation> out;
  out.reserve(spec_.agents.size());
  for (std::size_t i = 0; i < spec_.agents.size(); ++i) {
    out.push_back(build_observation(history, spec_.agents[i], i, labels_));
  }
  return out;
}

std::vector<Observation> Environment::reset(std::uint64_t seed) {
  state_ = EnvState{};
  state_.seed = seed;
  state_.histories.assign(spec_.agents.size(), {});
  state_.cumulative_rewards.assign(spec_.agents.size(), 0);
  frames_.clear();
  const std::vector<AgentAction> idle(spec_.agents.size(), AgentAction::idle());
  frames_.push_back(compose_frame(spec_, 0, idle));
  started_ = true;
  return observe();
}

StepResult Environment::step(const ActionMap& actions) {
  std::vector<AgentAction> ordered(spec_.agents.size());
  std::vector<bool> seen(spec_.agents.size(), false);
  for (const auto& [id, action] : actions) {
    auto idx = spec_.agent_index(id);
    if (!idx) throw EnvError("action for unknown agent '" + id + "'");
    ordered[*idx] = action;
    seen[*idx] = true;
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) throw EnvError("missing action for agent '" + spec_.agents[i].id + "'");
  }
  return step(ordered);
}

StepResult Environment::step(std::span<const AgentAction> actions) {
  if (!started_) throw EnvError("step before reset");
  if (state_.done) throw EnvError("step after episode end");

  StepResult result;
  result.frame = compose_frame(spec_, state_.t, actions);
  result.rewards = compute_rewards(spec_, result.frame, actions);
  result.group_rewards.reserve(spec_.groups.size());
  for (const auto& g : spec_.groups) result.group_rewards.push_back(group_reward(result.rewards, g));

  frames_.push_back(result.frame);
  while (frames_.size() > max_history_) frames_.pop_front();
  result.observations = observe();

  for (std::size_t i = 0; i < spec_.agents.size(); ++i) {
    state_.cumulative_rewards[i] += result.rewards[i];
    if (record_histories_) {
      state_.histories[i].observations.push_back(result.observations[i]);
      state_.histories[i].actions.push_back(actions[i]);
    }
  }
  ++state_.t;
  state_.done = state_.t == spec_.episode_length;
  result.done = state_.done;
  return result;
}

}  // namespace rfrl
