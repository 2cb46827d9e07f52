#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "rfrl/env.hpp"
#include "rfrl/learners.hpp"
#include "rfrl/scenario.hpp"

namespace rfrl {

enum class Algorithm { Q, Reinforce };
enum class RenderMode { Off, Terminal };
enum class GroupRewardMode { Sum, Mean };

std::string_view to_string(Algorithm a);
Algorithm parse_algorithm(std::string_view name);
std::string_view to_string(GroupRewardMode m);
GroupRewardMode parse_group_reward_mode(std::string_view name);

struct RunConfig {
  std::filesystem::path scenario_path;
  Algorithm algorithm = Algorithm::Q;
  std::size_t episodes = 500;
  std::uint64_t seed = 0;
  double ewma_beta = 0.75;
  std::filesystem::path out_dir;  // empty: no files written
  RenderMode render = RenderMode::Off;
  GroupRewardMode group_reward = GroupRewardMode::Sum;
  LearnerConfig learner;

  void validate() const;
};

struct EpisodeRecord {
  std::size_t episode = 0;
  std::vector<long> agent_rewards;
  long total = 0;
  std::vector<long> group_rewards;  // group sums

  bool operator==(const EpisodeRecord&) const = default;
};

struct EpisodeLog {
  std::string scenario_id;
  std::string algorithm;
  std::uint64_t seed = 0;
  double ewma_beta = 0.75;
  GroupRewardMode group_reward = GroupRewardMode::Sum;
  std::vector<std::string> agent_ids;
  std::vector<AgentGroupSpec> groups;
  std::vector<EpisodeRecord> episodes;

  std::vector<double> totals() const;
  std::vector<double> agent_series(std::size_t agent) const;
};

/// s0 = x0, s_t = beta * s_{t-1} + (1 - beta) * x_t.
std::vector<double> ewma(std::span<const double> series, double beta);

struct RenderStyle {
  bool color = true;
};

/// First line: one cell per channel ('.' empty, 'E' entity, 'A' agent,
/// collisions '=' entity/entity, 'X' agent/entity, '*' agent/agent).
/// Then one cumulative-reward line per agent in that agent's color.
std::vector<std::string> render_frame(const OccupancyFrame& frame, const ScenarioSpec& spec,
                                      std::span<const long> cumulative_rewards, RenderStyle style = {});

/// Header `episode,agent_id,reward,ewma_reward,group_id,group_reward,total`,
/// one row per (episode, agent), LF line endings.
std::string episode_csv(const EpisodeLog& log);
void write_episode_csv(const EpisodeLog& log, const std::filesystem::path& path);
/// Rebuilds agents, groups and per-episode rewards from CSV text. Run
/// metadata other than the group mode is not stored in the CSV.
EpisodeLog parse_episode_csv(std::string_view text, GroupRewardMode mode);

struct TrainingResult {
  EpisodeLog log;
  std::vector<std::unique_ptr<Learner>> learners;
};

/// Independent learner per agent; fully deterministic in config.seed.
/// With render = Terminal the final episode is drawn to `render_out`.
TrainingResult train(const ScenarioSpec& spec, const RunConfig& config, std::ostream* render_out = nullptr);

/// Loads the scenario, trains, and when out_dir is set writes
/// rewards.csv, policy.json and run.json there.
EpisodeLog run_training(const RunConfig& config, std::ostream* render_out = nullptr);

/// {"format": "rfrl-checkpoint", "version": 1, "algorithm", "agents": {id: policy}}
nlohmann::json make_checkpoint(const ScenarioSpec& spec, const TrainingResult& result);

struct RolloutResult {
  std::vector<long> agent_rewards;
  long total = 0;
  std::vector<OccupancyFrame> frames;
};

/// One greedy episode under a checkpoint's policies.
RolloutResult greedy_rollout(const ScenarioSpec& spec, const nlohmann::json& checkpoint,
                             std::ostream* render_out = nullptr, RenderStyle style = {});

}  // namespace rfrl
