#include "rfrl/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace rfrl {

std::string_view to_string(Algorithm a) { return a == Algorithm::Q ? "q" : "reinforce"; }

Algorithm parse_algorithm(std::string_view name) {
  if (name == "q") return Algorithm::Q;
  if (name == "reinforce") return Algorithm::Reinforce;
  throw std::invalid_argument("unknown algorithm '" + std::string(name) + "'");
}

std::string_view to_string(GroupRewardMode m) { return m == GroupRewardMode::Sum ? "sum" : "mean"; }

GroupRewardMode parse_group_reward_mode(std::string_view name) {
  if (name == "sum") return GroupRewardMode::Sum;
  if (name == "mean") return GroupRewardMode::Mean;
  throw std::invalid_argument("unknown group reward mode '" + std::string(name) + "'");
}

void RunConfig::validate() const {
  if (!(ewma_beta >= 0.0 && ewma_beta < 1.0)) throw std::invalid_argument("ewma beta must lie in [0, 1)");
  learner.validate();
}

std::vector<double> EpisodeLog::totals() const {
  std::vector<double> out;
  out.reserve(episodes.size());
  for (const auto& e : episodes) out.push_back(static_cast<double>(e.total));
  return out;
}

std::vector<double> EpisodeLog::agent_series(std::size_t agent) const {
  std::vector<double> out;
  out.reserve(episodes.size());
  for (const auto& e : episodes) out.push_back(static_cast<double>(e.agent_rewards.at(agent)));
  return out;
}

std::vector<double> ewma(std::span<const double> series, double beta) {
  if (series.empty()) throw std::invalid_argument("ewma of an empty series");
  if (!(beta >= 0.0 && beta < 1.0)) throw std::invalid_argument("ewma beta must lie in [0, 1)");
  std::vector<double> out(series.size());
  out[0] = series[0];
  for (std::size_t t = 1; t < series.size(); ++t) out[t] = beta * out[t - 1] + (1.0 - beta) * series[t];
  return out;
}

namespace {

constexpr int kPalette[] = {39, 208, 82, 201, 226, 45, 196, 141, 118, 214, 33, 165};

std::string paint(std::string_view text, int color, bool enabled, bool reverse = false) {
  if (!enabled) return std::string(text);
  std::string out = "\x1b[";
  if (reverse) out += "7;";
  out += "38;5;" + std::to_string(color) + "m";
  out += text;
  out += "\x1b[0m";
  return out;
}

int occupant_color(const LabelTable& labels, const Occupant& o) {
  return kPalette[(labels.label(o) - 1) % std::size(kPalette)];
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw std::runtime_error("number formatting failed");
  return std::string(buf, end);
}

}  // namespace

std::vector<std::string> render_frame(const OccupancyFrame& frame, const ScenarioSpec& spec,
                                      std::span<const long> cumulative_rewards, RenderStyle style) {
  const LabelTable labels(spec);
  std::string row = "t=" + std::to_string(frame.t) + " |";
  for (const auto& cell : frame.occupants) {
    if (cell.empty()) {
      row += '.';
    } else if (cell.size() == 1) {
      const bool entity = cell[0].kind == OccupantKind::Entity;
      row += paint(entity ? "E" : "A", occupant_color(labels, cell[0]), style.color);
    } else {
      const auto agents = std::count_if(cell.begin(), cell.end(),
                                        [](const Occupant& o) { return o.kind == OccupantKind::Agent; });
      const auto entities = static_cast<std::ptrdiff_t>(cell.size()) - agents;
      if (agents == 0) {
        row += paint("=", 250, style.color, true);
      } else if (entities == 0) {
        row += paint("*", 196, style.color, true);
      } else {
        row += paint("X", 160, style.color, true);
      }
    }
  }
  row += '|';

  std::vector<std::string> lines{std::move(row)};
  for (std::size_t i = 0; i < spec.agents.size(); ++i) {
    const long reward = i < cumulative_rewards.size() ? cumulative_rewards[i] : 0;
    std::string line = "  " + spec.agents[i].id + " " + (reward > 0 ? "+" : "") + std::to_string(reward);
    lines.push_back(paint(line, occupant_color(labels, {OccupantKind::Agent, i}), style.color));
  }
  return lines;
}

std::string episode_csv(const EpisodeLog& log) {
  std::string out = "episode,agent_id,reward,ewma_reward,group_id,group_reward,total\n";
  if (log.episodes.empty()) return out;
  std::vector<std::vector<double>> smoothed;
  for (std::size_t a = 0; a < log.agent_ids.size(); ++a) smoothed.push_back(ewma(log.agent_series(a), log.ewma_beta));
  std::vector<std::size_t> group_of(log.agent_ids.size(), 0);
  for (std::size_t g = 0; g < log.groups.size(); ++g) {
    for (auto a : log.groups[g]) group_of.at(a) = g;
  }
  for (std::size_t e = 0; e < log.episodes.size(); ++e) {
    const auto& rec = log.episodes[e];
    for (std::size_t a = 0; a < log.agent_ids.size(); ++a) {
      const auto g = group_of[a];
      const long sum = rec.group_rewards.at(g);
      const std::string group_value =
          log.group_reward == GroupRewardMode::Sum
              ? std::to_string(sum)
              : format_double(static_cast<double>(sum) / static_cast<double>(log.groups[g].size()));
      out += std::to_string(rec.episode) + ',' + log.agent_ids[a] + ',' + std::to_string(rec.agent_rewards[a]) + ',' +
             format_double(smoothed[a][e]) + ',' + std::to_string(g) + ',' + group_value + ',' +
             std::to_string(rec.total) + '\n';
    }
  }
  return out;
}

void write_episode_csv(const EpisodeLog& log, const std::filesystem::path& path) {
  if (log.episodes.empty()) throw std::invalid_argument("refusing to write an empty episode log");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << episode_csv(log);
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

EpisodeLog parse_episode_csv(std::string_view text, GroupRewardMode mode) {
  EpisodeLog log;
  log.group_reward = mode;
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != "episode,agent_id,reward,ewma_reward,group_id,group_reward,total") {
    throw std::invalid_argument("missing or unexpected CSV header");
  }
  struct Row {
    std::size_t episode;
    std::string agent;
    long reward;
    std::size_t group;
    double group_value;
    long total;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    if (f.size() != 7) throw std::invalid_argument("CSV row has " + std::to_string(f.size()) + " fields");
    rows.push_back({std::stoul(f[0]), f[1], std::stol(f[2]), std::stoul(f[4]), std::stod(f[5]), std::stol(f[6])});
  }

  std::map<std::size_t, std::vector<std::size_t>> members;
  for (const auto& r : rows) {
    if (r.episode != 0) break;
    members[r.group].push_back(log.agent_ids.size());
    log.agent_ids.push_back(r.agent);
  }
  for (auto& [g, m] : members) log.groups.push_back(m);

  const std::size_t n = log.agent_ids.size();
  if (n == 0 || rows.size() % n != 0) throw std::invalid_argument("CSV rows do not form whole episodes");
  for (std::size_t base = 0; base < rows.size(); base += n) {
    EpisodeRecord rec;
    rec.episode = rows[base].episode;
    rec.total = rows[base].total;
    rec.group_rewards.assign(log.groups.size(), 0);
    for (std::size_t a = 0; a < n; ++a) {
      const auto& r = rows[base + a];
      if (r.episode != rec.episode || r.agent != log.agent_ids[a]) throw std::invalid_argument("CSV rows out of order");
      rec.agent_rewards.push_back(r.reward);
      const double size = static_cast<double>(log.groups.at(r.group).size());
      rec.group_rewards[r.group] = std::lround(mode == GroupRewardMode::Sum ? r.group_value : r.group_value * size);
    }
    log.episodes.push_back(std::move(rec));
  }
  return log;
}

namespace {

std::vector<std::unique_ptr<Learner>> make_learners(const ScenarioSpec& spec, const RunConfig& config) {
  std::vector<std::unique_ptr<Learner>> learners;
  const auto num_actions = action_space_size(spec.num_channels);
  for (std::size_t i = 0; i < spec.agents.size(); ++i) {
    const auto seed = derive_seed(config.seed, i);
    if (config.algorithm == Algorithm::Q) {
      learners.push_back(std::make_unique<QLearner>(num_actions, config.learner, seed));
    } else {
      learners.push_back(std::make_unique<ReinforceLearner>(num_actions, config.learner, seed));
    }
  }
  return learners;
}

void draw(std::ostream& out, const OccupancyFrame& frame, const ScenarioSpec& spec, std::span<const long> cumulative,
          RenderStyle style) {
  for (const auto& line : render_frame(frame, spec, cumulative, style)) out << line << '\n';
}

std::vector<ObservationKey> encode_all(const std::vector<Observation>& observations) {
  std::vector<ObservationKey> keys;
  keys.reserve(observations.size());
  for (const auto& o : observations) keys.push_back(encode_observation(o));
  return keys;
}

}  // namespace

TrainingResult train(const ScenarioSpec& spec, const RunConfig& config, std::ostream* render_out) {
  config.validate();
  TrainingResult result;
  auto& log = result.log;
  log.scenario_id = config.scenario_path.stem().string();
  log.algorithm = std::string(to_string(config.algorithm));
  log.seed = config.seed;
  log.ewma_beta = config.ewma_beta;
  log.group_reward = config.group_reward;
  log.groups = spec.groups;
  for (const auto& a : spec.agents) log.agent_ids.push_back(a.id);

  result.learners = make_learners(spec, config);
  auto& learners = result.learners;
  Environment env(spec);
  env.set_record_histories(false);
  const std::size_t n = spec.agents.size();
  std::vector<AgentAction> actions(n);

  for (std::size_t episode = 0; episode < config.episodes; ++episode) {
    const bool draw_episode = render_out && config.render == RenderMode::Terminal && episode + 1 == config.episodes;
    auto keys = encode_all(env.reset(derive_seed(config.seed, 1000003 + episode)));
    bool done = false;
    while (!done) {
      for (std::size_t i = 0; i < n; ++i) actions[i] = learners[i]->act(keys[i], true);
      auto step = env.step(actions);
      auto next = encode_all(step.observations);
      for (std::size_t i = 0; i < n; ++i) {
        learners[i]->observe({keys[i], actions[i].index(), static_cast<double>(step.rewards[i]), next[i], step.done});
      }
      if (draw_episode) draw(*render_out, step.frame, spec, env.state().cumulative_rewards, {});
      keys = std::move(next);
      done = step.done;
    }
    for (auto& l : learners) l->end_episode();

    EpisodeRecord rec;
    rec.episode = episode;
    rec.agent_rewards = env.state().cumulative_rewards;
    for (auto r : rec.agent_rewards) rec.total += r;
    std::vector<int> as_int(rec.agent_rewards.begin(), rec.agent_rewards.end());
    for (const auto& g : spec.groups) rec.group_rewards.push_back(group_reward(as_int, g));
    log.episodes.push_back(std::move(rec));
  }
  return result;
}

nlohmann::json make_checkpoint(const ScenarioSpec& spec, const TrainingResult& result) {
  nlohmann::json agents = nlohmann::json::object();
  for (std::size_t i = 0; i < spec.agents.size(); ++i) agents[spec.agents[i].id] = result.learners.at(i)->to_json();
  return {{"format", "rfrl-checkpoint"},
          {"version", 1},
          {"algorithm", result.log.algorithm},
          {"num_channels", spec.num_channels},
          {"agents", std::move(agents)}};
}

EpisodeLog run_training(const RunConfig& config, std::ostream* render_out) {
  const auto spec = load_scenario(config.scenario_path);
  auto result = train(spec, config, render_out);
  if (!config.out_dir.empty()) {
    std::filesystem::create_directories(config.out_dir);
    write_episode_csv(result.log, config.out_dir / "rewards.csv");

    std::ofstream policy(config.out_dir / "policy.json", std::ios::binary);
    if (!policy) throw std::runtime_error("cannot write policy checkpoint");
    policy << make_checkpoint(spec, result).dump() << '\n';

    nlohmann::json run = {{"scenario", config.scenario_path.string()},
                          {"scenario_id", result.log.scenario_id},
                          {"algorithm", result.log.algorithm},
                          {"episodes", config.episodes},
                          {"seed", config.seed},
                          {"ewma_beta", config.ewma_beta},
                          {"group_reward", to_string(config.group_reward)},
                          {"learner",
                           {{"alpha", config.learner.alpha},
                            {"gamma", config.learner.gamma},
                            {"epsilon_start", config.learner.epsilon_start},
                            {"epsilon_end", config.learner.epsilon_end},
                            {"epsilon_decay_steps", config.learner.epsilon_decay_steps},
                            {"replay_capacity", config.learner.replay_capacity},
                            {"batch_size", config.learner.batch_size},
                            {"pg_step_size", config.learner.pg_step_size}}}};
    std::ofstream meta(config.out_dir / "run.json", std::ios::binary);
    if (!meta) throw std::runtime_error("cannot write run metadata");
    meta << run.dump(2) << '\n';
  }
  return std::move(result.log);
}

RolloutResult greedy_rollout(const ScenarioSpec& spec, const nlohmann::json& checkpoint, std::ostream* render_out,
                             RenderStyle style) {
  if (!checkpoint.is_object() || checkpoint.value("format", "") != "rfrl-checkpoint") {
    throw std::invalid_argument("not a training checkpoint");
  }
  if (checkpoint.value("version", 0) != 1) throw std::invalid_argument("unsupported checkpoint version");
  const auto& agents = checkpoint.at("agents");
  if (agents.size() != spec.agents.size()) {
    throw std::invalid_argument("checkpoint holds " + std::to_string(agents.size()) + " agent policies, scenario has " +
                                std::to_string(spec.agents.size()) + " agents");
  }
  std::vector<GreedyPolicy> policies;
  for (const auto& a : spec.agents) {
    if (!agents.contains(a.id)) throw std::invalid_argument("checkpoint has no policy for agent '" + a.id + "'");
    policies.emplace_back(agents.at(a.id));
    if (policies.back().num_actions() != action_space_size(spec.num_channels)) {
      throw std::invalid_argument("checkpoint for agent '" + a.id + "' has a different action space");
    }
  }

  Environment env(spec);
  auto keys = encode_all(env.reset(0));
  RolloutResult result;
  std::vector<AgentAction> actions(spec.agents.size());
  bool done = false;
  while (!done) {
    for (std::size_t i = 0; i < actions.size(); ++i) actions[i] = policies[i].act(keys[i]);
    auto step = env.step(actions);
    if (render_out) draw(*render_out, step.frame, spec, env.state().cumulative_rewards, style);
    keys = encode_all(step.observations);
    result.frames.push_back(std::move(step.frame));
    done = step.done;
  }
  result.agent_rewards = env.state().cumulative_rewards;
  for (auto r : result.agent_rewards) result.total += r;
  return result;
}

}  // namespace rfrl
