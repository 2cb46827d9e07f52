// Command-line front end: train, validate, rollout, iq-demo.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rfrl/harness.hpp"
#include "rfrl/iq.hpp"
#include "rfrl/scenario.hpp"

namespace {

std::vector<rfrl::iq::Assignment> parse_assignments(const std::string& text, std::size_t num_channels) {
  std::vector<rfrl::iq::Assignment> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("assignment '" + item + "' is not <channel>:<mod>");
    rfrl::iq::Assignment a;
    std::size_t used = 0;
    a.channel = std::stoul(item.substr(0, colon), &used);
    if (used != colon) throw std::invalid_argument("bad channel in assignment '" + item + "'");
    if (a.channel >= num_channels) throw std::invalid_argument("channel out of range in assignment '" + item + "'");
    a.modulation = rfrl::iq::parse_modulation(item.substr(colon + 1));
    a.occupant = "tx" + std::to_string(out.size());
    out.push_back(std::move(a));
  }
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"Multi-agent spectrum RL testbed"};
  app.require_subcommand(1);

  rfrl::RunConfig train_cfg;
  std::string algo = "q";
  std::string render = "off";
  std::string group_mode = "sum";
  auto* train = app.add_subcommand("train", "Train one learner per agent and log episode rewards");
  train->add_option("--scenario", train_cfg.scenario_path, "Scenario JSON file")->required();
  train->add_option("--algo", algo, "q | reinforce")->check(CLI::IsMember({"q", "reinforce"}));
  train->add_option("--episodes", train_cfg.episodes, "Training episodes")->check(CLI::PositiveNumber);
  train->add_option("--seed", train_cfg.seed, "RNG seed");
  train->add_option("--ewma-beta", train_cfg.ewma_beta, "EWMA smoothing factor in [0, 1)");
  train->add_option("--out", train_cfg.out_dir, "Output directory")->required();
  train->add_option("--render", render, "off | terminal")->check(CLI::IsMember({"off", "terminal"}));
  train->add_option("--group-reward", group_mode, "sum | mean")->check(CLI::IsMember({"sum", "mean"}));
  train->add_option("--alpha", train_cfg.learner.alpha, "Q-learning rate");
  train->add_option("--gamma", train_cfg.learner.gamma, "Discount factor");
  train->add_option("--epsilon-end", train_cfg.learner.epsilon_end, "Final exploration rate");
  train->add_option("--epsilon-decay-steps", train_cfg.learner.epsilon_decay_steps, "Per-agent decay steps");
  train->add_option("--replay-capacity", train_cfg.learner.replay_capacity, "Replay buffer capacity");
  train->add_option("--batch-size", train_cfg.learner.batch_size, "Replay batch size");
  train->add_option("--pg-step-size", train_cfg.learner.pg_step_size, "Policy-gradient step size");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Parse and validate a scenario file");
  validate->add_option("--scenario", validate_path, "Scenario JSON file")->required();

  std::string rollout_scenario, rollout_checkpoint;
  bool greedy = false;
  bool no_color = false;
  auto* rollout = app.add_subcommand("rollout", "Run one greedy episode from a policy checkpoint");
  rollout->add_option("--scenario", rollout_scenario, "Scenario JSON file")->required();
  rollout->add_option("--checkpoint", rollout_checkpoint, "policy.json from a training run")->required();
  rollout->add_flag("--greedy", greedy, "Greedy action selection (the only supported mode)")->required();
  rollout->add_flag("--no-color", no_color, "Plain-text rendering");

  std::size_t iq_channels = 10;
  std::string iq_assign;
  std::string iq_out;
  std::uint64_t iq_seed = 0;
  rfrl::iq::IQConfig iq_cfg;
  auto* iq_demo = app.add_subcommand("iq-demo", "Synthesize one IQ frame and run energy detection on it");
  iq_demo->add_option("--channels", iq_channels, "Channel count")->check(CLI::PositiveNumber);
  iq_demo->add_option("--assign", iq_assign, "Comma list of <channel>:<tone|ldapm>")->required();
  iq_demo->add_option("--out", iq_out, "Raw cf32 output path (sidecar at <path>.json)")->required();
  iq_demo->add_option("--seed", iq_seed, "RNG seed");
  iq_demo->add_option("--samples", iq_cfg.samples_per_step, "Samples per frame");
  iq_demo->add_option("--ldapm-order", iq_cfg.ldapm_order, "Constellation size: 2, 4, 8 or 16");
  iq_demo->add_option("--threshold-factor", iq_cfg.threshold_factor, "Multiple of expected noise band energy");

  CLI11_PARSE(app, argc, argv);

  if (*train) {
    train_cfg.algorithm = rfrl::parse_algorithm(algo);
    train_cfg.render = render == "terminal" ? rfrl::RenderMode::Terminal : rfrl::RenderMode::Off;
    train_cfg.group_reward = rfrl::parse_group_reward_mode(group_mode);
    const auto log = rfrl::run_training(train_cfg, &std::cout);
    const auto& last = log.episodes.back();
    std::cout << "trained " << log.episodes.size() << " episodes; final episode total " << last.total << "\n"
              << "wrote " << (train_cfg.out_dir / "rewards.csv").string() << ", policy.json, run.json\n";
    return 0;
  }
  if (*validate) {
    const auto spec = rfrl::load_scenario(validate_path);
    std::cout << validate_path << ": ok (" << spec.num_channels << " channels, " << spec.episode_length
              << " steps, " << spec.entities.size() << " entities, " << spec.agents.size() << " agents, "
              << spec.groups.size() << " groups)\n";
    return 0;
  }
  if (*rollout) {
    const auto spec = rfrl::load_scenario(rollout_scenario);
    std::ifstream in(rollout_checkpoint);
    if (!in) throw std::runtime_error("cannot open checkpoint '" + rollout_checkpoint + "'");
    const auto checkpoint = nlohmann::json::parse(in);
    const auto result = rfrl::greedy_rollout(spec, checkpoint, &std::cout, {!no_color});
    for (std::size_t i = 0; i < spec.agents.size(); ++i) {
      std::cout << spec.agents[i].id << " " << result.agent_rewards[i] << "\n";
    }
    std::cout << "total " << result.total << "\n";
    return 0;
  }
  if (*iq_demo) {
    iq_cfg.validate();
    const auto assignments = parse_assignments(iq_assign, iq_channels);
    const auto frame = rfrl::iq::synth_step(assignments, iq_channels, iq_cfg, iq_seed);
    rfrl::iq::write_iq_dump(iq_out, frame, iq_cfg, iq_channels, assignments, iq_seed);
    const auto energies = rfrl::iq::band_energies(frame, iq_channels);
    const auto occupied = rfrl::iq::infer_occupancy(energies, iq_cfg);
    std::cout << "threshold " << iq_cfg.threshold_factor * rfrl::iq::noise_band_energy(iq_cfg, iq_channels) << "\n";
    for (std::size_t k = 0; k < iq_channels; ++k) {
      std::cout << "channel " << k << " energy " << energies[k] << (occupied[k] ? " occupied" : "") << "\n";
    }
    return 0;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
