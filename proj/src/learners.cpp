#include "rfrl/learners.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace rfrl {

void LearnerConfig::validate() const {
  // alpha = 0 is accepted so that frozen-policy rollouts can reuse this path.
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0, 1)");
  for (double e : {epsilon_start, epsilon_end}) {
    if (!(e >= 0.0 && e <= 1.0)) throw std::invalid_argument("epsilon must lie in [0, 1]");
  }
  if (replay_capacity == 0) throw std::invalid_argument("replay capacity must be positive");
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (!(pg_step_size > 0.0) || !std::isfinite(pg_step_size)) throw std::invalid_argument("pg step size must be positive");
}

double epsilon_at(const LearnerConfig& config, std::size_t step) {
  if (config.epsilon_decay_steps == 0 || step >= config.epsilon_decay_steps) return config.epsilon_end;
  const double frac = static_cast<double>(step) / static_cast<double>(config.epsilon_decay_steps);
  return config.epsilon_start + frac * (config.epsilon_end - config.epsilon_start);
}

namespace {

void put_varint(std::string& out, std::uint64_t v) {
  while (v >= 0x80) {
    out.push_back(static_cast<char>((v & 0x7f) | 0x80));
    v >>= 7;
  }
  out.push_back(static_cast<char>(v));
}

}  // namespace

std::string ObservationKey::hex() const {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes_.size() * 2);
  for (unsigned char c : bytes_) {
    out.push_back(digits[c >> 4]);
    out.push_back(digits[c & 0xf]);
  }
  return out;
}

ObservationKey ObservationKey::from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) throw std::invalid_argument("odd-length hex key");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw std::invalid_argument("invalid hex digit in key");
  };
  std::string bytes;
  bytes.reserve(hex.size() / 2);
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    bytes.push_back(static_cast<char>(nibble(hex[i]) << 4 | nibble(hex[i + 1])));
  }
  return ObservationKey(std::move(bytes));
}

ObservationKey encode_observation(const Observation& obs) {
  std::string bytes;
  bytes.reserve(obs.cells.size() + 4);
  bytes.push_back(obs.mode == ObservationMode::Detect ? 'd' : 'c');
  put_varint(bytes, obs.num_channels);
  put_varint(bytes, obs.history_length);
  for (auto c : obs.cells) put_varint(bytes, c);
  return ObservationKey(std::move(bytes));
}

QPolicy::QPolicy(std::size_t num_actions, double default_value)
    : num_actions_(num_actions), default_value_(default_value), defaults_(num_actions, default_value) {
  if (num_actions == 0) throw std::invalid_argument("policy needs at least one action");
}

std::span<const double> QPolicy::values(const ObservationKey& key) const {
  auto it = table_.find(key);
  return it == table_.end() ? std::span<const double>(defaults_) : std::span<const double>(it->second);
}

std::vector<double>& QPolicy::mutable_values(const ObservationKey& key) {
  auto [it, inserted] = table_.try_emplace(key, defaults_);
  return it->second;
}

double QPolicy::max_value(const ObservationKey& key) const {
  auto v = values(key);
  return *std::max_element(v.begin(), v.end());
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

AgentAction select_action(const QPolicy& policy, const ObservationKey& key, double epsilon, Rng& rng) {
  if (epsilon > 0.0) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng) < epsilon) {
      std::uniform_int_distribution<std::size_t> pick(0, policy.num_actions() - 1);
      return AgentAction::from_index(pick(rng));
    }
  }
  return AgentAction::from_index(argmax(policy.values(key)));
}

void q_update(QPolicy& policy, const Transition& t, double alpha, double gamma) {
  if (t.action >= policy.num_actions()) throw std::out_of_range("transition action outside the action space");
  if (alpha == 0.0) return;
  const double target = t.reward + (t.done ? 0.0 : gamma * policy.max_value(t.next_state));
  auto& q = policy.mutable_values(t.state)[t.action];
  q += alpha * (target - q);
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
  entries_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(Transition t) {
  if (entries_.size() < capacity_) {
    entries_.push_back(std::move(t));
    return;
  }
  entries_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= entries_.size()) throw std::out_of_range("replay index out of range");
  return entries_[(head_ + i) % entries_.size()];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch_size, Rng& rng) const {
  const std::size_t n = entries_.size();
  if (batch_size > n) {
    throw std::invalid_argument("cannot sample " + std::to_string(batch_size) + " from a buffer of " +
                                std::to_string(n));
  }
  std::vector<std::size_t> chosen;
  chosen.reserve(batch_size);
  for (std::size_t j = n - batch_size; j < n; ++j) {
    std::uniform_int_distribution<std::size_t> pick(0, j);
    const std::size_t candidate = pick(rng);
    if (std::find(chosen.begin(), chosen.end(), candidate) == chosen.end()) {
      chosen.push_back(candidate);
    } else {
      chosen.push_back(j);
    }
  }
  return chosen;
}

std::vector<Transition> ReplayBuffer::sample(std::size_t batch_size, Rng& rng) const {
  std::vector<Transition> batch;
  batch.reserve(batch_size);
  for (auto i : sample_indices(batch_size, rng)) batch.push_back(at(i));
  return batch;
}

SoftmaxPolicy::SoftmaxPolicy(std::size_t num_actions) : num_actions_(num_actions), zeros_(num_actions, 0.0) {
  if (num_actions == 0) throw std::invalid_argument("policy needs at least one action");
}

std::span<const double> SoftmaxPolicy::preferences(const ObservationKey& key) const {
  auto it = table_.find(key);
  return it == table_.end() ? std::span<const double>(zeros_) : std::span<const double>(it->second);
}

std::vector<double>& SoftmaxPolicy::mutable_preferences(const ObservationKey& key) {
  return table_.try_emplace(key, zeros_).first->second;
}

std::vector<double> SoftmaxPolicy::probabilities(const ObservationKey& key) const {
  return softmax(preferences(key));
}

std::vector<double> softmax(std::span<const double> preferences) {
  std::vector<double> p(preferences.begin(), preferences.end());
  if (p.empty()) return p;
  const double top = *std::max_element(p.begin(), p.end());
  double sum = 0.0;
  for (auto& x : p) {
    x = std::exp(x - top);
    sum += x;
  }
  for (auto& x : p) x /= sum;
  return p;
}

std::vector<double> discounted_returns(std::span<const TrajectoryStep> trajectory, double gamma) {
  std::vector<double> returns(trajectory.size());
  double g = 0.0;
  for (std::size_t i = trajectory.size(); i-- > 0;) {
    g = trajectory[i].reward + gamma * g;
    returns[i] = g;
  }
  return returns;
}

double reinforce_objective(const SoftmaxPolicy& policy, std::span<const TrajectoryStep> trajectory, double gamma) {
  const auto returns = discounted_returns(trajectory, gamma);
  double total = 0.0;
  for (std::size_t t = 0; t < trajectory.size(); ++t) {
    const auto p = policy.probabilities(trajectory[t].state);
    total += returns[t] * std::log(p.at(trajectory[t].action));
  }
  return total;
}

PreferenceGradient reinforce_gradient(const SoftmaxPolicy& policy, std::span<const TrajectoryStep> trajectory,
                                      double gamma) {
  const auto returns = discounted_returns(trajectory, gamma);
  PreferenceGradient grad;
  for (std::size_t t = 0; t < trajectory.size(); ++t) {
    if (returns[t] == 0.0) continue;
    const auto& step = trajectory[t];
    if (step.action >= policy.num_actions()) throw std::out_of_range("trajectory action outside the action space");
    const auto p = policy.probabilities(step.state);
    auto& g = grad.try_emplace(step.state, policy.num_actions(), 0.0).first->second;
    for (std::size_t b = 0; b < p.size(); ++b) {
      g[b] += returns[t] * ((b == step.action ? 1.0 : 0.0) - p[b]);
    }
  }
  return grad;
}

void pg_update(SoftmaxPolicy& policy, std::span<const TrajectoryStep> trajectory, double gamma, double step_size) {
  if (trajectory.empty()) throw std::invalid_argument("policy-gradient update needs a nonempty trajectory");
  for (const auto& [key, g] : reinforce_gradient(policy, trajectory, gamma)) {
    auto& theta = policy.mutable_preferences(key);
    for (std::size_t b = 0; b < g.size(); ++b) theta[b] += step_size * g[b];
  }
}

QLearner::QLearner(std::size_t num_actions, LearnerConfig config, std::uint64_t seed)
    : config_(config), policy_(num_actions), buffer_(config.replay_capacity), rng_(seed) {
  config_.validate();
}

AgentAction QLearner::act(const ObservationKey& key, bool explore) {
  return select_action(policy_, key, explore ? epsilon_at(config_, steps_) : 0.0, rng_);
}

void QLearner::observe(const Transition& t) {
  buffer_.push(t);
  ++steps_;
  if (buffer_.size() < config_.batch_size) return;
  for (auto i : buffer_.sample_indices(config_.batch_size, rng_)) {
    q_update(policy_, buffer_.at(i), config_.alpha, config_.gamma);
  }
}

nlohmann::json QLearner::to_json() const { return q_policy_to_json(policy_); }

ReinforceLearner::ReinforceLearner(std::size_t num_actions, LearnerConfig config, std::uint64_t seed)
    : config_(config), policy_(num_actions), rng_(seed) {
  config_.validate();
}

AgentAction ReinforceLearner::act(const ObservationKey& key, bool explore) {
  const auto p = policy_.probabilities(key);
  if (!explore) return AgentAction::from_index(argmax(p));
  std::discrete_distribution<std::size_t> pick(p.begin(), p.end());
  return AgentAction::from_index(pick(rng_));
}

void ReinforceLearner::observe(const Transition& t) { trajectory_.push_back({t.state, t.action, t.reward}); }

void ReinforceLearner::end_episode() {
  if (trajectory_.empty()) return;
  pg_update(policy_, trajectory_, config_.gamma, config_.pg_step_size);
  trajectory_.clear();
}

nlohmann::json ReinforceLearner::to_json() const { return softmax_policy_to_json(policy_); }

namespace {

template <typename Table>
nlohmann::json table_to_json(const Table& table) {
  std::map<std::string, const std::vector<double>*> sorted;
  for (const auto& [key, values] : table) sorted.emplace(key.hex(), &values);
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [hex, values] : sorted) out[hex] = *values;
  return out;
}

void check_header(const nlohmann::json& j, std::string_view algorithm) {
  if (!j.is_object() || j.value("format", "") != "rfrl-policy") throw std::invalid_argument("not a policy checkpoint");
  if (j.value("version", 0) != 1) throw std::invalid_argument("unsupported checkpoint version");
  if (j.value("algorithm", "") != algorithm) {
    throw std::invalid_argument("checkpoint algorithm is not '" + std::string(algorithm) + "'");
  }
}

template <typename Assign>
void load_table(const nlohmann::json& j, std::size_t num_actions, Assign assign) {
  for (const auto& [hex, values] : j.at("table").items()) {
    auto v = values.template get<std::vector<double>>();
    if (v.size() != num_actions) throw std::invalid_argument("checkpoint row has the wrong length");
    for (double x : v) {
      if (!std::isfinite(x)) throw std::invalid_argument("checkpoint value is not finite");
    }
    assign(ObservationKey::from_hex(hex), std::move(v));
  }
}

}  // namespace

nlohmann::json q_policy_to_json(const QPolicy& policy) {
  return {{"format", "rfrl-policy"},
          {"version", 1},
          {"algorithm", "q"},
          {"num_actions", policy.num_actions()},
          {"default_value", policy.default_value()},
          {"table", table_to_json(policy.table())}};
}

QPolicy q_policy_from_json(const nlohmann::json& j) {
  check_header(j, "q");
  QPolicy policy(j.at("num_actions").get<std::size_t>(), j.value("default_value", 0.0));
  load_table(j, policy.num_actions(),
             [&](ObservationKey key, std::vector<double> v) { policy.mutable_values(key) = std::move(v); });
  return policy;
}

nlohmann::json softmax_policy_to_json(const SoftmaxPolicy& policy) {
  return {{"format", "rfrl-policy"},
          {"version", 1},
          {"algorithm", "reinforce"},
          {"num_actions", policy.num_actions()},
          {"table", table_to_json(policy.table())}};
}

SoftmaxPolicy softmax_policy_from_json(const nlohmann::json& j) {
  check_header(j, "reinforce");
  SoftmaxPolicy policy(j.at("num_actions").get<std::size_t>());
  load_table(j, policy.num_actions(),
             [&](ObservationKey key, std::vector<double> v) { policy.mutable_preferences(key) = std::move(v); });
  return policy;
}

GreedyPolicy::GreedyPolicy(const nlohmann::json& checkpoint) {
  const auto algorithm = checkpoint.value("algorithm", "");
  if (algorithm == "q") {
    q_ = std::make_unique<QPolicy>(q_policy_from_json(checkpoint));
  } else if (algorithm == "reinforce") {
    softmax_ = std::make_unique<SoftmaxPolicy>(softmax_policy_from_json(checkpoint));
  } else {
    throw std::invalid_argument("unknown checkpoint algorithm '" + algorithm + "'");
  }
}

AgentAction GreedyPolicy::act(const ObservationKey& key) const {
  if (q_) return AgentAction::from_index(argmax(q_->values(key)));
  return AgentAction::from_index(argmax(softmax_->probabilities(key)));
}

std::size_t GreedyPolicy::num_actions() const { return q_ ? q_->num_actions() : softmax_->num_actions(); }

}  // namespace rfrl
