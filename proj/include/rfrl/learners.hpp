#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "rfrl/env.hpp"
#include "rfrl/rng.hpp"

namespace rfrl {

struct LearnerConfig {
  double alpha = 0.1;
  double gamma = 0.9;
  double epsilon_start = 1.0;
  double epsilon_end = 0.01;
  std::size_t epsilon_decay_steps = 20000;
  std::size_t replay_capacity = 60000;
  std::size_t batch_size = 32;
  double pg_step_size = 0.01;

  void validate() const;
};

/// Linear decay from epsilon_start to epsilon_end over epsilon_decay_steps.
double epsilon_at(const LearnerConfig& config, std::size_t step);

/// Injective byte encoding of an observation (mode, dimensions, cells).
class ObservationKey {
 public:
  ObservationKey() = default;
  explicit ObservationKey(std::string bytes) : bytes_(std::move(bytes)) {}

  const std::string& bytes() const { return bytes_; }
  std::string hex() const;
  static ObservationKey from_hex(std::string_view hex);

  bool operator==(const ObservationKey&) const = default;
  auto operator<=>(const ObservationKey&) const = default;

 private:
  std::string bytes_;
};

struct ObservationKeyHash {
  std::size_t operator()(const ObservationKey& k) const noexcept { return std::hash<std::string>{}(k.bytes()); }
};

ObservationKey encode_observation(const Observation& obs);

struct Transition {
  ObservationKey state;
  std::size_t action = 0;  // AgentAction::index()
  double reward = 0.0;
  ObservationKey next_state;
  bool done = false;

  bool operator==(const Transition&) const = default;
};

/// Tabular action values; unseen keys read as default_value.
class QPolicy {
 public:
  explicit QPolicy(std::size_t num_actions, double default_value = 0.0);

  std::size_t num_actions() const { return num_actions_; }
  double default_value() const { return default_value_; }
  std::size_t size() const { return table_.size(); }

  /// Values for `key`; a view of default values when the key is unseen.
  std::span<const double> values(const ObservationKey& key) const;
  std::vector<double>& mutable_values(const ObservationKey& key);
  double max_value(const ObservationKey& key) const;
  bool contains(const ObservationKey& key) const { return table_.contains(key); }

  const std::unordered_map<ObservationKey, std::vector<double>, ObservationKeyHash>& table() const { return table_; }

 private:
  std::size_t num_actions_;
  double default_value_;
  std::vector<double> defaults_;
  std::unordered_map<ObservationKey, std::vector<double>, ObservationKeyHash> table_;
};

/// Lowest index among maximal entries.
std::size_t argmax(std::span<const double> values);

/// epsilon-greedy over the policy's value vector.
AgentAction select_action(const QPolicy& policy, const ObservationKey& key, double epsilon, Rng& rng);

/// Q(s,a) += alpha * (r + gamma * max Q(s',.) - Q(s,a)); no bootstrap when done.
void q_update(QPolicy& policy, const Transition& t, double alpha, double gamma);

/// Fixed-capacity FIFO store; the oldest transition is evicted first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  void push(Transition t);
  /// i = 0 is the oldest stored transition.
  const Transition& at(std::size_t i) const;

  /// Uniform without replacement (Floyd's algorithm). Throws if
  /// batch_size > size().
  std::vector<std::size_t> sample_indices(std::size_t batch_size, Rng& rng) const;
  std::vector<Transition> sample(std::size_t batch_size, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // index of the oldest entry once full
  std::vector<Transition> entries_;
};

struct TrajectoryStep {
  ObservationKey state;
  std::size_t action = 0;
  double reward = 0.0;
};

/// Tabular softmax policy over action preferences.
class SoftmaxPolicy {
 public:
  explicit SoftmaxPolicy(std::size_t num_actions);

  std::size_t num_actions() const { return num_actions_; }
  std::span<const double> preferences(const ObservationKey& key) const;
  std::vector<double>& mutable_preferences(const ObservationKey& key);
  std::vector<double> probabilities(const ObservationKey& key) const;

  const std::unordered_map<ObservationKey, std::vector<double>, ObservationKeyHash>& table() const { return table_; }

 private:
  std::size_t num_actions_;
  std::vector<double> zeros_;
  std::unordered_map<ObservationKey, std::vector<double>, ObservationKeyHash> table_;
};

std::vector<double> softmax(std::span<const double> preferences);

/// Discounted returns G_t = sum_k gamma^k r_{t+k}.
std::vector<double> discounted_returns(std::span<const TrajectoryStep> trajectory, double gamma);

/// sum_t G_t * log pi(a_t | s_t); its gradient is the REINFORCE estimator.
double reinforce_objective(const SoftmaxPolicy& policy, std::span<const TrajectoryStep> trajectory, double gamma);

using PreferenceGradient = std::unordered_map<ObservationKey, std::vector<double>, ObservationKeyHash>;

/// Analytic gradient of reinforce_objective with respect to the preferences.
PreferenceGradient reinforce_gradient(const SoftmaxPolicy& policy, std::span<const TrajectoryStep> trajectory,
                                      double gamma);

/// Ascend the REINFORCE gradient; throws on an empty trajectory.
void pg_update(SoftmaxPolicy& policy, std::span<const TrajectoryStep> trajectory, double gamma, double step_size);

/// Per-agent learner used by the training harness.
class Learner {
 public:
  virtual ~Learner() = default;

  virtual std::string_view algorithm() const = 0;
  virtual AgentAction act(const ObservationKey& key, bool explore) = 0;
  virtual void observe(const Transition& t) = 0;
  virtual void end_episode() = 0;
  virtual nlohmann::json to_json() const = 0;
};

class QLearner final : public Learner {
 public:
  QLearner(std::size_t num_actions, LearnerConfig config, std::uint64_t seed);

  std::string_view algorithm() const override { return "q"; }
  AgentAction act(const ObservationKey& key, bool explore) override;
  void observe(const Transition& t) override;
  void end_episode() override {}
  nlohmann::json to_json() const override;

  const QPolicy& policy() const { return policy_; }
  QPolicy& policy() { return policy_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  std::size_t steps() const { return steps_; }

 private:
  LearnerConfig config_;
  QPolicy policy_;
  ReplayBuffer buffer_;
  Rng rng_;
  std::size_t steps_ = 0;
};

class ReinforceLearner final : public Learner {
 public:
  ReinforceLearner(std::size_t num_actions, LearnerConfig config, std::uint64_t seed);

  std::string_view algorithm() const override { return "reinforce"; }
  AgentAction act(const ObservationKey& key, bool explore) override;
  void observe(const Transition& t) override;
  void end_episode() override;
  nlohmann::json to_json() const override;

  const SoftmaxPolicy& policy() const { return policy_; }
  SoftmaxPolicy& policy() { return policy_; }

 private:
  LearnerConfig config_;
  SoftmaxPolicy policy_;
  std::vector<TrajectoryStep> trajectory_;
  Rng rng_;
};

// Checkpoint: {"format": "rfrl-policy", "version": 1, "algorithm": ...,
// "num_actions": n, "table": {"<hex key>": [values...]}}. Keys are written
// in sorted order so equal policies serialize identically.
nlohmann::json q_policy_to_json(const QPolicy& policy);
QPolicy q_policy_from_json(const nlohmann::json& j);
nlohmann::json softmax_policy_to_json(const SoftmaxPolicy& policy);
SoftmaxPolicy softmax_policy_from_json(const nlohmann::json& j);

/// Greedy action under a checkpointed policy of either kind.
class GreedyPolicy {
 public:
  explicit GreedyPolicy(const nlohmann::json& checkpoint);
  AgentAction act(const ObservationKey& key) const;
  std::size_t num_actions() const;

 private:
  std::unique_ptr<QPolicy> q_;
  std::unique_ptr<SoftmaxPolicy> softmax_;
};

}  // namespace rfrl
