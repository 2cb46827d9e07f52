#include "doctest.h"

#include <cmath>
#include <set>

#include "rfrl/learners.hpp"

using namespace rfrl;

namespace {

ObservationKey key(const std::string& s) { return ObservationKey(s); }

Observation detect(std::vector<LabelTable::Label> cells) {
  Observation o;
  o.mode = ObservationMode::Detect;
  o.num_channels = cells.size();
  o.cells = std::move(cells);
  return o;
}

Transition tr(int id) { return {key("s" + std::to_string(id)), static_cast<std::size_t>(id % 3), 1.0 * id, key("n"), false}; }

}  // namespace

TEST_CASE("config validation and epsilon schedule") {
  LearnerConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.replay_capacity == 60000);
  auto bad = cfg;
  bad.alpha = 1.5;
  CHECK_THROWS(bad.validate());
  bad = cfg;
  bad.gamma = 1.0;
  CHECK_THROWS(bad.validate());
  bad = cfg;
  bad.epsilon_end = -0.1;
  CHECK_THROWS(bad.validate());
  CHECK(epsilon_at(cfg, 0) == 1.0);
  CHECK(epsilon_at(cfg, cfg.epsilon_decay_steps / 2) == doctest::Approx((1.0 + cfg.epsilon_end) / 2));
  CHECK(epsilon_at(cfg, cfg.epsilon_decay_steps) == doctest::Approx(cfg.epsilon_end));
  CHECK(epsilon_at(cfg, 10 * cfg.epsilon_decay_steps) == doctest::Approx(cfg.epsilon_end));
}

TEST_CASE("encode_observation") {
  const auto a = detect({0, 1, 0, 0});
  CHECK(encode_observation(a) == encode_observation(a));
  CHECK(encode_observation(a) != encode_observation(detect({0, 1, 1, 0})));

  Observation c = a;
  c.mode = ObservationMode::Classify;
  c.cells = {0, 3, 0, 0};
  CHECK(encode_observation(c) != encode_observation(threshold_to_detect(c)));
  Observation c1 = c;
  c1.cells = {0, 1, 0, 0};
  CHECK(encode_observation(c1) != encode_observation(threshold_to_detect(c1)));

  // Same cells, different split between channels and history.
  Observation h = detect({0, 1, 0, 0});
  h.num_channels = 2;
  h.history_length = 2;
  CHECK(encode_observation(h) != encode_observation(a));

  // Injective over all 4-channel binary views and a range of labels.
  std::set<ObservationKey> keys;
  for (unsigned bits = 0; bits < 16; ++bits) {
    keys.insert(encode_observation(detect({LabelTable::Label(bits & 1), LabelTable::Label(bits >> 1 & 1),
                                            LabelTable::Label(bits >> 2 & 1), LabelTable::Label(bits >> 3 & 1)})));
  }
  for (LabelTable::Label l = 0; l < 400; ++l) {
    Observation o;
    o.mode = ObservationMode::Classify;
    o.num_channels = 1;
    o.cells = {l};
    keys.insert(encode_observation(o));
  }
  CHECK(keys.size() == 16 + 400);

  const auto k = encode_observation(c);
  CHECK(ObservationKey::from_hex(k.hex()) == k);
}

TEST_CASE("select_action examples") {
  Rng rng(1);
  QPolicy p(11);
  p.mutable_values(key("s")) = {0, 3, 1, 0, 0, 0, 0, 0, 0, 0, 0};
  CHECK(select_action(p, key("s"), 0.0, rng).index() == 1);
  CHECK(select_action(p, key("unseen"), 0.0, rng).index() == 0);
  p.mutable_values(key("t")) = std::vector<double>(11, 2.5);
  CHECK(select_action(p, key("t"), 0.0, rng).index() == 0);
  CHECK(argmax(std::vector<double>{-1, 4, 4, 2}) == 1);
}

TEST_CASE("select_action with epsilon 1 is uniform") {
  Rng rng(42);
  QPolicy p(11);
  p.mutable_values(key("s"))[5] = 10.0;
  constexpr int draws = 10000;
  std::vector<int> counts(11, 0);
  for (int i = 0; i < draws; ++i) ++counts[select_action(p, key("s"), 1.0, rng).index()];
  const double mean = draws / 11.0;
  const double sigma = std::sqrt(draws * (1.0 / 11) * (10.0 / 11));
  for (int c : counts) CHECK(std::abs(c - mean) <= 3 * sigma);
}

TEST_CASE("q_update examples") {
  QPolicy p(3);
  q_update(p, {key("s"), 1, 1.0, key("x"), true}, 0.5, 0.9);
  CHECK(p.values(key("s"))[1] == doctest::Approx(0.5));

  QPolicy q(3);
  q.mutable_values(key("n")) = {0, 2, 1};
  q_update(q, {key("s"), 2, 1.0, key("n"), false}, 0.5, 0.9);
  CHECK(q.values(key("s"))[2] == doctest::Approx(1.4));
  CHECK(q.values(key("s"))[0] == 0.0);
  CHECK(q.values(key("n"))[1] == 2.0);

  QPolicy z(3);
  z.mutable_values(key("s")) = {0.25, -1, 3};
  const auto before = z.table();
  q_update(z, {key("s"), 0, 1.0, key("n"), false}, 0.0, 0.9);
  CHECK(z.table() == before);
}

TEST_CASE("q_update contracts toward the Bellman target") {
  Rng rng(3);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int trial = 0; trial < 200; ++trial) {
    QPolicy p(4);
    p.mutable_values(key("s")) = {u(rng), u(rng), u(rng), u(rng)};
    p.mutable_values(key("n")) = {u(rng), u(rng), u(rng), u(rng)};
    const double alpha = std::uniform_real_distribution<double>(0, 1)(rng);
    const double gamma = 0.9;
    const Transition t{key("s"), 2, u(rng), key("n"), trial % 4 == 0};
    const double old = p.values(key("s"))[2];
    const double target = t.reward + (t.done ? 0.0 : gamma * p.max_value(key("n")));
    const auto others = p.values(key("n"));
    const std::vector<double> next_before(others.begin(), others.end());
    q_update(p, t, alpha, gamma);
    CHECK(std::abs(p.values(key("s"))[2] - target) == doctest::Approx((1 - alpha) * std::abs(old - target)));
    const auto after = p.values(key("n"));
    CHECK(std::vector<double>(after.begin(), after.end()) == next_before);
  }
}

TEST_CASE("replay buffer: FIFO eviction") {
  ReplayBuffer b(2);
  b.push(tr(1));
  b.push(tr(2));
  b.push(tr(3));
  REQUIRE(b.size() == 2);
  CHECK(b.at(0) == tr(2));
  CHECK(b.at(1) == tr(3));
  CHECK_THROWS(b.at(2));

  ReplayBuffer big(7);
  for (int i = 0; i < 40; ++i) {
    big.push(tr(i));
    CHECK(big.size() <= 7);
    const int oldest = std::max(0, i - 6);
    for (std::size_t j = 0; j < big.size(); ++j) CHECK(big.at(j) == tr(oldest + static_cast<int>(j)));
  }
  CHECK_THROWS(ReplayBuffer(0));
}

TEST_CASE("replay buffer sampling") {
  Rng rng(5);
  ReplayBuffer b(10);
  for (int i = 0; i < 6; ++i) b.push(tr(i));
  auto idx = b.sample_indices(6, rng);
  std::sort(idx.begin(), idx.end());
  CHECK(idx == std::vector<std::size_t>{0, 1, 2, 3, 4, 5});
  CHECK(b.sample(6, rng).size() == 6);
  CHECK_THROWS(b.sample_indices(7, rng));

  ReplayBuffer hundred(100);
  for (int i = 0; i < 100; ++i) hundred.push(tr(i));
  constexpr int rounds = 10000;
  constexpr std::size_t batch = 32;
  std::vector<int> hits(100, 0);
  for (int r = 0; r < rounds; ++r) {
    const auto s = hundred.sample_indices(batch, rng);
    REQUIRE(std::set<std::size_t>(s.begin(), s.end()).size() == batch);
    for (auto i : s) ++hits[i];
  }
  const double p = batch / 100.0;
  const double sigma = std::sqrt(rounds * p * (1 - p));
  int outside = 0;
  for (int h : hits) outside += std::abs(h - rounds * p) > 3 * sigma;
  // Each entry has a 0.27% chance to sit outside 3 sigma; allow two strays.
  CHECK(outside <= 2);
}

TEST_CASE("softmax") {
  const auto p = softmax(std::vector<double>{1000, 1000, 0});
  CHECK(p[0] == doctest::Approx(0.5));
  CHECK(p[2] < 1e-300);
  const auto q = softmax(std::vector<double>{0.3, -2, 1});
  CHECK(std::abs(q[0] + q[1] + q[2] - 1.0) < 1e-12);
}

TEST_CASE("pg_update examples") {
  SoftmaxPolicy p(3);
  p.mutable_preferences(key("a")) = {0.2, -0.1, 0.4};
  const auto before = p.table();
  const std::vector<TrajectoryStep> zero{{key("a"), 1, 0.0}, {key("b"), 2, 0.0}};
  pg_update(p, zero, 0.9, 0.5);
  for (const auto& [k, v] : p.table()) {
    if (before.contains(k)) CHECK(v == before.at(k));
    else CHECK(v == std::vector<double>(3, 0.0));
  }

  SoftmaxPolicy s(3);
  const double old = s.probabilities(key("a"))[2];
  pg_update(s, std::vector<TrajectoryStep>{{key("a"), 2, 1.0}}, 0.9, 0.1);
  CHECK(s.probabilities(key("a"))[2] > old);

  CHECK_THROWS(pg_update(s, std::vector<TrajectoryStep>{}, 0.9, 0.1));
}

TEST_CASE("discounted returns") {
  const std::vector<TrajectoryStep> t{{key("a"), 0, 1.0}, {key("a"), 0, 0.0}, {key("a"), 0, 2.0}};
  const auto g = discounted_returns(t, 0.5);
  CHECK(g == std::vector<double>{1.5, 1.0, 2.0});
}

TEST_CASE("reinforce gradient matches central finite differences") {
  Rng rng(9);
  std::uniform_real_distribution<double> u(-1, 1);
  const std::vector<std::string> states{"s0", "s1", "s2"};
  for (int trial = 0; trial < 20; ++trial) {
    SoftmaxPolicy p(3);
    for (const auto& s : states) p.mutable_preferences(key(s)) = {u(rng), u(rng), u(rng)};
    std::vector<TrajectoryStep> traj;
    for (int t = 0; t < 8; ++t) {
      traj.push_back({key(states[rng() % 3]), static_cast<std::size_t>(rng() % 3),
                      static_cast<double>(static_cast<int>(rng() % 3) - 1)});
    }
    const auto grad = reinforce_gradient(p, traj, 0.9);
    const double h = 1e-6;
    for (const auto& s : states) {
      for (std::size_t a = 0; a < 3; ++a) {
        auto plus = p, minus = p;
        plus.mutable_preferences(key(s))[a] += h;
        minus.mutable_preferences(key(s))[a] -= h;
        const double numeric =
            (reinforce_objective(plus, traj, 0.9) - reinforce_objective(minus, traj, 0.9)) / (2 * h);
        const double analytic = grad.contains(key(s)) ? grad.at(key(s))[a] : 0.0;
        CHECK(std::abs(analytic - numeric) <= 1e-5 * std::max(1.0, std::abs(numeric)));
      }
    }
    pg_update(p, traj, 0.9, 0.3);
    for (const auto& s : states) {
      const auto probs = p.probabilities(key(s));
      CHECK(std::abs(probs[0] + probs[1] + probs[2] - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("learners and checkpoints") {
  LearnerConfig cfg;
  cfg.batch_size = 2;
  QLearner q(4, cfg, 17);
  q.observe({key("a"), 1, 1.0, key("b"), false});
  CHECK(q.policy().size() == 0);
  q.observe({key("b"), 3, -1.0, key("a"), true});
  CHECK(q.steps() == 2);
  CHECK(q.policy().size() == 2);

  const auto j = q.to_json();
  CHECK(j["format"] == "rfrl-policy");
  CHECK(j["version"] == 1);
  CHECK(j["algorithm"] == "q");
  const auto back = q_policy_from_json(j);
  CHECK(back.table() == q.policy().table());
  CHECK(q_policy_to_json(back).dump() == j.dump());
  CHECK(GreedyPolicy(j).act(key("a")).index() == argmax(q.policy().values(key("a"))));
  CHECK_THROWS(softmax_policy_from_json(j));

  ReinforceLearner r(4, cfg, 17);
  r.observe({key("a"), 2, 1.0, key("b"), false});
  r.end_episode();
  const auto rj = r.to_json();
  CHECK(softmax_policy_from_json(rj).table() == r.policy().table());
  CHECK(GreedyPolicy(rj).act(key("a")).index() == 2);

  auto broken = j;
  broken["version"] = 99;
  CHECK_THROWS(q_policy_from_json(broken));
}
