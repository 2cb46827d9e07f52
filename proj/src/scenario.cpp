#include "rfrl/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include "json.hpp"

namespace rfrl {

using nlohmann::json;

std::string_view to_string(EntityBehavior b) {
  return b == EntityBehavior::Constant ? "constant" : "hop";
}

std::string_view to_string(ObservationMode m) {
  return m == ObservationMode::Detect ? "detect" : "classify";
}

std::string_view to_string(RewardMode m) {
  return m == RewardMode::Dsa ? "dsa" : "jam";
}

ScenarioError::ScenarioError(std::string path, const std::string& message)
    : std::runtime_error(path.empty() ? message : path + ": " + message),
      path_(std::move(path)) {}

std::optional<std::size_t> ScenarioSpec::entity_index(std::string_view id) const {
  for (std::size_t i = 0; i < entities.size(); ++i) {
    if (entities[i].id == id) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> ScenarioSpec::agent_index(std::string_view id) const {
  for (std::size_t i = 0; i < agents.size(); ++i) {
    if (agents[i].id == id) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> ScenarioSpec::target_index(std::size_t agent) const {
  const auto& target = agents.at(agent).target_entity;
  if (!target) return std::nullopt;
  return entity_index(*target);
}

std::size_t ScenarioSpec::group_of(std::size_t agent) const {
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (std::find(groups[g].begin(), groups[g].end(), agent) != groups[g].end()) return g;
  }
  throw std::out_of_range("agent " + std::to_string(agent) + " belongs to no group");
}

std::vector<AgentGroupSpec> singleton_groups(std::size_t num_agents) {
  std::vector<AgentGroupSpec> groups;
  groups.reserve(num_agents);
  for (std::size_t i = 0; i < num_agents; ++i) groups.push_back({i});
  return groups;
}

namespace {

std::string index_path(const std::string& base, std::size_t i) {
  return base + "[" + std::to_string(i) + "]";
}

std::string key_path(const std::string& base, std::string_view key) {
  return base.empty() ? std::string(key) : base + "." + std::string(key);
}

void reject_unknown_keys(const json& obj, const std::string& path,
                         std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ScenarioError(key_path(path, key), "unknown key '" + key + "'");
    }
  }
}

const json& require(const json& obj, std::string_view key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw ScenarioError(key_path(path, key), "missing required field");
  }
  return *it;
}

const json& expect_object(const json& v, const std::string& path) {
  if (!v.is_object()) throw ScenarioError(path, "expected an object");
  return v;
}

const json& expect_array(const json& v, const std::string& path) {
  if (!v.is_array()) throw ScenarioError(path, "expected an array");
  return v;
}

std::string expect_string(const json& v, const std::string& path) {
  if (!v.is_string()) throw ScenarioError(path, "expected a string");
  return v.get<std::string>();
}

std::int64_t expect_integer(const json& v, const std::string& path) {
  if (!v.is_number_integer()) throw ScenarioError(path, "expected an integer");
  if (v.is_number_unsigned()) {
    auto u = v.get<std::uint64_t>();
    if (u > static_cast<std::uint64_t>(INT64_MAX)) throw ScenarioError(path, "integer out of range");
    return static_cast<std::int64_t>(u);
  }
  return v.get<std::int64_t>();
}

std::size_t expect_count(const json& v, const std::string& path, std::int64_t minimum) {
  auto n = expect_integer(v, path);
  if (n < minimum) {
    throw ScenarioError(path, "must be >= " + std::to_string(minimum) + ", got " + std::to_string(n));
  }
  return static_cast<std::size_t>(n);
}

EntitySpec parse_entity(const json& v, const std::string& path) {
  expect_object(v, path);
  reject_unknown_keys(v, path, {"id", "behavior", "start_channel", "stride", "duty"});
  EntitySpec e;
  e.id = expect_string(require(v, "id", path), key_path(path, "id"));
  auto behavior = expect_string(require(v, "behavior", path), key_path(path, "behavior"));
  if (behavior == "constant") {
    e.behavior = EntityBehavior::Constant;
  } else if (behavior == "hop") {
    e.behavior = EntityBehavior::Hop;
  } else {
    throw ScenarioError(key_path(path, "behavior"), "unknown behavior '" + behavior + "'");
  }
  e.start_channel = expect_count(require(v, "start_channel", path), key_path(path, "start_channel"), 0);
  if (auto it = v.find("stride"); it != v.end()) {
    if (e.behavior != EntityBehavior::Hop) {
      throw ScenarioError(key_path(path, "stride"), "stride is only valid for hop entities");
    }
    e.stride = expect_integer(*it, key_path(path, "stride"));
  }
  if (auto it = v.find("duty"); it != v.end()) {
    if (!it->is_boolean()) throw ScenarioError(key_path(path, "duty"), "expected a boolean");
    e.duty = it->get<bool>();
  }
  return e;
}

AgentSpec parse_agent(const json& v, const std::string& path) {
  expect_object(v, path);
  reject_unknown_keys(v, path, {"id", "observation_mode", "reward_mode", "target_entity", "history_length"});
  AgentSpec a;
  a.id = expect_string(require(v, "id", path), key_path(path, "id"));
  auto mode = expect_string(require(v, "observation_mode", path), key_path(path, "observation_mode"));
  if (mode == "detect") {
    a.observation_mode = ObservationMode::Detect;
  } else if (mode == "classify") {
    a.observation_mode = ObservationMode::Classify;
  } else {
    throw ScenarioError(key_path(path, "observation_mode"), "unknown observation mode '" + mode + "'");
  }
  auto reward = expect_string(require(v, "reward_mode", path), key_path(path, "reward_mode"));
  if (reward == "dsa") {
    a.reward_mode = RewardMode::Dsa;
  } else if (reward == "jam") {
    a.reward_mode = RewardMode::Jam;
  } else {
    throw ScenarioError(key_path(path, "reward_mode"), "unknown reward mode '" + reward + "'");
  }
  if (auto it = v.find("target_entity"); it != v.end()) {
    a.target_entity = expect_string(*it, key_path(path, "target_entity"));
  }
  if (auto it = v.find("history_length"); it != v.end()) {
    a.history_length = expect_count(*it, key_path(path, "history_length"), 1);
  }
  return a;
}

}  // namespace

void validate_scenario(const ScenarioSpec& spec) {
  if (spec.num_channels < 1) throw ScenarioError("environment.num_channels", "must be >= 1");
  if (spec.episode_length < 1) throw ScenarioError("environment.episode_length", "must be >= 1");
  if (spec.agents.empty()) throw ScenarioError("agents", "at least one agent is required");

  std::set<std::string> ids;
  for (std::size_t i = 0; i < spec.entities.size(); ++i) {
    const auto& e = spec.entities[i];
    const auto path = index_path("entities", i);
    if (e.id.empty()) throw ScenarioError(key_path(path, "id"), "identifier must be nonempty");
    if (!ids.insert(e.id).second) throw ScenarioError(key_path(path, "id"), "duplicate identifier '" + e.id + "'");
    if (e.start_channel >= spec.num_channels) {
      throw ScenarioError(key_path(path, "start_channel"),
                          "channel " + std::to_string(e.start_channel) + " outside [0, " +
                              std::to_string(spec.num_channels) + ")");
    }
    if (e.behavior == EntityBehavior::Hop && e.stride == 0) {
      throw ScenarioError(key_path(path, "stride"), "hop stride must be nonzero");
    }
  }
  for (std::size_t i = 0; i < spec.agents.size(); ++i) {
    const auto& a = spec.agents[i];
    const auto path = index_path("agents", i);
    if (a.id.empty()) throw ScenarioError(key_path(path, "id"), "identifier must be nonempty");
    if (!ids.insert(a.id).second) throw ScenarioError(key_path(path, "id"), "duplicate identifier '" + a.id + "'");
    if (a.history_length < 1) throw ScenarioError(key_path(path, "history_length"), "must be >= 1");
    if (a.reward_mode == RewardMode::Jam) {
      if (!a.target_entity) throw ScenarioError(key_path(path, "target_entity"), "jam agents require a target entity");
      if (!spec.entity_index(*a.target_entity)) {
        throw ScenarioError(key_path(path, "target_entity"), "unknown entity '" + *a.target_entity + "'");
      }
    } else if (a.target_entity) {
      throw ScenarioError(key_path(path, "target_entity"), "dsa agents must not name a target entity");
    }
  }
  if (auto violations = validate_groups(spec); !violations.empty()) {
    throw ScenarioError("groups", violations.front());
  }
}

std::vector<std::string> validate_groups(const ScenarioSpec& spec) {
  std::vector<std::string> violations;
  std::vector<std::size_t> membership(spec.agents.size(), 0);
  auto name = [&](std::size_t agent) {
    return agent < spec.agents.size() ? "'" + spec.agents[agent].id + "'" : "#" + std::to_string(agent);
  };
  for (std::size_t g = 0; g < spec.groups.size(); ++g) {
    if (spec.groups[g].empty()) violations.push_back(index_path("groups", g) + ": group is empty");
    for (std::size_t agent : spec.groups[g]) {
      if (agent >= spec.agents.size()) {
        violations.push_back(index_path("groups", g) + ": unknown agent " + name(agent));
        continue;
      }
      if (++membership[agent] == 2) {
        violations.push_back("agent " + name(agent) + " appears in more than one group");
      }
    }
  }
  for (std::size_t i = 0; i < membership.size(); ++i) {
    if (membership[i] == 0) violations.push_back("agent " + name(i) + " is in no group");
  }
  return violations;
}

ScenarioSpec parse_scenario(std::string_view document) {
  json root;
  try {
    root = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ScenarioError("", std::string("malformed JSON: ") + e.what());
  }
  expect_object(root, "<root>");
  reject_unknown_keys(root, "", {"comments", "environment", "entities", "agents", "groups"});

  ScenarioSpec spec;
  if (auto it = root.find("comments"); it != root.end()) spec.comments = expect_string(*it, "comments");

  const auto& env = expect_object(require(root, "environment", ""), "environment");
  reject_unknown_keys(env, "environment", {"num_channels", "episode_length"});
  spec.num_channels = expect_count(require(env, "num_channels", "environment"), "environment.num_channels", 1);
  spec.episode_length = expect_count(require(env, "episode_length", "environment"), "environment.episode_length", 1);

  if (auto it = root.find("entities"); it != root.end()) {
    const auto& arr = expect_array(*it, "entities");
    for (std::size_t i = 0; i < arr.size(); ++i) spec.entities.push_back(parse_entity(arr[i], index_path("entities", i)));
  }

  const auto& agents = expect_array(require(root, "agents", ""), "agents");
  for (std::size_t i = 0; i < agents.size(); ++i) spec.agents.push_back(parse_agent(agents[i], index_path("agents", i)));

  if (auto it = root.find("groups"); it != root.end()) {
    const auto& arr = expect_array(*it, "groups");
    for (std::size_t g = 0; g < arr.size(); ++g) {
      const auto gpath = index_path("groups", g);
      const auto& members = expect_array(arr[g], gpath);
      AgentGroupSpec group;
      for (std::size_t m = 0; m < members.size(); ++m) {
        const auto mpath = index_path(gpath, m);
        auto id = expect_string(members[m], mpath);
        auto idx = spec.agent_index(id);
        if (!idx) throw ScenarioError(mpath, "unknown agent '" + id + "'");
        group.push_back(*idx);
      }
      spec.groups.push_back(std::move(group));
    }
  } else {
    spec.groups = singleton_groups(spec.agents.size());
  }

  validate_scenario(spec);
  return spec;
}

ScenarioSpec load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError("", "cannot open scenario file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::string serialize_scenario(const ScenarioSpec& spec) {
  json root = json::object();
  root["comments"] = spec.comments;
  root["environment"] = {{"num_channels", spec.num_channels}, {"episode_length", spec.episode_length}};
  json entities = json::array();
  for (const auto& e : spec.entities) {
    json j = {{"id", e.id}, {"behavior", to_string(e.behavior)}, {"start_channel", e.start_channel}};
    if (e.behavior == EntityBehavior::Hop) j["stride"] = e.stride;
    if (!e.duty) j["duty"] = false;
    entities.push_back(std::move(j));
  }
  root["entities"] = std::move(entities);
  json agents = json::array();
  for (const auto& a : spec.agents) {
    json j = {{"id", a.id},
              {"observation_mode", to_string(a.observation_mode)},
              {"reward_mode", to_string(a.reward_mode)},
              {"history_length", a.history_length}};
    if (a.target_entity) j["target_entity"] = *a.target_entity;
    agents.push_back(std::move(j));
  }
  root["agents"] = std::move(agents);
  json groups = json::array();
  for (const auto& g : spec.groups) {
    json members = json::array();
    for (auto idx : g) members.push_back(spec.agents.at(idx).id);
    groups.push_back(std::move(members));
  }
  root["groups"] = std::move(groups);
  return root.dump(2) + "\n";
}

}  // namespace rfrl
