#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridtopo/environment.hpp"
#include "gridtopo/topology.hpp"

namespace gridtopo {

struct AgentConfig {
  double rho_tutor = 0.9;    // greedy activation threshold
  double rho_senior = 0.95;  // ranked-search activation threshold
  double rho_topo = 0.85;    // target-topology activation threshold
  double rho_revert = 0.8;   // reversion threshold
  std::vector<SubstationAction> action_set;
  std::vector<std::pair<TopologyId, TopologyVector>> target_topologies;  // ranked, m = 1..M

  void validate() const {
    if (!(0.0 < rho_revert && rho_revert <= rho_topo && rho_topo <= rho_senior &&
          rho_senior <= 1.5))
      throw SchemaError("agent config: need 0 < rho_revert <= rho_topo <= rho_senior <= 1.5");
  }
};

// Ordered queue of per-substation actions realizing one target topology,
// drained one action per environment step.
struct ActionBuffer {
  std::vector<Action> queue;
  TopologyId origin = kNoTopologyId;  // target being pursued, if any

  [[nodiscard]] bool empty() const { return queue.empty(); }
  void clear() {
    queue.clear();
    origin = kNoTopologyId;
  }
};

// Stand-in for the trained policy network: anything that can order the
// action set by priority. Higher score ranks first.
class RankingPolicy {
 public:
  virtual ~RankingPolicy() = default;
  [[nodiscard]] virtual std::vector<double> scores(
      const Forecaster& fc, const Observation& obs,
      const std::vector<SubstationAction>& action_set) const = 0;
};

// Default policy: rank by forecast loading, best first. Infeasible forecasts
// sink to the bottom.
class SimulationGreedyPolicy : public RankingPolicy {
 public:
  [[nodiscard]] std::vector<double> scores(
      const Forecaster& fc, const Observation& obs,
      const std::vector<SubstationAction>& action_set) const override {
    std::vector<double> out;
    out.reserve(action_set.size());
    for (const auto& a : action_set) {
      Forecast f = fc.simulate(obs, Action::set_substation(a));
      out.push_back(f.feasible ? -f.rho_max : -std::numeric_limits<double>::infinity());
    }
    return out;
  }
};

// Externally supplied per-action priors (e.g. exported from a trained
// policy), aligned with the action set by index.
class FilePriorsPolicy : public RankingPolicy {
 public:
  explicit FilePriorsPolicy(std::vector<double> priors) : priors_(std::move(priors)) {}

  [[nodiscard]] std::vector<double> scores(
      const Forecaster&, const Observation&,
      const std::vector<SubstationAction>& action_set) const override {
    if (priors_.size() != action_set.size())
      throw StructuralMismatchError("policy priors do not match the action set size");
    return priors_;
  }

 private:
  std::vector<double> priors_;
};

// ---------------------------------------------------------------------------
// Shared heuristics.

inline Action do_nothing_act(const Observation&) { return Action::do_nothing(); }

// Reconnection has top priority in every agent: bring back any cooled-down
// line whose return does not worsen the forecast loading. Deterministic pick:
// lowest forecast rho, then lowest line id.
inline std::optional<Action> reconnection_check(const Forecaster& fc, const Grid& grid,
                                                const Observation& obs) {
  const double baseline = fc.simulate(obs, Action::do_nothing()).rho_max;
  std::optional<Action> best;
  double best_rho = std::numeric_limits<double>::infinity();
  for (int l = 0; l < grid.n_lines(); ++l) {
    if (obs.psi.line_connected(l) || obs.line_cooldown[l] > 0) continue;
    Action a = Action::reconnect(l);
    Forecast f = fc.simulate(obs, a);
    if (!f.feasible || f.rho_max > baseline + 1e-12) continue;
    if (f.rho_max < best_rho) {
      best_rho = f.rho_max;
      best = a;
    }
  }
  return best;
}

// When the grid is calm, try to fold one modified substation back to the
// base assignment. Only reverts that keep the forecast below rho_revert
// qualify; one substation per call.
inline std::optional<Action> reversion_check(const Forecaster& fc, const Grid& grid,
                                             const Observation& obs, const AgentConfig& cfg) {
  std::optional<Action> best;
  double best_rho = std::numeric_limits<double>::infinity();
  for (int s = 0; s < grid.n_substations(); ++s) {
    if (!obs.psi.substation_modified(s)) continue;
    Action revert = Action::set_substation(
        {s, std::vector<std::uint8_t>(static_cast<std::size_t>(grid.n_elements_at(s)), 1)});
    if (!is_action_legal(grid, obs, revert)) continue;
    Forecast f = fc.simulate(obs, revert);
    if (!f.feasible || f.rho_max >= cfg.rho_revert) continue;
    if (f.rho_max < best_rho) {
      best_rho = f.rho_max;
      best = revert;
    }
  }
  return best;
}

// Greedy one-step policy: above rho_tutor simulate every legal action and
// take the best improvement over doing nothing; below rho_revert consider a
// reversion; otherwise rest. Ties break on the lower action index.
inline Action tutor_act(const Forecaster& fc, const Grid& grid, const Observation& obs,
                        const AgentConfig& cfg) {
  if (auto reconnect = reconnection_check(fc, grid, obs)) return *reconnect;

  if (obs.rho_max() > cfg.rho_tutor) {
    const double baseline = fc.simulate(obs, Action::do_nothing()).rho_max;
    int best_index = -1;
    double best_rho = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cfg.action_set.size(); ++i) {
      Action a = Action::set_substation(cfg.action_set[i]);
      if (!is_action_legal(grid, obs, a)) continue;
      Forecast f = fc.simulate(obs, a);
      if (!f.feasible) continue;
      if (f.rho_max < best_rho) {
        best_rho = f.rho_max;
        best_index = static_cast<int>(i);
      }
    }
    if (best_index >= 0 && best_rho < baseline)
      return Action::set_substation(cfg.action_set[best_index]);
    return Action::do_nothing();
  }

  if (obs.rho_max() < cfg.rho_revert) {
    if (auto revert = reversion_check(fc, grid, obs, cfg)) return *revert;
  }
  return Action::do_nothing();
}

// Ranked search: walk the action set in descending policy score and return
// the first legal action forecast below rho_senior; fall back to the legal
// minimum otherwise. sim_calls counts forecast evaluations of the walk
// itself (not the policy's own).
inline Action senior_act(const Forecaster& fc, const Grid& grid, const Observation& obs,
                         const AgentConfig& cfg, const RankingPolicy& policy,
                         int* sim_calls = nullptr) {
  if (cfg.action_set.empty()) return Action::do_nothing();
  const std::vector<double> score = policy.scores(fc, obs, cfg.action_set);
  if (score.size() != cfg.action_set.size())
    throw StructuralMismatchError("policy returned wrong score count");

  std::vector<int> order(cfg.action_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return score[a] > score[b]; });

  int best_index = -1;
  double best_rho = std::numeric_limits<double>::infinity();
  for (int i : order) {
    Action a = Action::set_substation(cfg.action_set[i]);
    if (!is_action_legal(grid, obs, a)) continue;
    Forecast f = fc.simulate(obs, a);
    if (sim_calls) ++*sim_calls;
    if (!f.feasible) continue;
    if (f.rho_max < cfg.rho_senior) return a;
    if (f.rho_max < best_rho) {
      best_rho = f.rho_max;
      best_index = i;
    }
  }
  if (best_index >= 0) return Action::set_substation(cfg.action_set[best_index]);
  return Action::do_nothing();
}

// The threshold state machine of the topology agent's act method. Exactly one
// branch fires per observation.
enum class Alg2Branch : std::uint8_t { Senior, TargetTopology, Nothing, Reversion };

inline Alg2Branch classify_branch(double rho_max, const AgentConfig& cfg) {
  if (rho_max > cfg.rho_senior) return Alg2Branch::Senior;
  if (rho_max > cfg.rho_topo) return Alg2Branch::TargetTopology;
  if (rho_max < cfg.rho_revert) return Alg2Branch::Reversion;
  return Alg2Branch::Nothing;
}

// Fill the action buffer for one decision point: reconnection first, then the
// threshold branches - senior search in emergencies, the greedy walk over the
// ranked target topologies in the warning band, reversion when calm. The
// selected target's decomposed substation actions are buffered together.
inline ActionBuffer topology_agent_act(const Forecaster& fc, const Grid& grid,
                                       const Observation& obs, const AgentConfig& cfg,
                                       const RankingPolicy& policy) {
  ActionBuffer buffer;
  if (auto reconnect = reconnection_check(fc, grid, obs)) {
    buffer.queue.push_back(*reconnect);
    return buffer;
  }

  switch (classify_branch(obs.rho_max(), cfg)) {
    case Alg2Branch::Senior:
      buffer.queue.push_back(senior_act(fc, grid, obs, cfg, policy));
      return buffer;

    case Alg2Branch::TargetTopology: {
      int best_m = -1;
      double best_rho = std::numeric_limits<double>::infinity();
      for (std::size_t m = 0; m < cfg.target_topologies.size(); ++m) {
        Forecast f = fc.simulate_combined(obs, cfg.target_topologies[m].second);
        if (!f.feasible || f.rho_max >= cfg.rho_topo) continue;
        if (f.rho_max < best_rho) {
          best_rho = f.rho_max;
          best_m = static_cast<int>(m);
        }
      }
      if (best_m >= 0) {
        const auto& [id, target] = cfg.target_topologies[best_m];
        for (auto& sub : topology_diff(target, obs.psi))
          buffer.queue.push_back(Action::set_substation(std::move(sub)));
        buffer.origin = id;
      }
      if (buffer.queue.empty()) buffer.queue.push_back(Action::do_nothing());
      return buffer;
    }

    case Alg2Branch::Reversion:
      if (auto revert = reversion_check(fc, grid, obs, cfg))
        buffer.queue.push_back(*revert);
      else
        buffer.queue.push_back(Action::do_nothing());
      return buffer;

    case Alg2Branch::Nothing:
      buffer.queue.push_back(Action::do_nothing());
      return buffer;
  }
  return buffer;
}

// Emit the buffered action with the best forecast against the current
// observation and pop it. If every remaining entry is illegal or forecasts an
// infeasible state the buffer is invalidated: cleared, DoNothing emitted.
inline Action buffer_drain(const Forecaster& fc, const Grid& grid, const Observation& obs,
                           ActionBuffer& buffer) {
  if (buffer.empty()) throw ContractViolation("buffer_drain on an empty buffer");
  int best = -1;
  double best_rho = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < buffer.queue.size(); ++i) {
    const Action& a = buffer.queue[i];
    if (!is_action_legal(grid, obs, a)) continue;
    Forecast f = fc.simulate(obs, a);
    if (!f.feasible) continue;
    if (f.rho_max < best_rho) {
      best_rho = f.rho_max;
      best = static_cast<int>(i);
    }
  }
  if (best < 0) {
    buffer.clear();
    return Action::do_nothing();
  }
  Action chosen = buffer.queue[best];
  buffer.queue.erase(buffer.queue.begin() + best);
  if (buffer.queue.empty()) buffer.origin = kNoTopologyId;
  return chosen;
}

// ---------------------------------------------------------------------------
// Stateful agent wrappers used by the episode drivers.

class Agent {
 public:
  explicit Agent(std::string name) : name_(std::move(name)) {}
  virtual ~Agent() = default;

  [[nodiscard]] const std::string& name() const { return name_; }
  virtual void begin_episode() {}
  virtual Action act(const Forecaster& fc, const Observation& obs) = 0;

 private:
  std::string name_;
};

class DoNothingAgent final : public Agent {
 public:
  explicit DoNothingAgent(std::string name = "do_nothing") : Agent(std::move(name)) {}
  Action act(const Forecaster&, const Observation& obs) override { return do_nothing_act(obs); }
};

class TutorAgent final : public Agent {
 public:
  TutorAgent(std::string name, AgentConfig cfg) : Agent(std::move(name)), cfg_(std::move(cfg)) {
    cfg_.validate();
    if (cfg_.action_set.empty()) throw SchemaError("tutor: empty action set");
  }
  Action act(const Forecaster& fc, const Observation& obs) override {
    return tutor_act(fc, obs.psi.grid(), obs, cfg_);
  }

 private:
  AgentConfig cfg_;
};

class SeniorLikeAgent final : public Agent {
 public:
  SeniorLikeAgent(std::string name, AgentConfig cfg, std::shared_ptr<const RankingPolicy> policy)
      : Agent(std::move(name)), cfg_(std::move(cfg)), policy_(std::move(policy)) {
    cfg_.validate();
    if (cfg_.action_set.empty()) throw SchemaError("senior: empty action set");
  }
  Action act(const Forecaster& fc, const Observation& obs) override {
    const Grid& grid = obs.psi.grid();
    if (auto reconnect = reconnection_check(fc, grid, obs)) return *reconnect;
    if (obs.rho_max() > cfg_.rho_senior) return senior_act(fc, grid, obs, cfg_, *policy_);
    if (obs.rho_max() < cfg_.rho_revert)
      if (auto revert = reversion_check(fc, grid, obs, cfg_)) return *revert;
    return Action::do_nothing();
  }

 private:
  AgentConfig cfg_;
  std::shared_ptr<const RankingPolicy> policy_;
};

class TopologyAgent final : public Agent {
 public:
  TopologyAgent(std::string name, AgentConfig cfg, std::shared_ptr<const RankingPolicy> policy)
      : Agent(std::move(name)), cfg_(std::move(cfg)), policy_(std::move(policy)) {
    cfg_.validate();
    if (cfg_.action_set.empty()) throw SchemaError("topology agent: empty action set");
  }
  void begin_episode() override { buffer_.clear(); }
  Action act(const Forecaster& fc, const Observation& obs) override {
    const Grid& grid = obs.psi.grid();
    if (buffer_.empty()) buffer_ = topology_agent_act(fc, grid, obs, cfg_, *policy_);
    return buffer_drain(fc, grid, obs, buffer_);
  }
  [[nodiscard]] const ActionBuffer& buffer() const { return buffer_; }

 private:
  AgentConfig cfg_;
  std::shared_ptr<const RankingPolicy> policy_;
  ActionBuffer buffer_;
};

// ---------------------------------------------------------------------------
// Action-set file: the artifact's analog of the curated substation action
// list. JSON with per-action substation id and busbar assignment in canonical
// element order.
inline std::vector<SubstationAction> load_action_set(const nlohmann::json& j, const Grid& grid) {
  std::vector<SubstationAction> actions;
  try {
    for (const auto& a : j.at("actions")) {
      SubstationAction sub;
      sub.substation = a.at("substation").get<int>();
      for (const auto& b : a.at("assignment")) sub.assignment.push_back(b.get<std::uint8_t>());
      if (sub.substation < 0 || sub.substation >= grid.n_substations())
        throw SchemaError("action set: unknown substation " + std::to_string(sub.substation));
      if (static_cast<int>(sub.assignment.size()) != grid.n_elements_at(sub.substation))
        throw SchemaError("action set: assignment length mismatch at substation " +
                          std::to_string(sub.substation));
      for (auto b : sub.assignment)
        if (b != 1 && b != 2) throw SchemaError("action set: busbar ids must be 1 or 2");
      sub.canonicalize();
      actions.push_back(std::move(sub));
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("action set: malformed file: ") + e.what());
  }
  return actions;
}

inline std::vector<SubstationAction> load_action_set_file(const std::string& path,
                                                          const Grid& grid) {
  std::ifstream in(path);
  if (!in) throw SchemaError("action set: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("action set: " + path + ": " + e.what());
  }
  return load_action_set(j, grid);
}

inline nlohmann::json action_set_to_json(const std::vector<SubstationAction>& actions,
                                         const Grid& grid) {
  nlohmann::json j;
  j["format"] = "gridtopo-actions";
  j["version"] = 1;
  j["grid"] = grid.name();
  j["actions"] = nlohmann::json::array();
  for (const auto& a : actions)
    j["actions"].push_back({{"substation", a.substation}, {"assignment", a.assignment}});
  return j;
}

// Per-action priors for FilePriorsPolicy: {"priors": [ ... ]}.
inline std::vector<double> load_policy_priors_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("policy priors: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
    return j.at("priors").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("policy priors: " + path + ": " + e.what());
  }
}

}  // namespace gridtopo
