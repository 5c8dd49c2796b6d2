#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridtopo/agents.hpp"
#include "gridtopo/environment.hpp"
#include "gridtopo/serialize.hpp"
#include "gridtopo/topology.hpp"

namespace gridtopo {

// Visit-counted store of canonical topologies. Ids are issued in first-seen
// order; counters measure time steps an agent spent resting in a topology.
class TopologyRegistry {
 public:
  struct Entry {
    TopologyVector psi;
    long counter = 0;
  };

  explicit TopologyRegistry(const Grid& grid) : grid_(&grid) {}

  TopologyId set_id(const TopologyVector& psi) {
    const std::uint64_t h = canonical_hash(psi);
    auto [it, inserted] = index_.try_emplace(h);
    if (!inserted)
      for (TopologyId id : it->second)
        if (entries_[id].psi == psi) return id;
    const TopologyId id = static_cast<TopologyId>(entries_.size());
    entries_.push_back({psi, 0});
    it->second.push_back(id);
    return id;
  }

  TopologyId count_visit(const TopologyVector& psi, long increment = 1) {
    const TopologyId id = set_id(psi);
    entries_[id].counter += increment;
    return id;
  }

  [[nodiscard]] std::optional<TopologyId> find(const TopologyVector& psi) const {
    const auto it = index_.find(canonical_hash(psi));
    if (it == index_.end()) return std::nullopt;
    for (TopologyId id : it->second)
      if (entries_[id].psi == psi) return id;
    return std::nullopt;
  }

  [[nodiscard]] const std::vector<Entry>& entries() const { return entries_; }
  [[nodiscard]] const Entry& entry(TopologyId id) const { return entries_.at(id); }
  [[nodiscard]] int size() const { return static_cast<int>(entries_.size()); }
  [[nodiscard]] const Grid& grid() const { return *grid_; }

  // Counter-additive merge; new topologies get fresh ids in the other
  // registry's insertion order, so merging per-sweep registries in a fixed
  // order is deterministic.
  void merge(const TopologyRegistry& other) {
    for (const auto& e : other.entries_) count_visit(e.psi, e.counter);
  }

 private:
  const Grid* grid_;
  std::vector<Entry> entries_;
  std::unordered_map<std::uint64_t, std::vector<TopologyId>> index_;
};

// One record per burst of consecutive non-DoNothing actions: the observation
// that triggered the burst, the actions taken, and the topology finally
// reached. Kept for future imitation-learning work.
struct ExperienceRecord {
  Observation first_obs;
  std::vector<Action> actions;
  TopologyId end_id = kNoTopologyId;
  std::string chronic_id;
  std::uint64_t seed = 0;
};

using ExperienceList = std::vector<ExperienceRecord>;

struct EpisodeLog {
  std::string chronic_id;
  std::uint64_t seed = 0;
  int steps_survived = 0;
  Termination termination = Termination::None;
  std::string error;  // non-empty if the episode was skipped
};

struct SearchResult {
  TopologyRegistry registry;
  ExperienceList experience;
  std::vector<EpisodeLog> episodes;
  long do_nothing_steps = 0;  // equals the sum of all counters by design
};

// The target-topology search: run the agent over every (chronic, seed) pair,
// count the steps it rests in each topology (DoNothing decisions), and record
// action bursts. Episode failures are logged and skipped.
inline SearchResult search_target_topologies(const Grid& grid,
                                             const std::vector<Chronic>& chronics,
                                             const Rules& rules, Agent& agent,
                                             const std::vector<std::uint64_t>& seeds) {
  SearchResult result{TopologyRegistry(grid), {}, {}, 0};
  for (const Chronic& chronic : chronics) {
    for (std::uint64_t seed : seeds) {
      EpisodeLog log{chronic.id, seed, 0, Termination::None, ""};
      try {
        Environment env(grid, chronic, rules, seed);
        agent.begin_episode();
        std::optional<ExperienceRecord> burst;
        while (!env.done()) {
          const Observation& obs = env.observation();
          Action a = agent.act(env, obs);
          if (a.is_do_nothing()) {
            const TopologyId id = result.registry.count_visit(obs.psi);
            ++result.do_nothing_steps;
            if (burst) {
              burst->end_id = id;
              result.experience.push_back(std::move(*burst));
              burst.reset();
            }
          } else {
            if (!burst) burst = ExperienceRecord{obs, {}, kNoTopologyId, chronic.id, seed};
            burst->actions.push_back(a);
          }
          env.step(a);
        }
        if (burst) {
          burst->end_id = result.registry.set_id(env.observation().psi);
          result.experience.push_back(std::move(*burst));
        }
        log.steps_survived = env.steps_survived();
        log.termination = env.termination();
      } catch (const std::exception& e) {
        log.error = e.what();
      }
      result.episodes.push_back(std::move(log));
    }
  }
  return result;
}

// Ranked target-topology set (rank m = 1..M, counters non-increasing).
struct TargetTopologySet {
  struct Item {
    int rank = 0;
    TopologyId id = kNoTopologyId;
    TopologyVector psi;
    long counter = 0;
  };
  std::vector<Item> items;
};

namespace detail {

inline std::vector<TopologyId> ranked_ids(const TopologyRegistry& registry, bool exclude_base) {
  const TopologyVector base = TopologyVector::base(registry.grid());
  std::vector<TopologyId> ids;
  for (TopologyId id = 0; id < registry.size(); ++id) {
    const auto& e = registry.entry(id);
    if (e.counter <= 0) continue;  // ids issued but never rested in
    if (exclude_base && e.psi == base) continue;
    ids.push_back(id);
  }
  // Counter descending; first-seen (lower id) wins ties.
  std::stable_sort(ids.begin(), ids.end(), [&](TopologyId a, TopologyId b) {
    return registry.entry(a).counter > registry.entry(b).counter;
  });
  return ids;
}

}  // namespace detail

// Most-rested M topologies. Returns all of them (with a warning flag) when
// fewer than M distinct topologies exist.
inline TargetTopologySet select_top_m(const TopologyRegistry& registry, int M,
                                      bool exclude_base = true,
                                      bool* fewer_than_requested = nullptr) {
  if (M < 0) throw ContractViolation("select_top_m: M must be >= 0");
  auto ids = detail::ranked_ids(registry, exclude_base);
  if (fewer_than_requested) *fewer_than_requested = static_cast<int>(ids.size()) < M;
  if (static_cast<int>(ids.size()) > M) ids.resize(M);
  TargetTopologySet tts;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& e = registry.entry(ids[i]);
    tts.items.push_back({static_cast<int>(i) + 1, ids[i], e.psi, e.counter});
  }
  return tts;
}

// The data behind the frequency and distance plots: every rested topology
// with its counter, target-set membership and changed substations.
struct FrequencyRow {
  int rank = 0;
  TopologyId id = kNoTopologyId;
  long counter = 0;
  bool is_target = false;
  int distance = 0;
  std::vector<int> changed;
};

inline std::vector<FrequencyRow> frequency_report(const TopologyRegistry& registry,
                                                  const TargetTopologySet& tts,
                                                  bool exclude_base = true) {
  std::vector<FrequencyRow> rows;
  auto ids = detail::ranked_ids(registry, exclude_base);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& e = registry.entry(ids[i]);
    FrequencyRow row;
    row.rank = static_cast<int>(i) + 1;
    row.id = ids[i];
    row.counter = e.counter;
    for (const auto& item : tts.items)
      if (item.psi == e.psi) {
        row.is_target = true;
        break;
      }
    row.distance = distance_from_base(e.psi);
    row.changed = changed_substations(e.psi);
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Persistence.

inline nlohmann::json registry_to_json(const TopologyRegistry& registry) {
  nlohmann::json entries = nlohmann::json::array();
  for (TopologyId id = 0; id < registry.size(); ++id) {
    const auto& e = registry.entry(id);
    if (e.counter <= 0) continue;  // only rested topologies are part of Psi
    nlohmann::json row = topology_to_json(e.psi);
    row["id"] = id;
    row["counter"] = e.counter;
    entries.push_back(std::move(row));
  }
  return {{"format", "gridtopo-registry"},
          {"version", 1},
          {"grid", registry.grid().name()},
          {"entries", std::move(entries)}};
}

inline TopologyRegistry registry_from_json(const nlohmann::json& j, const Grid& grid) {
  if (j.value("format", "") != "gridtopo-registry")
    throw SchemaError("registry: unexpected file format");
  TopologyRegistry registry(grid);
  for (const auto& row : j.at("entries"))
    registry.count_visit(topology_from_json(row, grid), row.at("counter").get<long>());
  return registry;
}

inline nlohmann::json tts_to_json(const TargetTopologySet& tts, const Grid& grid) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& item : tts.items) {
    nlohmann::json row = topology_to_json(item.psi);
    row["rank"] = item.rank;
    row["id"] = item.id;
    row["counter"] = item.counter;
    items.push_back(std::move(row));
  }
  return {{"format", "gridtopo-tts"},
          {"version", 1},
          {"grid", grid.name()},
          {"topologies", std::move(items)}};
}

inline TargetTopologySet tts_from_json(const nlohmann::json& j, const Grid& grid) {
  if (j.value("format", "") != "gridtopo-tts") throw SchemaError("tts: unexpected file format");
  TargetTopologySet tts;
  for (const auto& row : j.at("topologies"))
    tts.items.push_back({row.at("rank").get<int>(), row.at("id").get<TopologyId>(),
                         topology_from_json(row, grid), row.at("counter").get<long>()});
  return tts;
}

inline TargetTopologySet load_tts_file(const std::string& path, const Grid& grid) {
  std::ifstream in(path);
  if (!in) throw SchemaError("tts: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("tts: " + path + ": " + e.what());
  }
  return tts_from_json(j, grid);
}

// The experience log is line-oriented (versioned header, one record per
// line) so future consumers can stream it.
inline void write_experience_log(std::ostream& out, const ExperienceList& experience,
                                 const Grid& grid) {
  nlohmann::json header{{"format", "gridtopo-theta"}, {"version", 1}, {"grid", grid.name()}};
  out << header.dump() << '\n';
  for (const auto& rec : experience) {
    nlohmann::json actions = nlohmann::json::array();
    for (const auto& a : rec.actions) actions.push_back(action_to_json(a));
    nlohmann::json row{{"chronic", rec.chronic_id},
                       {"seed", rec.seed},
                       {"first_obs", observation_to_json(rec.first_obs)},
                       {"actions", std::move(actions)},
                       {"end_id", rec.end_id}};
    out << row.dump() << '\n';
  }
}

inline ExperienceList read_experience_log(std::istream& in, const Grid& grid) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("theta log: empty file");
  const nlohmann::json header = nlohmann::json::parse(line);
  if (header.value("format", "") != "gridtopo-theta")
    throw SchemaError("theta log: unexpected file format");
  ExperienceList list;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const nlohmann::json row = nlohmann::json::parse(line);
    ExperienceRecord rec{observation_from_json(row.at("first_obs"), grid),
                         {},
                         row.at("end_id").get<TopologyId>(),
                         row.at("chronic").get<std::string>(),
                         row.at("seed").get<std::uint64_t>()};
    for (const auto& a : row.at("actions")) rec.actions.push_back(action_from_json(a));
    list.push_back(std::move(rec));
  }
  return list;
}

}  // namespace gridtopo
