#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <memory>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "gridtopo/agents.hpp"
#include "gridtopo/chronics.hpp"
#include "gridtopo/environment.hpp"
#include "gridtopo/stats.hpp"
#include "gridtopo/toposearch.hpp"

namespace gridtopo {

struct EpisodeRecord {
  std::string agent;
  std::string chronic_id;
  std::uint64_t seed = 0;
  int steps_survived = 0;
  Termination termination = Termination::None;
  double operation_cost = 0.0;     // loss proxy + per-switch cost, summed
  double total_act_seconds = 0.0;  // wall time inside agent.act
  long act_calls = 0;
  double score = 0.0;
  std::string note;  // non-empty when the episode crashed

  [[nodiscard]] double mean_act_seconds() const {
    return act_calls > 0 ? total_act_seconds / static_cast<double>(act_calls) : 0.0;
  }
};

// Simplified episode score in [-100, 100], anchored like the challenge
// metric: 0 at Do-Nothing parity, -100 floor, 80 at completion, up to 100
// when the operating cost beats the Do-Nothing proxy. The cost proxy is the
// reference record's per-step cost extrapolated to the full horizon.
// Degenerate baselines that complete the chronic collapse the positive ramp:
// completion scores 80, anything less scores 0.
inline double episode_score(const EpisodeRecord& rec, const EpisodeRecord& dn_baseline,
                            const EpisodeRecord& cost_ref, int horizon) {
  if (rec.chronic_id != dn_baseline.chronic_id || rec.seed != dn_baseline.seed)
    throw ContractViolation("episode_score: record and baseline are not paired");
  const double s = rec.steps_survived;
  const double s_dn = dn_baseline.steps_survived;
  const double T = horizon;
  if (s_dn >= T) return s >= T ? 80.0 : 0.0;
  if (s < s_dn) return s_dn > 0.0 ? -100.0 * (s_dn - s) / s_dn : 0.0;
  if (s < T) return 80.0 * (s - s_dn) / (T - s_dn);
  const double ref_steps = std::max(1.0, static_cast<double>(cost_ref.steps_survived));
  const double proxy = cost_ref.operation_cost * T / ref_steps;
  double bonus = 0.0;
  if (proxy > 0.0) bonus = 20.0 * std::max(0.0, 1.0 - rec.operation_cost / proxy);
  else if (rec.operation_cost <= 0.0) bonus = 20.0;
  return std::min(100.0, 80.0 + bonus);
}

struct SurvivalMetrics {
  double mst = 0.0;    // median over every (chronic, seed) episode
  double mstcm = 0.0;  // median over chronics of per-chronic seed medians
};

inline SurvivalMetrics survival_metrics(const std::vector<EpisodeRecord>& records) {
  if (records.empty()) throw ContractViolation("survival_metrics: no records");
  std::vector<double> all;
  std::vector<std::pair<std::string, std::vector<double>>> by_chronic;
  for (const auto& r : records) {
    all.push_back(r.steps_survived);
    auto it = std::find_if(by_chronic.begin(), by_chronic.end(),
                           [&](const auto& kv) { return kv.first == r.chronic_id; });
    if (it == by_chronic.end()) {
      by_chronic.push_back({r.chronic_id, {}});
      it = std::prev(by_chronic.end());
    }
    it->second.push_back(r.steps_survived);
  }
  std::vector<double> chronic_medians;
  for (auto& [id, xs] : by_chronic) chronic_medians.push_back(stats::median(std::move(xs)));
  return {stats::median(std::move(all)), stats::median(std::move(chronic_medians))};
}

// ---------------------------------------------------------------------------
// Episode driver shared by the benchmark, the search CLI and replay.

struct StepTraceRow {
  int t = 0;
  Action action;
  bool action_illegal = false;
  int opponent_attack = -1;
  double rho_max = 0.0;
  Termination termination = Termination::None;
};

struct EpisodeRun {
  EpisodeRecord record;
  TopologyRegistry rest_counts;  // resting-step counters, as in the search
};

inline EpisodeRun run_episode(const Grid& grid, const Chronic& chronic, const Rules& rules,
                              Agent& agent, std::uint64_t seed, double switch_cost,
                              std::vector<StepTraceRow>* trace = nullptr) {
  EpisodeRun run{EpisodeRecord{}, TopologyRegistry(grid)};
  EpisodeRecord& rec = run.record;
  rec.agent = agent.name();
  rec.chronic_id = chronic.id;
  rec.seed = seed;
  try {
    Environment env(grid, chronic, rules, seed);
    agent.begin_episode();
    while (!env.done()) {
      const Observation& obs = env.observation();
      const auto t0 = std::chrono::steady_clock::now();
      Action a = agent.act(env, obs);
      rec.total_act_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      ++rec.act_calls;
      if (a.is_do_nothing()) run.rest_counts.count_visit(obs.psi);
      StepResult res = env.step(a);
      rec.operation_cost += res.info.loss_proxy;
      if (res.info.action_applied) rec.operation_cost += switch_cost;
      if (trace)
        trace->push_back({res.observation.t, a, res.info.action_illegal,
                          res.info.opponent_attack, res.observation.rho.rho_max,
                          res.termination});
    }
    rec.steps_survived = env.steps_survived();
    rec.termination = env.termination();
  } catch (const std::exception& e) {
    rec.note = e.what();
  }
  return run;
}

// ---------------------------------------------------------------------------
// Multi-seed benchmark.

struct AgentFactory {
  std::string name;
  bool is_baseline = false;  // exactly one roster entry anchors the score
  std::function<std::unique_ptr<Agent>()> make;
};

struct BenchmarkConfig {
  int workers = 0;  // 0 = hardware concurrency
  double switch_cost = 1.0;
  std::string reference_agent;  // Welch reference; empty = last roster entry
};

struct ScoreTable {
  struct PerSeed {
    std::string agent;
    std::uint64_t seed = 0;
    double mean_score = 0.0;
  };
  struct Aggregate {
    std::string agent;
    double mean = 0.0, sd = 0.0, median = 0.0, q25 = 0.0, q75 = 0.0;
  };
  std::vector<PerSeed> per_seed;
  std::vector<Aggregate> aggregates;
};

struct BenchmarkResult {
  std::vector<EpisodeRecord> records;
  ScoreTable scores;
  struct SurvivalRow {
    std::string agent;
    double mst = 0.0, mstcm = 0.0;
    int completed = 0, episodes = 0;
  };
  std::vector<SurvivalRow> survival;
  struct TTestRow {
    std::string reference, other;
    double t = 0.0, dof = 0.0, p = 1.0;
  };
  std::vector<TTestRow> ttests;
  struct TimingRow {
    std::string agent;
    double mean_s = 0.0, median_s = 0.0, p90_s = 0.0, max_s = 0.0, total_s = 0.0;
    long calls = 0;
  };
  std::vector<TimingRow> timing;
  std::vector<std::pair<std::string, std::vector<FrequencyRow>>> topofreq;
};

// Runs every (agent, chronic, seed) episode, scores against the baseline
// agent's records and aggregates the report tables. Episodes execute
// concurrently; every table is a deterministic post-pass over the task
// vector, so the worker count never changes output values (wall-clock timing
// aside).
inline BenchmarkResult run_benchmark(const Grid& grid, const std::vector<Chronic>& chronics,
                                     const std::vector<AgentFactory>& roster,
                                     const std::vector<std::uint64_t>& seeds, const Rules& rules,
                                     const BenchmarkConfig& cfg,
                                     const TargetTopologySet* tts = nullptr) {
  if (chronics.empty() || seeds.empty() || roster.empty())
    throw ContractViolation("run_benchmark: empty chronics, seeds or roster");
  int baselines = 0;
  for (const auto& f : roster) baselines += f.is_baseline ? 1 : 0;
  if (baselines != 1)
    throw ContractViolation("run_benchmark: exactly one baseline agent required for scoring");

  struct Task {
    int agent = 0, chronic = 0, seed = 0;
  };
  std::vector<Task> tasks;
  for (int a = 0; a < static_cast<int>(roster.size()); ++a)
    for (int c = 0; c < static_cast<int>(chronics.size()); ++c)
      for (int s = 0; s < static_cast<int>(seeds.size()); ++s) tasks.push_back({a, c, s});

  std::vector<EpisodeRun> runs;
  runs.reserve(tasks.size());
  for (std::size_t i = 0; i < tasks.size(); ++i)
    runs.push_back({EpisodeRecord{}, TopologyRegistry(grid)});

  int workers = cfg.workers > 0 ? cfg.workers
                                : static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;
  workers = std::min<int>(workers, static_cast<int>(tasks.size()));

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      const Task& t = tasks[i];
      auto agent = roster[t.agent].make();
      runs[i] = run_episode(grid, chronics[t.chronic], rules, *agent, seeds[t.seed],
                            cfg.switch_cost);
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();

  BenchmarkResult result;

  // Scores: the baseline anchors 0 by construction, everyone else is scored
  // against the baseline record of the same (chronic, seed).
  int baseline_idx = 0;
  for (int a = 0; a < static_cast<int>(roster.size()); ++a)
    if (roster[a].is_baseline) baseline_idx = a;
  auto task_index = [&](int a, int c, int s) {
    return (static_cast<std::size_t>(a) * chronics.size() + c) * seeds.size() + s;
  };
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const Task& t = tasks[i];
    EpisodeRecord& rec = runs[i].record;
    if (t.agent == baseline_idx) {
      rec.score = 0.0;
    } else {
      const EpisodeRecord& dn = runs[task_index(baseline_idx, t.chronic, t.seed)].record;
      rec.score = episode_score(rec, dn, dn, chronics[t.chronic].length());
    }
  }

  for (const auto& run : runs) result.records.push_back(run.record);

  // Score table: per-seed means over chronics, aggregates across seeds.
  for (int a = 0; a < static_cast<int>(roster.size()); ++a) {
    std::vector<double> seed_means;
    for (int s = 0; s < static_cast<int>(seeds.size()); ++s) {
      std::vector<double> scores;
      for (int c = 0; c < static_cast<int>(chronics.size()); ++c)
        scores.push_back(runs[task_index(a, c, s)].record.score);
      const double m = stats::mean(scores);
      result.scores.per_seed.push_back({roster[a].name, seeds[s], m});
      seed_means.push_back(m);
    }
    ScoreTable::Aggregate agg;
    agg.agent = roster[a].name;
    agg.mean = stats::mean(seed_means);
    agg.sd = seed_means.size() > 1 ? stats::stddev(seed_means) : 0.0;
    agg.median = stats::median(seed_means);
    agg.q25 = stats::quantile(seed_means, 0.25);
    agg.q75 = stats::quantile(seed_means, 0.75);
    result.scores.aggregates.push_back(agg);
  }

  // Survival and timing per agent.
  for (int a = 0; a < static_cast<int>(roster.size()); ++a) {
    std::vector<EpisodeRecord> agent_records;
    for (int c = 0; c < static_cast<int>(chronics.size()); ++c)
      for (int s = 0; s < static_cast<int>(seeds.size()); ++s)
        agent_records.push_back(runs[task_index(a, c, s)].record);
    auto sm = survival_metrics(agent_records);
    BenchmarkResult::SurvivalRow row{roster[a].name, sm.mst, sm.mstcm, 0,
                                     static_cast<int>(agent_records.size())};
    for (const auto& r : agent_records)
      if (r.termination == Termination::Completed) ++row.completed;
    result.survival.push_back(row);

    BenchmarkResult::TimingRow trow;
    trow.agent = roster[a].name;
    std::vector<double> per_episode_mean;
    for (const auto& r : agent_records) {
      trow.total_s += r.total_act_seconds;
      trow.calls += r.act_calls;
      per_episode_mean.push_back(r.mean_act_seconds());
      trow.max_s = std::max(trow.max_s, r.mean_act_seconds());
    }
    trow.mean_s = trow.calls > 0 ? trow.total_s / static_cast<double>(trow.calls) : 0.0;
    trow.median_s = stats::median(per_episode_mean);
    trow.p90_s = stats::quantile(per_episode_mean, 0.9);
    result.timing.push_back(trow);
  }

  // Welch tests: reference agent's per-seed means against every other agent.
  std::string reference = cfg.reference_agent.empty() ? roster.back().name : cfg.reference_agent;
  std::vector<double> ref_means;
  for (const auto& ps : result.scores.per_seed)
    if (ps.agent == reference) ref_means.push_back(ps.mean_score);
  if (ref_means.empty()) throw ContractViolation("run_benchmark: unknown reference agent '" + reference + "'");
  for (const auto& f : roster) {
    if (f.name == reference) continue;
    std::vector<double> other;
    for (const auto& ps : result.scores.per_seed)
      if (ps.agent == f.name) other.push_back(ps.mean_score);
    BenchmarkResult::TTestRow row{reference, f.name, 0.0, 0.0, 1.0};
    try {
      auto w = stats::welch_t_test(ref_means, other);
      row.t = w.t;
      row.dof = w.dof;
      row.p = w.p;
    } catch (const ContractViolation&) {
      row.p = 1.0;  // degenerate samples (e.g. two all-zero score columns)
    }
    result.ttests.push_back(row);
  }

  // Topology frequency report per agent (merge in task order).
  TargetTopologySet empty_tts;
  for (int a = 0; a < static_cast<int>(roster.size()); ++a) {
    TopologyRegistry merged(grid);
    for (int c = 0; c < static_cast<int>(chronics.size()); ++c)
      for (int s = 0; s < static_cast<int>(seeds.size()); ++s)
        merged.merge(runs[task_index(a, c, s)].rest_counts);
    result.topofreq.push_back(
        {roster[a].name, frequency_report(merged, tts ? *tts : empty_tts)});
  }

  return result;
}

// ---------------------------------------------------------------------------
// CSV emission. Numbers are printed with %.10g so identical runs produce
// identical bytes; wall-clock measurements live only in timing.csv, which is
// the one inherently non-reproducible report.

namespace detail {

inline std::string csv_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace detail

inline void write_records_csv(const std::vector<EpisodeRecord>& records, std::ostream& out) {
  out << "agent,chronic,seed,steps_survived,termination,operation_cost,score,note\n";
  for (const auto& r : records)
    out << r.agent << ',' << r.chronic_id << ',' << r.seed << ',' << r.steps_survived << ','
        << to_string(r.termination) << ',' << detail::csv_num(r.operation_cost) << ','
        << detail::csv_num(r.score) << ',' << r.note << '\n';
}

inline void write_scores_csv(const ScoreTable& table, std::ostream& out) {
  out << "agent,seed,mean_score,sd,median,q25,q75\n";
  for (const auto& ps : table.per_seed)
    out << ps.agent << ',' << ps.seed << ',' << detail::csv_num(ps.mean_score) << ",,,,\n";
  for (const auto& agg : table.aggregates)
    out << agg.agent << ",aggregate," << detail::csv_num(agg.mean) << ','
        << detail::csv_num(agg.sd) << ',' << detail::csv_num(agg.median) << ','
        << detail::csv_num(agg.q25) << ',' << detail::csv_num(agg.q75) << '\n';
}

inline void write_survival_csv(const std::vector<BenchmarkResult::SurvivalRow>& rows,
                               std::ostream& out) {
  out << "agent,mst,mstcm,completed,episodes\n";
  for (const auto& r : rows)
    out << r.agent << ',' << detail::csv_num(r.mst) << ',' << detail::csv_num(r.mstcm) << ','
        << r.completed << ',' << r.episodes << '\n';
}

inline void write_ttests_csv(const std::vector<BenchmarkResult::TTestRow>& rows,
                             std::ostream& out) {
  out << "reference,other,t,dof,p,reject_at_0.05\n";
  for (const auto& r : rows)
    out << r.reference << ',' << r.other << ',' << detail::csv_num(r.t) << ','
        << detail::csv_num(r.dof) << ',' << detail::csv_num(r.p) << ','
        << (r.p < 0.05 ? 1 : 0) << '\n';
}

inline void write_timing_csv(const std::vector<BenchmarkResult::TimingRow>& rows,
                             std::ostream& out) {
  out << "agent,mean_act_s,median_act_s,p90_act_s,max_act_s,total_act_s,act_calls\n";
  for (const auto& r : rows)
    out << r.agent << ',' << detail::csv_num(r.mean_s) << ',' << detail::csv_num(r.median_s)
        << ',' << detail::csv_num(r.p90_s) << ',' << detail::csv_num(r.max_s) << ','
        << detail::csv_num(r.total_s) << ',' << r.calls << '\n';
}

inline void write_topofreq_csv(
    const std::vector<std::pair<std::string, std::vector<FrequencyRow>>>& per_agent,
    std::ostream& out) {
  out << "agent,rank,counter,is_target,distance,changed_substations\n";
  for (const auto& [agent, rows] : per_agent)
    for (const auto& r : rows) {
      out << agent << ',' << r.rank << ',' << r.counter << ',' << (r.is_target ? 1 : 0) << ','
          << r.distance << ',';
      for (std::size_t i = 0; i < r.changed.size(); ++i) {
        if (i) out << ';';
        out << r.changed[i];
      }
      out << '\n';
    }
}

}  // namespace gridtopo
