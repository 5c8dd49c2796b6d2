#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "gridtopo/chronics.hpp"
#include "gridtopo/common.hpp"
#include "gridtopo/grid.hpp"
#include "gridtopo/powerflow.hpp"
#include "gridtopo/topology.hpp"

namespace gridtopo {

struct Action {
  enum class Kind : std::uint8_t { DoNothing = 0, Substation = 1, LineReconnect = 2 };

  Kind kind = Kind::DoNothing;
  SubstationAction substation;  // when kind == Substation
  int line = -1;                // when kind == LineReconnect

  static Action do_nothing() { return {}; }
  static Action reconnect(int line) {
    Action a;
    a.kind = Kind::LineReconnect;
    a.line = line;
    return a;
  }
  static Action set_substation(SubstationAction sub) {
    Action a;
    a.kind = Kind::Substation;
    sub.canonicalize();
    a.substation = std::move(sub);
    return a;
  }

  [[nodiscard]] bool is_do_nothing() const { return kind == Kind::DoNothing; }

  friend bool operator==(const Action&, const Action&) = default;
};

struct Observation {
  int t = 0;
  LoadingVector rho;
  TopologyVector psi;
  std::vector<int> overflow_counters;    // per line, consecutive steps > 100%
  std::vector<int> line_cooldown;        // per line, steps until actionable
  std::vector<int> substation_cooldown;  // per substation
  std::vector<double> gen_mw, load_mw;   // injections and demands at t

  explicit Observation(const Grid& grid) : psi(TopologyVector::base(grid)) {}

  [[nodiscard]] bool line_connected(int line) const { return psi.line_connected(line); }
  [[nodiscard]] double rho_max() const { return rho.rho_max; }
};

enum class Termination : std::uint8_t {
  None = 0,
  Completed,
  Cascade,
  Islanding,
  Divergence,
  IllegalStateDisconnect,
};

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::None: return "none";
    case Termination::Completed: return "completed";
    case Termination::Cascade: return "cascade";
    case Termination::Islanding: return "islanding";
    case Termination::Divergence: return "divergence";
    case Termination::IllegalStateDisconnect: return "illegal_state_disconnect";
  }
  return "?";
}

inline Termination termination_from_string(const std::string& s) {
  for (auto t : {Termination::None, Termination::Completed, Termination::Cascade,
                 Termination::Islanding, Termination::Divergence,
                 Termination::IllegalStateDisconnect})
    if (s == to_string(t)) return t;
  throw SchemaError("unknown termination '" + s + "'");
}

struct StepInfo {
  bool action_illegal = false;       // requested action was downgraded
  bool action_applied = false;       // a non-DoNothing action executed
  int opponent_attack = -1;          // line hit this step, -1 if none
  std::vector<int> overflow_trips;   // lines tripped by the overflow rule
  double loss_proxy = 0.0;           // sum of flow_pu^2 * x over connected lines
};

struct StepResult {
  Observation observation;
  bool done = false;
  Termination termination = Termination::None;
  StepInfo info;
};

struct Forecast {
  LoadingVector loading;
  bool feasible = false;
  double rho_max = std::numeric_limits<double>::infinity();
};

// Read-only one-step lookahead; implemented by Environment, narrow on purpose
// so agents cannot touch episode state.
class Forecaster {
 public:
  virtual ~Forecaster() = default;
  [[nodiscard]] virtual Forecast simulate(const Observation& obs, const Action& action) const = 0;
  [[nodiscard]] virtual Forecast simulate_combined(const Observation& obs,
                                                   const TopologyVector& target) const = 0;
};

struct Rules {
  double rho_overflow = 1.0;       // loading above which the trip counter runs
  int overflow_trip_steps = 3;     // consecutive overloaded steps before a trip
  int cooldown_substation = 3;
  int cooldown_line = 3;
  int cooldown_opponent = 12;
  double p_att = 0.02;             // per-step opponent attack probability
  std::vector<int> attackable_lines;  // empty = every line
  double forecast_noise_sigma = 0.0;  // relative noise on forecast loadings
  double pivot_tolerance = 1e-12;
  bool validate_conservation = false;  // throw if flow conservation breaks
  double conservation_tol_mw = 1e-6;
};

// Legality under Grid2Op-style cooldown rules. A substation action is blocked
// by its substation's cooldown, and by any cooled-down line whose end it
// would move.
inline bool is_action_legal(const Grid& grid, const Observation& obs, const Action& action) {
  switch (action.kind) {
    case Action::Kind::DoNothing:
      return true;
    case Action::Kind::LineReconnect:
      return action.line >= 0 && action.line < grid.n_lines() &&
             !obs.psi.line_connected(action.line) && obs.line_cooldown[action.line] == 0;
    case Action::Kind::Substation: {
      const auto& sub = action.substation;
      if (sub.substation < 0 || sub.substation >= grid.n_substations()) return false;
      if (obs.substation_cooldown[sub.substation] > 0) return false;
      const int begin = grid.elements_begin(sub.substation);
      const int end = grid.elements_end(sub.substation);
      if (static_cast<int>(sub.assignment.size()) != end - begin) return false;
      for (int e = begin; e < end; ++e) {
        if (sub.assignment[e - begin] == obs.psi.bus_of(e)) continue;
        const ElementSlot& slot = grid.elements()[e];
        if (slot.kind == ElementKind::LineEnd && obs.line_cooldown[slot.id] > 0) return false;
      }
      return true;
    }
  }
  return false;
}

namespace detail {

struct EvalOutcome {
  TopologyVector psi;
  LoadingVector rho;
  std::vector<int> counters;
  std::vector<int> trips;
  bool fatal_island = false;
  bool diverged = false;
  bool any_trip = false;
  bool have_rho = false;
  double loss_proxy = 0.0;
};

// Shared physics of one evaluated step: solve, island check, overflow
// counters and the trip cascade. Counters are recomputed from `pre_counters`
// against the latest solution on every cascade iteration, so a line trips
// within the step only if its pre-step history plus the current overload
// reaches the trip threshold. The connected set only ever shrinks.
inline EvalOutcome evaluate_state(const Grid& grid, TopologyVector psi, const Injections& inj,
                                  const std::vector<int>& pre_counters, const Rules& rules) {
  EvalOutcome out{std::move(psi), {}, {}, {}, false, false, false, false, 0.0};
  out.counters.assign(grid.n_lines(), 0);
  for (;;) {
    auto graph = build_effective_graph(grid, out.psi, inj);
    auto islands = detect_islands(graph);
    if (islands.fatal) {
      out.fatal_island = true;
      return out;
    }
    auto sol = solve_dc(graph, rules.pivot_tolerance);
    if (!sol.converged) {
      out.diverged = true;
      return out;
    }
    if (rules.validate_conservation &&
        max_conservation_residual_mw(graph, sol) > rules.conservation_tol_mw)
      throw Error("power balance violated beyond tolerance");

    out.rho = loadings(sol, graph);
    out.have_rho = true;
    out.loss_proxy = 0.0;
    for (int l = 0; l < grid.n_lines(); ++l)
      if (out.psi.line_connected(l)) {
        const double f_pu = sol.flow_mw[l] / grid.base_mva();
        out.loss_proxy += f_pu * f_pu * grid.lines()[l].reactance;
      }

    std::vector<int> tripped_now;
    for (int l = 0; l < grid.n_lines(); ++l) {
      if (!out.psi.line_connected(l)) {
        out.counters[l] = 0;
        continue;
      }
      out.counters[l] = out.rho.rho[l] > rules.rho_overflow ? pre_counters[l] + 1 : 0;
      if (out.counters[l] >= rules.overflow_trip_steps) tripped_now.push_back(l);
    }
    if (tripped_now.empty()) return out;
    for (int l : tripped_now) {
      out.psi.set_line_connected(l, false);
      out.counters[l] = 0;
      out.trips.push_back(l);
    }
    out.any_trip = true;
  }
}

}  // namespace detail

// Episode MDP over (grid, chronic): chronics playback, action legality,
// opponent, overflow/cascade/game-over rules and exact one-step forecasts.
// Single-threaded per instance; simulate/simulate_combined are const and may
// run concurrently against a frozen observation.
class Environment : public Forecaster {
 public:
  Environment(const Grid& grid, const Chronic& chronic, Rules rules, std::uint64_t seed)
      : grid_(&grid), chronic_(&chronic), rules_(std::move(rules)), seed_(seed), obs_(grid) {
    require_compatible(grid, chronic);
    reset();
  }

  // The environment aliases grid and chronic; temporaries would dangle.
  Environment(const Grid&&, const Chronic&, Rules, std::uint64_t) = delete;
  Environment(const Grid&, const Chronic&&, Rules, std::uint64_t) = delete;

  const Observation& reset() {
    t_ = 0;
    done_ = false;
    termination_ = Termination::None;
    rng_ = Rng(splitmix64(seed_) ^ fnv1a64(chronic_->id));
    obs_ = Observation(*grid_);
    obs_.overflow_counters.assign(grid_->n_lines(), 0);
    obs_.line_cooldown.assign(grid_->n_lines(), 0);
    obs_.substation_cooldown.assign(grid_->n_substations(), 0);

    apply_maintenance(0, obs_.psi, obs_.line_cooldown);
    auto outcome = detail::evaluate_state(*grid_, obs_.psi, injections_at(0),
                                          obs_.overflow_counters, rules_);
    obs_.psi = outcome.psi;
    // Counters stay zeroed at reset; the overflow clock starts with step one.
    obs_.overflow_counters.assign(grid_->n_lines(), 0);
    fill_observation(0, outcome);
    if (outcome.fatal_island || outcome.diverged) {
      done_ = true;
      termination_ = outcome.diverged ? Termination::Divergence : Termination::Islanding;
    }
    return obs_;
  }

  StepResult step(const Action& requested) {
    if (done_) throw ContractViolation("step called on a finished episode");
    StepResult result{Observation(*grid_), false, Termination::None, {}};

    // (1) legality: illegal actions are downgraded, never rejected.
    Action action = requested;
    if (!is_action_legal(*grid_, obs_, requested)) {
      action = Action::do_nothing();
      result.info.action_illegal = true;
    }

    std::vector<int> pending_line_cd(grid_->n_lines(), 0);
    std::vector<int> pending_sub_cd(grid_->n_substations(), 0);

    // (2) apply the action.
    TopologyVector psi = obs_.psi;
    if (action.kind == Action::Kind::Substation) {
      psi.apply(action.substation);
      pending_sub_cd[action.substation.substation] = rules_.cooldown_substation;
      result.info.action_applied = true;
    } else if (action.kind == Action::Kind::LineReconnect) {
      psi.set_line_connected(action.line, true);
      pending_line_cd[action.line] = rules_.cooldown_line;
      result.info.action_applied = true;
    }

    // (3) opponent.
    if (rules_.p_att > 0.0 && rng_.uniform() < rules_.p_att) {
      std::vector<int> candidates;
      auto attackable = [&](int l) {
        return rules_.attackable_lines.empty() ||
               std::find(rules_.attackable_lines.begin(), rules_.attackable_lines.end(), l) !=
                   rules_.attackable_lines.end();
      };
      for (int l = 0; l < grid_->n_lines(); ++l)
        if (psi.line_connected(l) && obs_.line_cooldown[l] == 0 && attackable(l))
          candidates.push_back(l);
      if (!candidates.empty()) {
        const int victim = candidates[rng_.uniform_int(candidates.size())];
        psi.set_line_connected(victim, false);
        pending_line_cd[victim] = rules_.cooldown_opponent;
        result.info.opponent_attack = victim;
      }
    }

    // (3b) scheduled maintenance starting at the incoming step.
    const int target = t_ + 1;
    apply_maintenance(target, psi, pending_line_cd);

    // (4)-(6) injections, solve, overflow counters, cascade.
    auto outcome = detail::evaluate_state(*grid_, std::move(psi), injections_at(target),
                                          obs_.overflow_counters, rules_);
    result.info.overflow_trips = outcome.trips;
    result.info.loss_proxy = outcome.loss_proxy;
    for (int l : outcome.trips) pending_line_cd[l] = std::max(pending_line_cd[l], rules_.cooldown_line);

    // (7) termination. A fatality downstream of an overflow trip is the
    // cascading-failure game over; an islanding produced directly by the
    // agent's own switch is reported as an illegal-state disconnect.
    if (outcome.diverged || outcome.fatal_island) {
      done_ = true;
      if (outcome.any_trip)
        termination_ = Termination::Cascade;
      else if (outcome.diverged)
        termination_ = Termination::Divergence;
      else if (result.info.action_applied)
        termination_ = Termination::IllegalStateDisconnect;
      else
        termination_ = Termination::Islanding;
    } else if (target == chronic_->length() - 1) {
      done_ = true;
      termination_ = Termination::Completed;
    }

    // (8) cooldowns: age the table, then overlay this step's events.
    for (auto& cd : obs_.line_cooldown) cd = std::max(0, cd - 1);
    for (auto& cd : obs_.substation_cooldown) cd = std::max(0, cd - 1);
    for (int l = 0; l < grid_->n_lines(); ++l)
      obs_.line_cooldown[l] = std::max(obs_.line_cooldown[l], pending_line_cd[l]);
    for (int s = 0; s < grid_->n_substations(); ++s)
      obs_.substation_cooldown[s] = std::max(obs_.substation_cooldown[s], pending_sub_cd[s]);

    t_ = target;
    obs_.psi = outcome.psi;
    obs_.overflow_counters = outcome.counters;
    fill_observation(target, outcome);
    result.observation = obs_;
    result.done = done_;
    result.termination = termination_;
    return result;
  }

  // Pure forecast of the next step under `action`: true chronic values at
  // t+1, scheduled maintenance included, opponent excluded, legality ignored.
  // Runs the same island/cascade evaluation as a real step.
  [[nodiscard]] Forecast simulate(const Observation& obs, const Action& action) const override {
    TopologyVector psi = obs.psi;
    if (action.kind == Action::Kind::Substation)
      psi.apply(action.substation);
    else if (action.kind == Action::Kind::LineReconnect)
      psi.set_line_connected(action.line, true);
    return forecast_with(obs, std::move(psi), forecast_fingerprint(action));
  }

  // What-if forecast of a whole multi-substation target applied atomically
  // (the action buffer exploits exactly this asymmetry with the step rules).
  [[nodiscard]] Forecast simulate_combined(const Observation& obs,
                                           const TopologyVector& target) const override {
    require_same_structure(obs.psi, target);
    TopologyVector psi = obs.psi;
    psi.set_all_buses(target.buses());
    return forecast_with(obs, std::move(psi), canonical_hash(target));
  }

  [[nodiscard]] const Grid& grid() const { return *grid_; }
  [[nodiscard]] const Chronic& chronic() const { return *chronic_; }
  [[nodiscard]] const Rules& rules() const { return rules_; }
  [[nodiscard]] const Observation& observation() const { return obs_; }
  [[nodiscard]] bool done() const { return done_; }
  [[nodiscard]] Termination termination() const { return termination_; }
  [[nodiscard]] int horizon() const { return chronic_->length(); }

  // Number of chronic rows sustained: T on completion, the failing row index
  // on a fatality, rows evaluated so far while running.
  [[nodiscard]] int steps_survived() const {
    if (done_ && termination_ == Termination::Completed) return horizon();
    if (done_) return t_;
    return t_ + 1;
  }

 private:
  [[nodiscard]] Injections injections_at(int t) const {
    return {chronic_->steps[t].gen_mw, chronic_->steps[t].load_mw};
  }

  void apply_maintenance(int t, TopologyVector& psi, std::vector<int>& line_cd) const {
    for (const auto& ev : chronic_->steps[t].maintenance) {
      psi.set_line_connected(ev.line, false);
      line_cd[ev.line] = std::max(line_cd[ev.line], ev.duration);
    }
  }

  void fill_observation(int t, const detail::EvalOutcome& outcome) {
    obs_.t = t;
    obs_.rho = outcome.have_rho ? outcome.rho
                                : LoadingVector{std::vector<double>(grid_->n_lines(), 0.0), 0.0};
    obs_.gen_mw = chronic_->steps[t].gen_mw;
    obs_.load_mw = chronic_->steps[t].load_mw;
  }

  [[nodiscard]] std::uint64_t forecast_fingerprint(const Action& action) const {
    std::uint64_t h = splitmix64(static_cast<std::uint64_t>(action.kind));
    if (action.kind == Action::Kind::Substation) {
      h = fnv1a64(action.substation.assignment.data(), action.substation.assignment.size(), h);
      h ^= splitmix64(static_cast<std::uint64_t>(action.substation.substation));
    } else if (action.kind == Action::Kind::LineReconnect) {
      h ^= splitmix64(static_cast<std::uint64_t>(action.line) + 0x51ed);
    }
    return h;
  }

  [[nodiscard]] Forecast forecast_with(const Observation& obs, TopologyVector psi,
                                       std::uint64_t fingerprint) const {
    const int target = std::min(obs.t + 1, chronic_->length() - 1);
    std::vector<int> scratch_cd(grid_->n_lines(), 0);
    apply_maintenance(target, psi, scratch_cd);
    auto outcome = detail::evaluate_state(*grid_, std::move(psi), injections_at(target),
                                          obs.overflow_counters, rules_);
    Forecast fc;
    if (outcome.fatal_island || outcome.diverged) {
      fc.loading.rho.assign(grid_->n_lines(), 0.0);
      return fc;  // infeasible: rho_max stays +inf
    }
    fc.loading = outcome.rho;
    fc.feasible = true;
    if (rules_.forecast_noise_sigma > 0.0) {
      // Optional forecast error, deterministic in (seed, t, action).
      Rng noise(splitmix64(seed_) ^ splitmix64(static_cast<std::uint64_t>(obs.t)) ^ fingerprint);
      fc.loading.rho_max = 0.0;
      for (int l = 0; l < grid_->n_lines(); ++l) {
        if (fc.loading.rho[l] == 0.0) continue;
        fc.loading.rho[l] = std::max(0.0, fc.loading.rho[l] *
                                              (1.0 + rules_.forecast_noise_sigma * noise.normal()));
        fc.loading.rho_max = std::max(fc.loading.rho_max, fc.loading.rho[l]);
      }
    }
    fc.rho_max = fc.loading.rho_max;
    return fc;
  }

  const Grid* grid_;
  const Chronic* chronic_;
  Rules rules_;
  std::uint64_t seed_;
  Rng rng_{0};
  Observation obs_;
  int t_ = 0;
  bool done_ = false;
  Termination termination_ = Termination::None;
};

}  // namespace gridtopo
