#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "gridtopo/grid.hpp"
#include "gridtopo/topology.hpp"

namespace gridtopo {

// Per-element MW injections: generation positive, demand positive in its own
// array (sign is applied when the bus graph is assembled).
struct Injections {
  std::vector<double> gen_mw;
  std::vector<double> load_mw;
};

// Bus-level view of (grid, psi): one effective bus per (substation, busbar)
// pair hosting at least one generator, load, or connected line end.
// Disconnected line ends anchor nothing; a busbar holding only those simply
// vanishes from the graph. Injections are balanced to zero per connected
// component before solving, with the imbalance absorbed by that component's
// generators in proportion to p_max.
struct EffectiveBusGraph {
  const Grid* grid = nullptr;
  int n_buses = 0;
  std::vector<int> bus_substation;              // per bus
  std::vector<std::uint8_t> bus_busbar;         // per bus, 1 or 2
  std::vector<int> line_from_bus, line_to_bus;  // per line, -1 if disconnected
  std::vector<double> injection_mw;             // per bus, balanced
  std::vector<int> gen_bus, load_bus;           // per element, -1 if unanchored
  std::vector<int> component;                   // per bus
  int n_components = 0;
};

inline EffectiveBusGraph build_effective_graph(const Grid& grid, const TopologyVector& psi,
                                               const Injections& inj) {
  if (static_cast<int>(inj.gen_mw.size()) != grid.n_generators() ||
      static_cast<int>(inj.load_mw.size()) != grid.n_loads())
    throw StructuralMismatchError("injections do not match grid element counts");

  EffectiveBusGraph g;
  g.grid = &grid;

  // Anchor buses in canonical order: (substation asc, busbar 1 then 2).
  std::vector<int> bus_index(2 * grid.n_substations(), -1);
  auto slot = [&](int substation, std::uint8_t busbar) { return 2 * substation + (busbar - 1); };
  auto anchor = [&](int substation, std::uint8_t busbar) {
    bus_index[slot(substation, busbar)] = -2;  // mark, number later
  };
  for (int l = 0; l < grid.n_lines(); ++l) {
    if (!psi.line_connected(l)) continue;
    anchor(grid.lines()[l].from, psi.bus_of(grid.line_end_element(l, 0)));
    anchor(grid.lines()[l].to, psi.bus_of(grid.line_end_element(l, 1)));
  }
  for (int i = 0; i < grid.n_generators(); ++i)
    anchor(grid.generators()[i].substation, psi.bus_of(grid.generator_element(i)));
  for (int i = 0; i < grid.n_loads(); ++i)
    anchor(grid.loads()[i].substation, psi.bus_of(grid.load_element(i)));

  for (int s = 0; s < grid.n_substations(); ++s)
    for (std::uint8_t b = 1; b <= 2; ++b)
      if (bus_index[slot(s, b)] == -2) {
        bus_index[slot(s, b)] = g.n_buses++;
        g.bus_substation.push_back(s);
        g.bus_busbar.push_back(b);
      }

  g.line_from_bus.assign(grid.n_lines(), -1);
  g.line_to_bus.assign(grid.n_lines(), -1);
  for (int l = 0; l < grid.n_lines(); ++l) {
    if (!psi.line_connected(l)) continue;
    g.line_from_bus[l] = bus_index[slot(grid.lines()[l].from, psi.bus_of(grid.line_end_element(l, 0)))];
    g.line_to_bus[l] = bus_index[slot(grid.lines()[l].to, psi.bus_of(grid.line_end_element(l, 1)))];
  }

  g.gen_bus.assign(grid.n_generators(), -1);
  g.load_bus.assign(grid.n_loads(), -1);
  for (int i = 0; i < grid.n_generators(); ++i)
    g.gen_bus[i] = bus_index[slot(grid.generators()[i].substation, psi.bus_of(grid.generator_element(i)))];
  for (int i = 0; i < grid.n_loads(); ++i)
    g.load_bus[i] = bus_index[slot(grid.loads()[i].substation, psi.bus_of(grid.load_element(i)))];

  // Connected components over line edges.
  g.component.assign(g.n_buses, -1);
  std::vector<std::vector<int>> adj(g.n_buses);
  for (int l = 0; l < grid.n_lines(); ++l)
    if (g.line_from_bus[l] >= 0) {
      adj[g.line_from_bus[l]].push_back(g.line_to_bus[l]);
      adj[g.line_to_bus[l]].push_back(g.line_from_bus[l]);
    }
  std::vector<int> stack;
  for (int b = 0; b < g.n_buses; ++b) {
    if (g.component[b] >= 0) continue;
    const int c = g.n_components++;
    stack.push_back(b);
    g.component[b] = c;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int v : adj[u])
        if (g.component[v] < 0) {
          g.component[v] = c;
          stack.push_back(v);
        }
    }
  }

  // Raw injections, then per-component balancing over generators.
  g.injection_mw.assign(g.n_buses, 0.0);
  std::vector<double> gen_adj(inj.gen_mw);
  std::vector<double> comp_imbalance(g.n_components, 0.0);
  std::vector<double> comp_pmax(g.n_components, 0.0);
  for (int i = 0; i < grid.n_generators(); ++i) {
    comp_imbalance[g.component[g.gen_bus[i]]] += inj.gen_mw[i];
    comp_pmax[g.component[g.gen_bus[i]]] += grid.generators()[i].p_max;
  }
  for (int i = 0; i < grid.n_loads(); ++i)
    comp_imbalance[g.component[g.load_bus[i]]] -= inj.load_mw[i];
  std::vector<int> comp_ngens(g.n_components, 0);
  for (int i = 0; i < grid.n_generators(); ++i) ++comp_ngens[g.component[g.gen_bus[i]]];
  for (int i = 0; i < grid.n_generators(); ++i) {
    const int c = g.component[g.gen_bus[i]];
    if (comp_ngens[c] == 0) continue;
    const double w = comp_pmax[c] > 0.0 ? grid.generators()[i].p_max / comp_pmax[c]
                                        : 1.0 / comp_ngens[c];
    gen_adj[i] -= comp_imbalance[c] * w;
  }
  for (int i = 0; i < grid.n_generators(); ++i) g.injection_mw[g.gen_bus[i]] += gen_adj[i];
  for (int i = 0; i < grid.n_loads(); ++i) g.injection_mw[g.load_bus[i]] -= inj.load_mw[i];

  return g;
}

struct FlowSolution {
  std::vector<double> flow_mw;  // per line, signed from->to, 0 if disconnected
  std::vector<double> theta;    // per effective bus, radians
  bool converged = false;
};

// DC power flow: per component, solve the reduced susceptance system
// B theta = P (p.u.) with the lowest-indexed bus of the component as slack.
// Dense Gaussian elimination with partial pivoting; a pivot below pivot_tol
// declares the system singular and the solution non-converged.
inline FlowSolution solve_dc(const EffectiveBusGraph& g, double pivot_tol = 1e-12) {
  const Grid& grid = *g.grid;
  FlowSolution sol;
  sol.theta.assign(g.n_buses, 0.0);
  sol.flow_mw.assign(grid.n_lines(), 0.0);
  sol.converged = true;

  for (int c = 0; c < g.n_components; ++c) {
    std::vector<int> buses;
    for (int b = 0; b < g.n_buses; ++b)
      if (g.component[b] == c) buses.push_back(b);
    const int n = static_cast<int>(buses.size());
    if (n <= 1) continue;  // single bus: theta = 0, nothing to solve

    std::vector<int> local(g.n_buses, -1);
    for (int i = 0; i < n; ++i) local[buses[i]] = i;

    // Susceptance Laplacian, slack = local index 0 (lowest bus index).
    const int m = n - 1;
    std::vector<double> a(static_cast<std::size_t>(m) * m, 0.0);
    std::vector<double> rhs(m, 0.0);
    auto at = [&](int r, int col) -> double& { return a[static_cast<std::size_t>(r) * m + col]; };
    for (int l = 0; l < grid.n_lines(); ++l) {
      if (g.line_from_bus[l] < 0 || g.component[g.line_from_bus[l]] != c) continue;
      const double y = 1.0 / grid.lines()[l].reactance;
      const int u = local[g.line_from_bus[l]] - 1;
      const int v = local[g.line_to_bus[l]] - 1;
      if (u >= 0) at(u, u) += y;
      if (v >= 0) at(v, v) += y;
      if (u >= 0 && v >= 0) {
        at(u, v) -= y;
        at(v, u) -= y;
      }
    }
    for (int i = 1; i < n; ++i) rhs[i - 1] = g.injection_mw[buses[i]] / grid.base_mva();

    // LU with partial pivoting, in place.
    std::vector<int> perm(m);
    for (int i = 0; i < m; ++i) perm[i] = i;
    bool singular = false;
    for (int k = 0; k < m && !singular; ++k) {
      int p = k;
      for (int r = k + 1; r < m; ++r)
        if (std::fabs(at(r, k)) > std::fabs(at(p, k))) p = r;
      if (std::fabs(at(p, k)) < pivot_tol) {
        singular = true;
        break;
      }
      if (p != k) {
        for (int col = 0; col < m; ++col) std::swap(at(p, col), at(k, col));
        std::swap(rhs[p], rhs[k]);
      }
      for (int r = k + 1; r < m; ++r) {
        const double f = at(r, k) / at(k, k);
        if (f == 0.0) continue;
        for (int col = k; col < m; ++col) at(r, col) -= f * at(k, col);
        rhs[r] -= f * rhs[k];
      }
    }
    if (singular) {
      sol.converged = false;
      continue;
    }
    for (int r = m - 1; r >= 0; --r) {
      double v = rhs[r];
      for (int col = r + 1; col < m; ++col) v -= at(r, col) * rhs[col];
      rhs[r] = v / at(r, r);
    }
    for (int i = 1; i < n; ++i) sol.theta[buses[i]] = rhs[i - 1];
  }

  if (sol.converged)
    for (int l = 0; l < grid.n_lines(); ++l)
      if (g.line_from_bus[l] >= 0)
        sol.flow_mw[l] = (sol.theta[g.line_from_bus[l]] - sol.theta[g.line_to_bus[l]]) /
                         grid.lines()[l].reactance * grid.base_mva();
  return sol;
}

// Per-line loading rho = |flow| / thermal limit; disconnected lines read 0,
// rho_max ranges over connected lines only.
struct LoadingVector {
  std::vector<double> rho;
  double rho_max = 0.0;
};

inline LoadingVector loadings(const FlowSolution& sol, const EffectiveBusGraph& g) {
  if (!sol.converged) throw ContractViolation("loadings: flow solution did not converge");
  const Grid& grid = *g.grid;
  LoadingVector lv;
  lv.rho.assign(grid.n_lines(), 0.0);
  for (int l = 0; l < grid.n_lines(); ++l) {
    if (g.line_from_bus[l] < 0) continue;
    lv.rho[l] = std::fabs(sol.flow_mw[l]) / grid.lines()[l].thermal_limit;
    lv.rho_max = std::max(lv.rho_max, lv.rho[l]);
  }
  return lv;
}

struct IslandReport {
  std::vector<int> component;  // per effective bus
  int n_components = 0;
  bool fatal = false;
};

// A grid state is fatal when it has split at all (every effective bus is
// anchored by some element, so a second component always strands something)
// or when the surviving component lacks generation or demand.
inline IslandReport detect_islands(const EffectiveBusGraph& g) {
  IslandReport report;
  report.component = g.component;
  report.n_components = g.n_components;
  if (g.n_components > 1) {
    report.fatal = true;
    return report;
  }
  bool has_gen = false, has_load = false;
  for (int b : g.gen_bus) has_gen |= (b >= 0);
  for (int b : g.load_bus) has_load |= (b >= 0);
  report.fatal = !(has_gen && has_load);
  return report;
}

// Residual |net injection - sum of incident flows| per bus; the slack rows
// are exact by construction, every other bus must close to solver tolerance.
inline double max_conservation_residual_mw(const EffectiveBusGraph& g, const FlowSolution& sol) {
  std::vector<double> residual(g.injection_mw);
  for (int l = 0; l < g.grid->n_lines(); ++l) {
    if (g.line_from_bus[l] < 0) continue;
    residual[g.line_from_bus[l]] -= sol.flow_mw[l];
    residual[g.line_to_bus[l]] += sol.flow_mw[l];
  }
  // Skip each component's slack (lowest bus index in component).
  std::vector<int> slack(g.n_components, -1);
  for (int b = 0; b < g.n_buses; ++b)
    if (slack[g.component[b]] < 0) slack[g.component[b]] = b;
  double worst = 0.0;
  for (int b = 0; b < g.n_buses; ++b)
    if (slack[g.component[b]] != b) worst = std::max(worst, std::fabs(residual[b]));
  return worst;
}

}  // namespace gridtopo
