#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gridtopo/common.hpp"
#include "gridtopo/grid.hpp"
#include "gridtopo/powerflow.hpp"
#include "gridtopo/topology.hpp"

namespace gridtopo {

struct MaintenanceEvent {
  int line = -1;
  int start = 0;     // step index at which the outage begins
  int duration = 0;  // steps the line stays down and locked
};

struct ChronicStep {
  std::vector<double> gen_mw;
  std::vector<double> load_mw;
  std::vector<MaintenanceEvent> maintenance;  // events starting at this step
};

// One episode's driving series: injections, demands and scheduled outages,
// per five-minute step.
struct Chronic {
  std::string id;
  int step_minutes = 5;
  std::vector<ChronicStep> steps;

  [[nodiscard]] int length() const { return static_cast<int>(steps.size()); }
};

inline void require_compatible(const Grid& grid, const Chronic& chronic) {
  if (chronic.steps.size() < 2)
    throw SchemaError("chronic " + chronic.id + ": needs at least two steps");
  for (const auto& s : chronic.steps) {
    if (static_cast<int>(s.gen_mw.size()) != grid.n_generators() ||
        static_cast<int>(s.load_mw.size()) != grid.n_loads())
      throw SchemaError("chronic " + chronic.id + ": column count does not match grid");
    for (double d : s.load_mw)
      if (d < 0.0) throw SchemaError("chronic " + chronic.id + ": negative demand");
    for (const auto& ev : s.maintenance)
      if (ev.line < 0 || ev.line >= grid.n_lines() || ev.duration <= 0)
        throw SchemaError("chronic " + chronic.id + ": bad maintenance event");
  }
}

namespace detail {

// Civil date from days since 1970-01-01 (Howard Hinnant's algorithm).
inline void civil_from_days(long z, int& y, int& m, int& d) {
  z += 719468;
  const long era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const long yy = static_cast<long>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp < 10 ? mp + 3 : mp - 9);
  y = static_cast<int>(yy + (m <= 2));
}

inline std::string timestamp_for_step(int step, int step_minutes) {
  // Synthetic calendar anchored at 2050-01-01T00:00 (29220 days past epoch).
  const long total_min = static_cast<long>(step) * step_minutes;
  const long day = 29220 + total_min / 1440;
  int y, m, d;
  civil_from_days(day, y, m, d);
  const int hh = static_cast<int>((total_min / 60) % 24);
  const int mm = static_cast<int>(total_min % 60);
  char buf[24];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d", y, m, d, hh, mm);
  return buf;
}

inline std::string format_mw(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace detail

// Columnar chronic file: a small comment header, one CSV header row and one
// row per step (timestamp, gen_* MW, load_* MW, maintenance events starting
// at that row encoded as "line:duration" joined by ';').
inline void write_chronic(const Chronic& chronic, const Grid& grid, std::ostream& out) {
  out << "# gridtopo-chronic v1\n";
  out << "# id: " << chronic.id << "\n";
  out << "# grid: " << grid.name() << "\n";
  out << "# step_minutes: " << chronic.step_minutes << "\n";
  out << "timestamp";
  for (int g = 0; g < grid.n_generators(); ++g) out << ",gen_" << g;
  for (int d = 0; d < grid.n_loads(); ++d) out << ",load_" << d;
  out << ",maintenance\n";
  for (int t = 0; t < chronic.length(); ++t) {
    const auto& s = chronic.steps[t];
    out << detail::timestamp_for_step(t, chronic.step_minutes);
    for (double v : s.gen_mw) out << ',' << detail::format_mw(v);
    for (double v : s.load_mw) out << ',' << detail::format_mw(v);
    out << ',';
    for (std::size_t i = 0; i < s.maintenance.size(); ++i) {
      if (i) out << ';';
      out << s.maintenance[i].line << ':' << s.maintenance[i].duration;
    }
    out << '\n';
  }
}

inline void write_chronic_file(const Chronic& chronic, const Grid& grid, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw SchemaError("chronic: cannot write " + path);
  write_chronic(chronic, grid, out);
}

inline Chronic read_chronic(std::istream& in, const Grid& grid, const std::string& where = "<stream>") {
  Chronic chronic;
  std::string line;
  bool header_seen = false;
  int t = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto colon = line.find(':');
      if (colon != std::string::npos) {
        std::string key = line.substr(1, colon - 1);
        std::string value = line.substr(colon + 1);
        const auto strip = [](std::string s) {
          const auto b = s.find_first_not_of(' ');
          const auto e = s.find_last_not_of(" \r");
          return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        if (strip(key) == "id") chronic.id = strip(value);
        if (strip(key) == "step_minutes") chronic.step_minutes = std::stoi(strip(value));
      }
      continue;
    }
    if (!header_seen) {  // CSV header row
      header_seen = true;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    while (cells.size() < static_cast<std::size_t>(1 + grid.n_generators() + grid.n_loads() + 1))
      cells.emplace_back();
    const std::size_t expected = 1 + grid.n_generators() + grid.n_loads() + 1;
    if (cells.size() != expected)
      throw SchemaError("chronic " + where + ": row " + std::to_string(t) + " has " +
                        std::to_string(cells.size()) + " cells, expected " + std::to_string(expected));
    ChronicStep step;
    std::size_t c = 1;
    try {
      for (int g = 0; g < grid.n_generators(); ++g) step.gen_mw.push_back(std::stod(cells[c++]));
      for (int d = 0; d < grid.n_loads(); ++d) step.load_mw.push_back(std::stod(cells[c++]));
    } catch (const std::exception&) {
      throw SchemaError("chronic " + where + ": non-numeric value in row " + std::to_string(t));
    }
    std::string maint = cells[c];
    if (!maint.empty() && maint.back() == '\r') maint.pop_back();
    if (!maint.empty()) {
      std::stringstream ms(maint);
      std::string ev;
      while (std::getline(ms, ev, ';')) {
        const auto colon = ev.find(':');
        if (colon == std::string::npos)
          throw SchemaError("chronic " + where + ": bad maintenance token '" + ev + "'");
        step.maintenance.push_back({std::stoi(ev.substr(0, colon)), t, std::stoi(ev.substr(colon + 1))});
      }
    }
    chronic.steps.push_back(std::move(step));
    ++t;
  }
  if (chronic.id.empty()) chronic.id = where;
  require_compatible(grid, chronic);
  return chronic;
}

inline Chronic read_chronic_file(const std::string& path, const Grid& grid) {
  std::ifstream in(path);
  if (!in) throw SchemaError("chronic: cannot open " + path);
  return read_chronic(in, grid, path);
}

// ---------------------------------------------------------------------------
// Synthetic chronic generation.

struct CongestionWindow {
  int line = -1;
  int start = 0;          // first step of the window (within a day if daily)
  int duration = 0;       // steps
  double target_rho = 1.1;
  bool daily = false;     // repeat every 288 steps
};

struct ChronicGenConfig {
  int count = 10;
  int steps = 2016;
  int step_minutes = 5;
  double base_load_scale = 1.0;      // multiplies every load's p_nominal
  double daily_amplitude = 0.25;     // relative day/night swing
  double weekend_factor = 0.85;      // demand scale on days 6 and 7
  double load_noise_sigma = 0.02;    // smooth per-load noise
  double gen_volatility = 0.08;      // smooth per-generator share noise
  std::vector<CongestionWindow> windows;
  std::vector<MaintenanceEvent> maintenance;
  std::uint64_t seed = 4242;
};

namespace detail {

inline double window_bump(int pos, int duration) {
  // 0 at the edges, 1 at the centre.
  const double u = (pos + 0.5) / duration;
  const double s = std::sin(3.14159265358979323846 * u);
  return s * s;
}

}  // namespace detail

// Smooth daily/weekly demand shapes plus volatile generation, with engineered
// congestion windows: inside a window all injections are scaled so the target
// line approaches target_rho under the base topology (exact at the window
// centre; DC linearity makes the scaling exact per step).
inline Chronic generate_chronic(const Grid& grid, const ChronicGenConfig& cfg, int index) {
  Chronic chronic;
  char idbuf[32];
  std::snprintf(idbuf, sizeof idbuf, "chron_%03d", index);
  chronic.id = idbuf;
  chronic.step_minutes = cfg.step_minutes;

  Rng rng(splitmix64(cfg.seed) ^ splitmix64(0x517cc1b727220a95ULL + index));
  const int steps_per_day = 1440 / cfg.step_minutes;

  double scale = cfg.base_load_scale;
  for (int attempt = 0; attempt < 3; ++attempt) {
    chronic.steps.clear();
    Rng local = rng;  // same stream every attempt, only the scale changes

    std::vector<double> load_noise(grid.n_loads(), 0.0);
    std::vector<double> gen_noise(grid.n_generators(), 0.0);
    double pmax_total = 0.0;
    for (const auto& g : grid.generators()) pmax_total += g.p_max;

    for (int t = 0; t < cfg.steps; ++t) {
      const double minute = static_cast<double>(t % steps_per_day) * cfg.step_minutes;
      const double day_phase = 2.0 * 3.14159265358979323846 * (minute / 60.0 - 9.0) / 24.0;
      const int day = t / steps_per_day;
      const double weekly = (day % 7 >= 5) ? cfg.weekend_factor : 1.0;
      const double daily = 1.0 + cfg.daily_amplitude * std::sin(day_phase);

      ChronicStep step;
      double total_load = 0.0;
      for (int d = 0; d < grid.n_loads(); ++d) {
        load_noise[d] = 0.95 * load_noise[d] + cfg.load_noise_sigma * local.normal();
        double v = grid.loads()[d].p_nominal * scale * daily * weekly * (1.0 + load_noise[d]);
        if (v < 0.0) v = 0.0;
        step.load_mw.push_back(v);
        total_load += v;
      }
      for (int g = 0; g < grid.n_generators(); ++g) {
        gen_noise[g] = 0.9 * gen_noise[g] + cfg.gen_volatility * local.normal();
        const double share = pmax_total > 0.0 ? grid.generators()[g].p_max / pmax_total
                                              : 1.0 / grid.n_generators();
        double v = share * total_load * (1.0 + gen_noise[g]);
        if (v < 0.0) v = 0.0;
        step.gen_mw.push_back(v);
      }
      chronic.steps.push_back(std::move(step));
    }

    // Congestion windows: scale whole steps so the window's line hits its
    // target loading at the window centre. Later windows win on overlap.
    TopologyVector base = TopologyVector::base(grid);
    for (const auto& w : cfg.windows) {
      if (w.line < 0 || w.line >= grid.n_lines() || w.duration <= 0)
        throw SchemaError("chronic generator: bad congestion window");
      const int repeats = w.daily ? (cfg.steps + steps_per_day - 1) / steps_per_day : 1;
      for (int r = 0; r < repeats; ++r) {
        const int start = w.start + r * (w.daily ? steps_per_day : 0);
        for (int k = 0; k < w.duration; ++k) {
          const int t = start + k;
          if (t < 0 || t >= cfg.steps) continue;
          auto& step = chronic.steps[t];
          auto graph = build_effective_graph(grid, base, {step.gen_mw, step.load_mw});
          auto sol = solve_dc(graph);
          if (!sol.converged) continue;
          auto lv = loadings(sol, graph);
          if (lv.rho[w.line] < 0.05) continue;  // cannot congest a dead corridor
          const double factor =
              1.0 + detail::window_bump(k, w.duration) * (w.target_rho / lv.rho[w.line] - 1.0);
          for (auto& v : step.gen_mw) v *= factor;
          for (auto& v : step.load_mw) v *= factor;
        }
      }
    }

    for (const auto& ev : cfg.maintenance)
      if (ev.start >= 0 && ev.start < cfg.steps)
        chronic.steps[ev.start].maintenance.push_back({ev.line, ev.start, ev.duration});

    // Feasibility: the base case at t = 0 must solve.
    auto graph = build_effective_graph(grid, base, {chronic.steps[0].gen_mw, chronic.steps[0].load_mw});
    if (solve_dc(graph).converged && !detect_islands(graph).fatal) {
      require_compatible(grid, chronic);
      return chronic;
    }
    scale *= 0.5;
  }
  throw SchemaError("chronic generator: base case infeasible for " + chronic.id);
}

}  // namespace gridtopo
