#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridtopo/common.hpp"

namespace gridtopo {

// Every substation owns two busbars; elements attached to it sit on one of
// them. Element slots are enumerated in a single canonical order shared by
// all topology vectors of a grid: sorted by (substation, kind, id, end).
enum class ElementKind : std::uint8_t { LineEnd = 0, Generator = 1, Load = 2 };

struct ElementSlot {
  int substation = -1;
  ElementKind kind = ElementKind::LineEnd;
  int id = -1;   // line / generator / load index
  int end = 0;   // for line ends: 0 = from side, 1 = to side
};

struct Line {
  int from = -1;
  int to = -1;
  double reactance = 0.0;        // p.u.
  double thermal_limit = 0.0;    // MW
};

struct Generator {
  int substation = -1;
  double p_max = 0.0;  // MW
};

struct Load {
  int substation = -1;
  double p_nominal = 1.0;  // MW, shaping weight for synthetic chronics
};

class Grid {
 public:
  Grid(std::string name, int n_substations, std::vector<Line> lines,
       std::vector<Generator> generators, std::vector<Load> loads,
       double base_mva = 100.0)
      : name_(std::move(name)),
        n_substations_(n_substations),
        lines_(std::move(lines)),
        generators_(std::move(generators)),
        loads_(std::move(loads)),
        base_mva_(base_mva) {
    validate();
    build_element_index();
  }

  [[nodiscard]] const std::string& name() const { return name_; }
  [[nodiscard]] int n_substations() const { return n_substations_; }
  [[nodiscard]] int n_lines() const { return static_cast<int>(lines_.size()); }
  [[nodiscard]] int n_generators() const { return static_cast<int>(generators_.size()); }
  [[nodiscard]] int n_loads() const { return static_cast<int>(loads_.size()); }
  [[nodiscard]] int n_elements() const { return static_cast<int>(elements_.size()); }
  [[nodiscard]] double base_mva() const { return base_mva_; }

  [[nodiscard]] const std::vector<Line>& lines() const { return lines_; }
  [[nodiscard]] const std::vector<Generator>& generators() const { return generators_; }
  [[nodiscard]] const std::vector<Load>& loads() const { return loads_; }
  [[nodiscard]] const std::vector<ElementSlot>& elements() const { return elements_; }

  // Canonical element range [begin, end) of one substation.
  [[nodiscard]] int elements_begin(int substation) const { return sub_begin_[substation]; }
  [[nodiscard]] int elements_end(int substation) const { return sub_begin_[substation + 1]; }
  [[nodiscard]] int n_elements_at(int substation) const {
    return sub_begin_[substation + 1] - sub_begin_[substation];
  }

  [[nodiscard]] int line_end_element(int line, int end) const { return line_elem_[2 * line + end]; }
  [[nodiscard]] int generator_element(int gen) const { return gen_elem_[gen]; }
  [[nodiscard]] int load_element(int load) const { return load_elem_[load]; }

  // Structural fingerprint; two grids with equal signatures have identical
  // canonical element orders, so their topology vectors are interchangeable.
  [[nodiscard]] std::uint64_t signature() const { return signature_; }

 private:
  void validate() const {
    if (n_substations_ < 1) throw SchemaError("grid: needs at least one substation");
    if (lines_.empty()) throw SchemaError("grid: needs at least one line");
    if (base_mva_ <= 0.0) throw SchemaError("grid: base_mva must be > 0");
    for (std::size_t l = 0; l < lines_.size(); ++l) {
      const Line& ln = lines_[l];
      if (ln.from < 0 || ln.from >= n_substations_ || ln.to < 0 || ln.to >= n_substations_)
        throw SchemaError("grid: line " + std::to_string(l) + " references unknown substation");
      if (ln.from == ln.to)
        throw SchemaError("grid: line " + std::to_string(l) + " is a self-loop");
      if (ln.reactance <= 0.0)
        throw SchemaError("grid: line " + std::to_string(l) + " reactance must be > 0");
      if (ln.thermal_limit <= 0.0)
        throw SchemaError("grid: line " + std::to_string(l) + " thermal_limit must be > 0");
    }
    for (std::size_t g = 0; g < generators_.size(); ++g)
      if (generators_[g].substation < 0 || generators_[g].substation >= n_substations_)
        throw SchemaError("grid: generator " + std::to_string(g) + " references unknown substation");
    for (std::size_t d = 0; d < loads_.size(); ++d)
      if (loads_[d].substation < 0 || loads_[d].substation >= n_substations_)
        throw SchemaError("grid: load " + std::to_string(d) + " references unknown substation");
  }

  void build_element_index() {
    for (std::size_t l = 0; l < lines_.size(); ++l) {
      elements_.push_back({lines_[l].from, ElementKind::LineEnd, static_cast<int>(l), 0});
      elements_.push_back({lines_[l].to, ElementKind::LineEnd, static_cast<int>(l), 1});
    }
    for (std::size_t g = 0; g < generators_.size(); ++g)
      elements_.push_back({generators_[g].substation, ElementKind::Generator, static_cast<int>(g), 0});
    for (std::size_t d = 0; d < loads_.size(); ++d)
      elements_.push_back({loads_[d].substation, ElementKind::Load, static_cast<int>(d), 0});

    std::sort(elements_.begin(), elements_.end(), [](const ElementSlot& a, const ElementSlot& b) {
      if (a.substation != b.substation) return a.substation < b.substation;
      if (a.kind != b.kind) return a.kind < b.kind;
      if (a.id != b.id) return a.id < b.id;
      return a.end < b.end;
    });

    sub_begin_.assign(n_substations_ + 1, 0);
    line_elem_.assign(2 * lines_.size(), -1);
    gen_elem_.assign(generators_.size(), -1);
    load_elem_.assign(loads_.size(), -1);
    for (int e = 0; e < static_cast<int>(elements_.size()); ++e) {
      const ElementSlot& s = elements_[e];
      ++sub_begin_[s.substation + 1];
      switch (s.kind) {
        case ElementKind::LineEnd: line_elem_[2 * s.id + s.end] = e; break;
        case ElementKind::Generator: gen_elem_[s.id] = e; break;
        case ElementKind::Load: load_elem_[s.id] = e; break;
      }
    }
    for (int s = 0; s < n_substations_; ++s) sub_begin_[s + 1] += sub_begin_[s];

    std::uint64_t h = fnv1a64(name_);
    for (const ElementSlot& s : elements_) {
      int raw[4] = {s.substation, static_cast<int>(s.kind), s.id, s.end};
      h = fnv1a64(raw, sizeof raw, h);
    }
    signature_ = h;
  }

  std::string name_;
  int n_substations_ = 0;
  std::vector<Line> lines_;
  std::vector<Generator> generators_;
  std::vector<Load> loads_;
  double base_mva_ = 100.0;

  std::vector<ElementSlot> elements_;
  std::vector<int> sub_begin_;
  std::vector<int> line_elem_;
  std::vector<int> gen_elem_;
  std::vector<int> load_elem_;
  std::uint64_t signature_ = 0;
};

// Grid description file. Substations are listed with explicit ids which must
// form the dense range 0..N-1; lines/generators/loads reference those ids.
inline Grid load_grid(const nlohmann::json& j) {
  try {
    std::string name = j.value("name", "grid");
    double base_mva = j.value("base_mva", 100.0);

    const auto& subs = j.at("substations");
    int n = static_cast<int>(subs.size());
    std::vector<bool> seen(n, false);
    for (const auto& s : subs) {
      int id = s.at("id").get<int>();
      if (id < 0 || id >= n || seen[id])
        throw SchemaError("grid: substation ids must be unique and dense 0..N-1");
      seen[id] = true;
    }

    std::vector<Line> lines;
    for (const auto& l : j.at("lines"))
      lines.push_back({l.at("from").get<int>(), l.at("to").get<int>(),
                       l.at("reactance").get<double>(), l.at("thermal_limit").get<double>()});
    std::vector<Generator> gens;
    for (const auto& g : j.at("generators"))
      gens.push_back({g.at("substation").get<int>(), g.at("p_max").get<double>()});
    std::vector<Load> loads;
    for (const auto& d : j.at("loads"))
      loads.push_back({d.at("substation").get<int>(), d.value("p_nominal", 1.0)});

    return Grid(std::move(name), n, std::move(lines), std::move(gens), std::move(loads), base_mva);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("grid: malformed description: ") + e.what());
  }
}

inline Grid load_grid_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("grid: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("grid: " + path + ": " + e.what());
  }
  return load_grid(j);
}

}  // namespace gridtopo
