#pragma once

#include <cstdint>
#include <vector>

#include "gridtopo/common.hpp"
#include "gridtopo/grid.hpp"

namespace gridtopo {

// Opaque handle issued by a TopologyRegistry.
using TopologyId = int;
inline constexpr TopologyId kNoTopologyId = -1;

// One-step reassignment of a single substation's elements between its two
// busbars. `assignment` covers all element slots of that substation in
// canonical order, values in {1, 2}, stored in canonical orientation (the
// substation's first element is always on bus 1).
struct SubstationAction {
  int substation = -1;
  std::vector<std::uint8_t> assignment;

  void canonicalize() {
    if (!assignment.empty() && assignment.front() == 2)
      for (auto& b : assignment) b = (b == 1) ? 2 : 1;
  }

  friend bool operator==(const SubstationAction&, const SubstationAction&) = default;
};

// Whole-grid busbar assignment plus per-line connectivity. Kept in canonical
// form at all times: within each substation the element with the smallest
// canonical index sits on bus 1, so the two symmetric relabelings of a
// physical topology share one encoding.
class TopologyVector {
 public:
  explicit TopologyVector(const Grid& grid)
      : grid_(&grid),
        bus_(grid.n_elements(), 1),
        connected_(grid.n_lines(), 1) {}

  static TopologyVector base(const Grid& grid) { return TopologyVector(grid); }

  [[nodiscard]] const Grid& grid() const { return *grid_; }
  [[nodiscard]] std::uint8_t bus_of(int element) const { return bus_[element]; }
  [[nodiscard]] bool line_connected(int line) const { return connected_[line] != 0; }
  [[nodiscard]] const std::vector<std::uint8_t>& buses() const { return bus_; }
  [[nodiscard]] const std::vector<std::uint8_t>& connected_flags() const { return connected_; }

  void set_line_connected(int line, bool connected) { connected_[line] = connected ? 1 : 0; }

  // Raw per-element write; re-canonicalizes the owning substation.
  void set_bus(int element, std::uint8_t bus) {
    bus_[element] = bus;
    canonicalize_substation(grid_->elements()[element].substation);
  }

  // Bulk write of every element's busbar, canonicalized once at the end.
  void set_all_buses(const std::vector<std::uint8_t>& buses) {
    if (buses.size() != bus_.size())
      throw StructuralMismatchError("topology: bus vector length mismatch");
    bus_ = buses;
    for (int s = 0; s < grid_->n_substations(); ++s) canonicalize_substation(s);
  }

  void apply(const SubstationAction& action) {
    const int begin = grid_->elements_begin(action.substation);
    const int end = grid_->elements_end(action.substation);
    if (static_cast<int>(action.assignment.size()) != end - begin)
      throw StructuralMismatchError("substation action: assignment length mismatch");
    for (int e = begin; e < end; ++e) bus_[e] = action.assignment[e - begin];
    canonicalize_substation(action.substation);
  }

  [[nodiscard]] std::vector<std::uint8_t> substation_assignment(int substation) const {
    const int begin = grid_->elements_begin(substation);
    const int end = grid_->elements_end(substation);
    return {bus_.begin() + begin, bus_.begin() + end};
  }

  // True if any element of `substation` is off bus 1 (canonical form makes
  // this equivalent to "differs from the base topology").
  [[nodiscard]] bool substation_modified(int substation) const {
    const int begin = grid_->elements_begin(substation);
    const int end = grid_->elements_end(substation);
    for (int e = begin; e < end; ++e)
      if (bus_[e] != 1) return true;
    return false;
  }

  friend bool operator==(const TopologyVector& a, const TopologyVector& b) {
    return a.grid_->signature() == b.grid_->signature() && a.bus_ == b.bus_ &&
           a.connected_ == b.connected_;
  }

 private:
  void canonicalize_substation(int substation) {
    const int begin = grid_->elements_begin(substation);
    const int end = grid_->elements_end(substation);
    if (begin == end) return;
    if (bus_[begin] == 2)
      for (int e = begin; e < end; ++e) bus_[e] = (bus_[e] == 1) ? 2 : 1;
  }

  const Grid* grid_;
  std::vector<std::uint8_t> bus_;
  std::vector<std::uint8_t> connected_;
};

inline void require_same_structure(const TopologyVector& a, const TopologyVector& b) {
  if (a.grid().signature() != b.grid().signature())
    throw StructuralMismatchError("topology vectors belong to different grids");
}

// Per-substation actions taking `current` to `target`. Only busbar
// assignments are compared; line connectivity is handled by reconnection
// actions, not substation actions. Substations with no difference are absent.
inline std::vector<SubstationAction> topology_diff(const TopologyVector& target,
                                                   const TopologyVector& current) {
  require_same_structure(target, current);
  const Grid& grid = target.grid();
  std::vector<SubstationAction> actions;
  for (int s = 0; s < grid.n_substations(); ++s) {
    const int begin = grid.elements_begin(s);
    const int end = grid.elements_end(s);
    bool differs = false;
    for (int e = begin; e < end && !differs; ++e)
      differs = target.bus_of(e) != current.bus_of(e);
    if (differs) actions.push_back({s, target.substation_assignment(s)});
  }
  return actions;
}

// Number of substations whose assignment differs from the base topology.
// Line connectivity is deliberately ignored.
inline int distance_from_base(const TopologyVector& psi) {
  int count = 0;
  for (int s = 0; s < psi.grid().n_substations(); ++s)
    if (psi.substation_modified(s)) ++count;
  return count;
}

inline std::vector<int> changed_substations(const TopologyVector& psi) {
  std::vector<int> subs;
  for (int s = 0; s < psi.grid().n_substations(); ++s)
    if (psi.substation_modified(s)) subs.push_back(s);
  return subs;
}

// Deterministic digest over the canonical encoding; stable across runs and
// platforms.
inline std::uint64_t canonical_hash(const TopologyVector& psi) {
  std::uint64_t h = fnv1a64(psi.buses().data(), psi.buses().size());
  h = fnv1a64(psi.connected_flags().data(), psi.connected_flags().size(), h);
  return h;
}

}  // namespace gridtopo
