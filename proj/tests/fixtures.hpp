#pragma once

// Shared test fixtures: small grids with hand-checkable DC solutions.

#include <vector>

#include "gridtopo/grid.hpp"
#include "gridtopo/powerflow.hpp"
#include "gridtopo/topology.hpp"

namespace gridtopo::testfix {

// Five-substation toy grid: two generators on the left (subs 0, 1), a heavy
// load at sub 2, a light load at sub 4 fed through the junction sub 3. Under
// the base topology line 3 (the 2-3 corridor) runs over its limit; splitting
// sub 3 so that lines 3 and 4 share the second busbar relieves it.
//
//   sub0 (G0=60) ---L1--- sub2 (D0=140)
//    |    \                 |
//   L0    L4               L3
//    |      \               |
//   sub1 (G1=120) --L2--- sub3 ---L5--- sub4 (D1=40)
inline Grid five_sub_grid() {
  std::vector<Line> lines = {
      {0, 1, 0.2, 100.0},  // L0
      {0, 2, 0.2, 90.0},   // L1
      {1, 3, 0.2, 100.0},  // L2
      {2, 3, 0.1, 74.0},   // L3, overloaded in the base case
      {0, 3, 0.1, 90.0},   // L4
      {3, 4, 0.1, 60.0},   // L5
  };
  std::vector<Generator> gens = {{0, 120.0}, {1, 160.0}};
  std::vector<Load> loads = {{2, 140.0}, {4, 40.0}};
  return Grid("five_sub", 5, std::move(lines), std::move(gens), std::move(loads));
}

// Singleton instance so TopologyVector grid pointers stay valid for the whole
// test binary.
inline const Grid& five_sub_grid_ref() {
  static Grid g = five_sub_grid();
  return g;
}

inline Injections five_sub_injections() { return {{60.0, 120.0}, {140.0, 40.0}}; }

// Canonical element order at sub 3 is the four line ends of L2, L3, L4, L5.
// The relieving split parks L3 and L4 on busbar two.
inline SubstationAction five_sub_relief_action() { return {3, {1, 2, 2, 1}}; }

inline TopologyVector five_sub_relief_topology() {
  TopologyVector psi = TopologyVector::base(five_sub_grid_ref());
  psi.apply(five_sub_relief_action());
  return psi;
}

}  // namespace gridtopo::testfix
