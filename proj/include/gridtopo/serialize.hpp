#pragma once

// JSON encodings shared by the persisted artifacts (registries, target
// topology sets, experience logs, replay bundles).

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridtopo/environment.hpp"
#include "gridtopo/grid.hpp"
#include "gridtopo/topology.hpp"

namespace gridtopo {

inline nlohmann::json topology_to_json(const TopologyVector& psi) {
  return {{"bus", psi.buses()}, {"connected", psi.connected_flags()}};
}

inline TopologyVector topology_from_json(const nlohmann::json& j, const Grid& grid) {
  TopologyVector psi = TopologyVector::base(grid);
  const auto bus = j.at("bus").get<std::vector<std::uint8_t>>();
  const auto connected = j.at("connected").get<std::vector<std::uint8_t>>();
  if (static_cast<int>(connected.size()) != grid.n_lines())
    throw SchemaError("topology: connected flag count mismatch");
  psi.set_all_buses(bus);
  for (int l = 0; l < grid.n_lines(); ++l) psi.set_line_connected(l, connected[l] != 0);
  return psi;
}

inline nlohmann::json action_to_json(const Action& a) {
  switch (a.kind) {
    case Action::Kind::DoNothing:
      return {{"kind", "do_nothing"}};
    case Action::Kind::LineReconnect:
      return {{"kind", "reconnect"}, {"line", a.line}};
    case Action::Kind::Substation:
      return {{"kind", "substation"},
              {"substation", a.substation.substation},
              {"assignment", a.substation.assignment}};
  }
  return {};
}

inline Action action_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "do_nothing") return Action::do_nothing();
  if (kind == "reconnect") return Action::reconnect(j.at("line").get<int>());
  if (kind == "substation")
    return Action::set_substation({j.at("substation").get<int>(),
                                   j.at("assignment").get<std::vector<std::uint8_t>>()});
  throw SchemaError("action: unknown kind '" + kind + "'");
}

inline nlohmann::json observation_to_json(const Observation& obs) {
  return {{"t", obs.t},
          {"rho", obs.rho.rho},
          {"rho_max", obs.rho.rho_max},
          {"topology", topology_to_json(obs.psi)},
          {"overflow_counters", obs.overflow_counters},
          {"line_cooldown", obs.line_cooldown},
          {"substation_cooldown", obs.substation_cooldown},
          {"gen_mw", obs.gen_mw},
          {"load_mw", obs.load_mw}};
}

inline Observation observation_from_json(const nlohmann::json& j, const Grid& grid) {
  Observation obs(grid);
  obs.t = j.at("t").get<int>();
  obs.rho.rho = j.at("rho").get<std::vector<double>>();
  obs.rho.rho_max = j.at("rho_max").get<double>();
  obs.psi = topology_from_json(j.at("topology"), grid);
  obs.overflow_counters = j.at("overflow_counters").get<std::vector<int>>();
  obs.line_cooldown = j.at("line_cooldown").get<std::vector<int>>();
  obs.substation_cooldown = j.at("substation_cooldown").get<std::vector<int>>();
  obs.gen_mw = j.at("gen_mw").get<std::vector<double>>();
  obs.load_mw = j.at("load_mw").get<std::vector<double>>();
  return obs;
}

}  // namespace gridtopo
