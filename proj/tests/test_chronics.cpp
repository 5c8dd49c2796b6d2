#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "gridtopo/chronics.hpp"
#include "gridtopo/environment.hpp"

#include "fixtures.hpp"

using namespace gridtopo;
using testfix::five_sub_grid_ref;

namespace {

ChronicGenConfig small_cfg() {
  ChronicGenConfig cfg;
  cfg.count = 1;
  cfg.steps = 576;  // two days
  cfg.seed = 1001;
  return cfg;
}

}  // namespace

TEST_CASE("generator is deterministic per seed") {
  const Grid& grid = five_sub_grid_ref();
  auto cfg = small_cfg();
  Chronic a = generate_chronic(grid, cfg, 0);
  Chronic b = generate_chronic(grid, cfg, 0);
  REQUIRE(a.length() == b.length());
  for (int t = 0; t < a.length(); ++t) {
    REQUIRE(a.steps[t].gen_mw == b.steps[t].gen_mw);
    REQUIRE(a.steps[t].load_mw == b.steps[t].load_mw);
  }
  Chronic c = generate_chronic(grid, cfg, 1);
  REQUIRE(a.steps[100].load_mw != c.steps[100].load_mw);
}

TEST_CASE("zero-volatility config produces a pure shape") {
  const Grid& grid = five_sub_grid_ref();
  auto cfg = small_cfg();
  cfg.load_noise_sigma = 0.0;
  cfg.gen_volatility = 0.0;
  cfg.daily_amplitude = 0.0;
  cfg.weekend_factor = 1.0;
  Chronic ch = generate_chronic(grid, cfg, 0);
  for (int t = 1; t < ch.length(); ++t) {
    REQUIRE(ch.steps[t].gen_mw == ch.steps[0].gen_mw);
    REQUIRE(ch.steps[t].load_mw == ch.steps[0].load_mw);
  }
}

TEST_CASE("congestion window pushes the target line over its limit") {
  const Grid& grid = five_sub_grid_ref();
  auto cfg = small_cfg();
  cfg.windows.push_back({3, 100, 24, 1.1, false});
  Chronic ch = generate_chronic(grid, cfg, 0);

  TopologyVector base = TopologyVector::base(grid);
  bool over = false;
  for (int t = 100; t < 124; ++t) {
    auto g = build_effective_graph(grid, base, {ch.steps[t].gen_mw, ch.steps[t].load_mw});
    auto lv = loadings(solve_dc(g), g);
    over = over || lv.rho[3] > 1.0;
  }
  REQUIRE(over);

  // At the window centre the loading hits the target exactly.
  const int mid = 100 + 12;
  auto g = build_effective_graph(grid, base, {ch.steps[mid].gen_mw, ch.steps[mid].load_mw});
  auto lv = loadings(solve_dc(g), g);
  REQUIRE(lv.rho[3] > 1.05);
}

TEST_CASE("chronic files round-trip") {
  const Grid& grid = five_sub_grid_ref();
  auto cfg = small_cfg();
  cfg.steps = 64;
  cfg.maintenance.push_back({2, 10, 12});
  Chronic ch = generate_chronic(grid, cfg, 3);

  std::stringstream buf;
  write_chronic(ch, grid, buf);
  Chronic back = read_chronic(buf, grid, "mem");

  REQUIRE(back.id == ch.id);
  REQUIRE(back.length() == ch.length());
  for (int t = 0; t < ch.length(); ++t) {
    for (int g = 0; g < grid.n_generators(); ++g)
      REQUIRE_THAT(back.steps[t].gen_mw[g],
                   Catch::Matchers::WithinAbs(ch.steps[t].gen_mw[g], 1e-6));
    for (int d = 0; d < grid.n_loads(); ++d)
      REQUIRE_THAT(back.steps[t].load_mw[d],
                   Catch::Matchers::WithinAbs(ch.steps[t].load_mw[d], 1e-6));
  }
  REQUIRE(back.steps[10].maintenance.size() == 1);
  REQUIRE(back.steps[10].maintenance[0].line == 2);
  REQUIRE(back.steps[10].maintenance[0].duration == 12);
}

TEST_CASE("incompatible chronic is rejected") {
  const Grid& grid = five_sub_grid_ref();
  Chronic ch;
  ch.id = "bad";
  ch.steps.resize(3);
  for (auto& s : ch.steps) {
    s.gen_mw = {1.0};  // grid has two generators
    s.load_mw = {1.0, 1.0};
  }
  REQUIRE_THROWS_AS(require_compatible(grid, ch), SchemaError);
}

TEST_CASE("timestamps follow the synthetic calendar") {
  REQUIRE(detail::timestamp_for_step(0, 5) == "2050-01-01T00:00");
  REQUIRE(detail::timestamp_for_step(1, 5) == "2050-01-01T00:05");
  REQUIRE(detail::timestamp_for_step(288, 5) == "2050-01-02T00:00");
  REQUIRE(detail::timestamp_for_step(2015, 5) == "2050-01-07T23:55");
}
