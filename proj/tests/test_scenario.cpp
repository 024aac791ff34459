#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "evcoord/scenario.hpp"

using namespace evcoord;
using nlohmann::json;

namespace {

const std::string kScenarioDir = EVCOORD_SCENARIO_DIR;

json minimal_scenario() {
  json j;
  j["name"] = "mini";
  j["seed"] = 9;
  j["grid"] = {
      {"base_kv", 0.23},
      {"band_fraction", 0.05},
      {"nodes", json::array({{{"id", 0}, {"phases", "abc"}}, {{"id", 1}, {"phases", "abc"}}})},
      {"edges", json::array({{{"from", 0},
                              {"to", 1},
                              {"phases", "abc"},
                              {"z_ohm",
                               {{"aa", {0.13, 0.39}}, {"bb", {0.13, 0.39}}, {"cc", {0.13, 0.39}}}}}})}};
  j["loads"] = {{"T", 4},
                {"dt_hours", 0.5},
                {"p_kw", {{"1:c", {5.0, 10.0, 10.0, 5.0}}}}};
  j["ev"] = {{"counts", {{"1:a", 1}, {"1:b", 1}, {"1:c", 1}}},
             {"ranges",
              {{"battery_kwh", {40.0, 40.0}},
               {"soc_init_frac", {0.5, 0.5}},
               {"soc_target_frac", {0.55, 0.6}}}},
             {"price", {{"kind", "flat"}, {"value", 0.2}}}};
  j["algorithm"] = {{"c", 1.0}, {"iters", 5}, {"censoring", false}};
  return j;
}

}  // namespace

TEST_CASE("bundled example1 parses with the case-study shape") {
  const Scenario sc = parse_scenario(kScenarioDir + "/example1.json");
  CHECK(sc.T == 48);
  CHECK(sc.dt_hours == 0.5);
  int total = 0;
  for (const auto& [sp, count] : sc.ev.counts) total += count;
  CHECK(total == 150);
  CHECK(sc.algo.c == 100.0);
  CHECK(sc.algo.iters == 30);
  CHECK(sc.algo.policy.enabled);

  const SimInputs in = materialize(sc);
  CHECK(in.evs.size() == 150);
  CHECK(in.sens.K() == 3);
  CHECK(in.graph.neighbors[0].size() == 149);
  // the three printed self impedances are carried exactly
  CHECK(common_path_impedance(in.grid, 1, 1, Phase::A, Phase::A) ==
        std::complex<double>(0.1313, 0.3856));
  CHECK(common_path_impedance(in.grid, 1, 1, Phase::B, Phase::B) ==
        std::complex<double>(0.1278, 0.3969));
  CHECK(common_path_impedance(in.grid, 1, 1, Phase::C, Phase::C) ==
        std::complex<double>(0.1293, 0.3920));
}

TEST_CASE("explicit EV with an unreachable target is rejected by name") {
  json j = minimal_scenario();
  j["ev"].erase("counts");
  j["ev"]["explicit"] = json::array({{{"id", 42},
                                      {"supply_point", "1:a"},
                                      {"battery_kwh", 50.0},
                                      {"soc_init", 10.0},
                                      {"soc_target", 48.0},  // needs 19 kW average
                                      {"soc_min", 5.0},
                                      {"soc_max", 50.0}}});
  try {
    parse_scenario_json(j, "mini");
    FAIL("expected ValidationError");
  } catch (const ValidationError& err) {
    CHECK(err.what() == doctest::Contains("42"));
    CHECK(err.what() == doctest::Contains("unreachable"));
  }
}

TEST_CASE("censor epsilon outside (0,1) is rejected") {
  json j = minimal_scenario();
  j["algorithm"]["censoring"] = true;
  j["algorithm"]["gamma"] = 1.0;
  j["algorithm"]["epsilon"] = 1.2;
  CHECK_THROWS_AS(parse_scenario_json(j, "mini"), ValidationError);

  // the parameter ranges hold even with censoring switched off
  j["algorithm"]["censoring"] = false;
  CHECK_THROWS_AS(parse_scenario_json(j, "mini"), ValidationError);
}

TEST_CASE("validation collects multiple problems") {
  json j = minimal_scenario();
  j["algorithm"]["censoring"] = true;
  j["algorithm"]["epsilon"] = 1.2;    // bad policy
  j["loads"]["p_kw"]["1:c"] = {1.0};  // wrong length vs T=4
  try {
    parse_scenario_json(j, "mini");
    FAIL("expected ValidationError");
  } catch (const ValidationError& err) {
    CHECK(err.problems().size() >= 2);
  }
}

TEST_CASE("unknown supply points in counts or loads are reported") {
  json j = minimal_scenario();
  j["ev"]["counts"]["9:a"] = 3;
  CHECK_THROWS_AS(parse_scenario_json(j, "mini"), ValidationError);

  json k = minimal_scenario();
  k["loads"]["p_kw"]["2:b"] = {0.0, 0.0, 0.0, 0.0};
  CHECK_THROWS_AS(parse_scenario_json(k, "mini"), ValidationError);
}

TEST_CASE("scenario echo round-trips") {
  const Scenario sc = parse_scenario(kScenarioDir + "/example1.json");
  const auto echo = sc.to_json();
  const Scenario again = parse_scenario_json(echo, "example1");
  CHECK(again.to_json().dump() == echo.dump());

  // and the reparse materializes the same fleet
  const SimInputs a = materialize(sc);
  const SimInputs b = materialize(again);
  REQUIRE(a.evs.size() == b.evs.size());
  for (std::size_t i = 0; i < a.evs.size(); ++i) {
    CHECK(a.evs[i].battery_kwh == b.evs[i].battery_kwh);
    CHECK(a.evs[i].soc_init == b.evs[i].soc_init);
    CHECK(a.evs[i].soc_target == b.evs[i].soc_target);
  }
}

TEST_CASE("per-customer load mode sums onto supply points") {
  json j = minimal_scenario();
  j["loads"]["mode"] = "per_customer";
  j["loads"]["p_kw"] = {{"1", {1.0, 1.0, 1.0, 1.0}}, {"3", {2.0, 2.0, 2.0, 2.0}}};
  // customers 1,2,3 are assigned 1:a, 1:b, 1:c in supply-point order
  const Scenario sc = parse_scenario_json(j, "mini");
  const SimInputs in = materialize(sc);
  CHECK(in.loads.p_kw.at({1, Phase::A})(0) == 1.0);
  CHECK(in.loads.p_kw.at({1, Phase::C})(0) == 2.0);
  CHECK(in.loads.p_kw.count({1, Phase::B}) == 0);
}

TEST_CASE("emitted artifacts have the documented shapes") {
  json j = minimal_scenario();
  const Scenario sc = parse_scenario_json(j, "mini");
  SimInputs in = materialize(sc);
  const RunResult res = run(in, RunMode::benchmark);

  const std::string dir = (std::filesystem::temp_directory_path() / "evcoord_emit_test").string();
  std::filesystem::remove_all(dir);
  emit_results(res, in, dir);

  std::ifstream volts(dir + "/voltages.csv");
  REQUIRE(volts.good());
  std::string header;
  std::getline(volts, header);
  CHECK(header == "t,1:a,1:b,1:c");  // supply points in (node, phase) order
  int rows = 0;
  for (std::string line; std::getline(volts, line);) ++rows;
  CHECK(rows == in.T);

  std::ifstream bitmap(dir + "/comm_bitmap.csv");
  REQUIRE(bitmap.good());
  int ones = 0, lines = 0;
  for (std::string line; std::getline(bitmap, line);) {
    ++lines;
    for (char ch : line) {
      if (ch == '1') ++ones;
    }
  }
  CHECK(lines == res.S);
  CHECK(ones == res.S * res.N);  // benchmark bitmap is all ones

  std::ifstream profiles(dir + "/profiles.csv");
  REQUIRE(profiles.good());
  std::getline(profiles, header);
  CHECK(header == "t,p:1,q:1,p:2,q:2,p:3,q:3");  // customers ascending

  std::ifstream metrics(dir + "/metrics.json");
  REQUIRE(metrics.good());
  json m;
  metrics >> m;
  CHECK(m.at("mode") == "benchmark");
  CHECK(m.at("total_transmissions").get<long>() == res.total_transmissions);
  CHECK(m.at("communication_fraction").is_null());
  std::filesystem::remove_all(dir);
}

TEST_CASE("missing sections are all named in one error") {
  json j;
  j["name"] = "empty";
  try {
    parse_scenario_json(j, "empty");
    FAIL("expected ValidationError");
  } catch (const ValidationError& err) {
    CHECK(err.what() == doctest::Contains("grid"));
    CHECK(err.what() == doctest::Contains("loads"));
    CHECK(err.what() == doctest::Contains("ev"));
    CHECK(err.what() == doctest::Contains("algorithm"));
  }
}
