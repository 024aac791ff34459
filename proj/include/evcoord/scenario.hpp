#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "evcoord/sim.hpp"

namespace evcoord {

struct EvRanges {
  std::pair<double, double> battery_kwh{40.0, 60.0};
  std::pair<double, double> soc_init_frac{0.30, 0.50};
  std::pair<double, double> soc_target_frac{0.75, 0.90};
  std::pair<double, double> soc_min_frac{0.10, 0.10};
  std::pair<double, double> soc_max_frac{0.95, 0.95};
};

struct ExplicitEv {
  SupplyPoint supply_point;
  EvParams params;  // price left empty means "use the scenario price profile"
};

/// EV fleet description: either explicit per-EV parameters or per-supply-point
/// counts drawn from seeded uniform ranges.
struct EvConfig {
  std::map<SupplyPoint, int> counts;
  std::vector<ExplicitEv> explicit_evs;
  int arrival = 0;
  int departure = 0;  // 0 means the full horizon
  double inverter_kva = 12.0;
  double rate_max = 7.0;
  double rate_min = -7.0;
  double kappa = 1e-4;
  EvRanges ranges;
  Eigen::VectorXd price;  // $/kWh, length T
};

struct CommConfig {
  enum class Kind { complete, k_regular, edges };
  Kind kind = Kind::complete;
  int degree = 0;
  std::vector<std::pair<int, int>> edges;
};

/// Load section before resolution: series keyed either by supply point
/// ("1:a") or by customer id, depending on mode.
struct LoadsConfig {
  enum class Mode { per_supply_point, per_customer };
  Mode mode = Mode::per_supply_point;
  std::map<std::string, Eigen::VectorXd> p_kw;
  std::map<std::string, Eigen::VectorXd> q_kvar;
};

/// Parsed scenario file. Everything needed to materialize a SimInputs;
/// randomization happens at materialize() from the scenario seed.
struct Scenario {
  std::string name;
  std::uint64_t seed = 0;
  GridSpec grid;  // customer assignment filled during materialization
  double band_fraction = 0.05;
  int T = 0;
  double dt_hours = 0.5;
  LoadsConfig loads;
  EvConfig ev;
  CommConfig comm;
  AlgoConfig algo;
  std::string output_dir = "out";

  /// Canonical serialization; parse(to_json()) is equivalent to this scenario.
  nlohmann::ordered_json to_json() const;
};

/// Reads and validates a scenario file, reporting every problem found in one
/// ValidationError rather than stopping at the first.
Scenario parse_scenario(const std::string& path);
Scenario parse_scenario_json(const nlohmann::json& j, const std::string& source_name);

/// Builds the grid model, draws the EV fleet and the communication graph.
SimInputs materialize(const Scenario& scenario);

/// Writes voltages.csv, comm_bitmap.csv, profiles.csv and metrics.json under
/// dir. Voltages are emitted as magnitudes in p.u.
void emit_results(const RunResult& result, const SimInputs& inputs, const std::string& dir);

/// metrics.json content (kept separate so pairing tools can augment it).
nlohmann::ordered_json metrics_json(const RunResult& result, const SimInputs& inputs);

}  // namespace evcoord
