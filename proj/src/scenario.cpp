#include "evcoord/scenario.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

namespace evcoord {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

class ErrorSink {
public:
  void add(std::string msg) { errors_.push_back(std::move(msg)); }
  void merge(const ValidationError& err) {
    for (const auto& p : err.problems()) errors_.push_back(p);
  }
  bool ok() const { return errors_.empty(); }
  void finish() const {
    if (!errors_.empty()) throw ValidationError(errors_);
  }

private:
  std::vector<std::string> errors_;
};

bool require(const json& j, const char* key, const std::string& where, ErrorSink& sink) {
  if (!j.contains(key)) {
    sink.add(where + ": missing field '" + key + "'");
    return false;
  }
  return true;
}

double num_or(const json& j, const char* key, double fallback) {
  return j.contains(key) ? j.at(key).get<double>() : fallback;
}

int int_or(const json& j, const char* key, int fallback) {
  return j.contains(key) ? j.at(key).get<int>() : fallback;
}

bool bool_or(const json& j, const char* key, bool fallback) {
  return j.contains(key) ? j.at(key).get<bool>() : fallback;
}

Eigen::VectorXd vector_from(const json& arr) {
  Eigen::VectorXd v(arr.size());
  Eigen::Index i = 0;
  for (const auto& x : arr) v(i++) = x.get<double>();
  return v;
}

std::vector<Phase> phases_from_string(const std::string& s, const std::string& where,
                                      ErrorSink& sink) {
  std::vector<Phase> out;
  for (char c : s) {
    try {
      const Phase p = phase_from_char(c);
      if (std::find(out.begin(), out.end(), p) != out.end()) {
        sink.add(where + ": repeated phase '" + c + "'");
      } else {
        out.push_back(p);
      }
    } catch (const InvalidQueryError& e) {
      sink.add(where + ": " + e.what());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string phases_to_string(const std::vector<Phase>& phases) {
  std::string s;
  for (Phase p : phases) s += phase_to_char(p);
  return s;
}

void parse_grid(const json& j, Scenario& sc, ErrorSink& sink) {
  if (!j.is_object()) {
    sink.add("grid: expected an object");
    return;
  }
  sc.grid.base_kv = num_or(j, "base_kv", 1.0);
  sc.grid.base_kva = num_or(j, "base_kva", 1000.0);
  sc.grid.v0 = num_or(j, "v0_pu2", 1.0);
  sc.band_fraction = num_or(j, "band_fraction", 0.05);
  if (sc.grid.base_kv <= 0.0) sink.add("grid: base_kv must be positive");
  if (!(sc.band_fraction > 0.0 && sc.band_fraction < 1.0)) {
    sink.add("grid: band_fraction must lie in (0,1)");
  }

  if (require(j, "nodes", "grid", sink)) {
    for (const auto& nj : j.at("nodes")) {
      GridNode node;
      node.id = int_or(nj, "id", -1);
      if (node.id < 0) sink.add("grid node: missing or negative id");
      node.phases = phases_from_string(nj.value("phases", std::string{}),
                                       "grid node " + std::to_string(node.id), sink);
      sc.grid.nodes.push_back(std::move(node));
    }
  }
  sc.grid.root = int_or(j, "root", 0);

  if (require(j, "edges", "grid", sink)) {
    for (const auto& ej : j.at("edges")) {
      LineSegment e;
      e.from = int_or(ej, "from", -1);
      e.to = int_or(ej, "to", -1);
      const std::string where = "grid edge (" + std::to_string(e.from) + "," +
                                std::to_string(e.to) + ")";
      e.phases = phases_from_string(ej.value("phases", std::string{}), where, sink);
      if (ej.contains("z_ohm") && ej.at("z_ohm").is_object()) {
        std::set<std::pair<int, int>> given;
        for (const auto& [key, val] : ej.at("z_ohm").items()) {
          if (key.size() != 2 || !val.is_array() || val.size() != 2) {
            sink.add(where + ": z_ohm entries must map a phase pair to [r, x]");
            continue;
          }
          try {
            const int a = static_cast<int>(phase_from_char(key[0]));
            const int b = static_cast<int>(phase_from_char(key[1]));
            e.z[a][b] = {val[0].get<double>(), val[1].get<double>()};
            given.insert({a, b});
          } catch (const InvalidQueryError& err) {
            sink.add(where + ": " + err.what());
          }
        }
        // unspecified transposed pairs default to the given value (symmetric line)
        for (const auto& [a, b] : given) {
          if (a != b && !given.count({b, a})) e.z[b][a] = e.z[a][b];
        }
      } else {
        sink.add(where + ": missing z_ohm");
      }
      sc.grid.edges.push_back(std::move(e));
    }
  }

  try {
    sc.grid.validate();
  } catch (const ValidationError& err) {
    sink.merge(err);
  }
}

void parse_loads(const json& j, Scenario& sc, ErrorSink& sink) {
  if (!j.is_object()) {
    sink.add("loads: expected an object");
    return;
  }
  sc.T = int_or(j, "T", 0);
  sc.dt_hours = num_or(j, "dt_hours", 0.5);
  if (sc.T <= 0) sink.add("loads: T must be a positive integer");
  if (sc.dt_hours <= 0.0) sink.add("loads: dt_hours must be positive");

  const std::string mode = j.value("mode", std::string("per_supply_point"));
  if (mode == "per_supply_point") {
    sc.loads.mode = LoadsConfig::Mode::per_supply_point;
  } else if (mode == "per_customer") {
    sc.loads.mode = LoadsConfig::Mode::per_customer;
  } else {
    sink.add("loads: unknown mode '" + mode + "'");
  }

  auto read_map = [&](const char* key, std::map<std::string, Eigen::VectorXd>& out) {
    if (!j.contains(key)) return;
    for (const auto& [k, arr] : j.at(key).items()) {
      if (!arr.is_array()) {
        sink.add(std::string("loads.") + key + "[" + k + "]: expected an array");
        continue;
      }
      Eigen::VectorXd v = vector_from(arr);
      if (sc.T > 0 && v.size() != sc.T) {
        sink.add(std::string("loads.") + key + "[" + k + "]: length " +
                 std::to_string(v.size()) + " does not match T=" + std::to_string(sc.T));
      }
      out[k] = std::move(v);
    }
  };
  read_map("p_kw", sc.loads.p_kw);
  read_map("q_kvar", sc.loads.q_kvar);
}

void parse_ev(const json& j, Scenario& sc, ErrorSink& sink) {
  if (!j.is_object()) {
    sink.add("ev: expected an object");
    return;
  }
  EvConfig& ev = sc.ev;
  ev.arrival = int_or(j, "arrival", 0);
  ev.departure = int_or(j, "departure", 0);
  ev.inverter_kva = num_or(j, "inverter_kva", 12.0);
  ev.rate_max = num_or(j, "rate_max", 7.0);
  ev.rate_min = num_or(j, "rate_min", -7.0);
  ev.kappa = num_or(j, "kappa", 1e-4);

  if (j.contains("counts")) {
    for (const auto& [k, v] : j.at("counts").items()) {
      try {
        const SupplyPoint sp = supply_point_from_string(k);
        const int count = v.get<int>();
        if (count < 0) {
          sink.add("ev.counts[" + k + "]: negative count");
        } else {
          ev.counts[sp] = count;
        }
      } catch (const InvalidQueryError& err) {
        sink.add(std::string("ev.counts: ") + err.what());
      }
    }
  }

  if (j.contains("explicit")) {
    for (const auto& ej : j.at("explicit")) {
      ExplicitEv ex;
      const int id = int_or(ej, "id", -1);
      ex.params.id = id;
      const std::string where = "ev.explicit id " + std::to_string(id);
      if (!ej.contains("supply_point")) {
        sink.add(where + ": missing supply_point");
      } else {
        try {
          ex.supply_point = supply_point_from_string(ej.at("supply_point").get<std::string>());
        } catch (const InvalidQueryError& err) {
          sink.add(where + ": " + err.what());
        }
      }
      ex.params.arrival = int_or(ej, "arrival", ev.arrival);
      ex.params.departure = int_or(ej, "departure", ev.departure);
      ex.params.battery_kwh = num_or(ej, "battery_kwh", 0.0);
      ex.params.inverter_kva = num_or(ej, "inverter_kva", ev.inverter_kva);
      ex.params.soc_init = num_or(ej, "soc_init", 0.0);
      ex.params.soc_target = num_or(ej, "soc_target", 0.0);
      ex.params.soc_min = num_or(ej, "soc_min", 0.0);
      ex.params.soc_max = num_or(ej, "soc_max", 0.0);
      ex.params.rate_max = num_or(ej, "rate_max", ev.rate_max);
      ex.params.rate_min = num_or(ej, "rate_min", ev.rate_min);
      ex.params.kappa = num_or(ej, "kappa", ev.kappa);
      if (ej.contains("price")) ex.params.price = vector_from(ej.at("price"));
      ev.explicit_evs.push_back(std::move(ex));
    }
  }

  if (j.contains("ranges")) {
    const json& r = j.at("ranges");
    auto read_range = [&](const char* key, std::pair<double, double>& out) {
      if (!r.contains(key)) return;
      const auto& arr = r.at(key);
      if (!arr.is_array() || arr.size() != 2) {
        sink.add(std::string("ev.ranges.") + key + ": expected [lo, hi]");
        return;
      }
      out = {arr[0].get<double>(), arr[1].get<double>()};
      if (out.first > out.second) {
        sink.add(std::string("ev.ranges.") + key + ": lo exceeds hi");
      }
    };
    read_range("battery_kwh", ev.ranges.battery_kwh);
    read_range("soc_init_frac", ev.ranges.soc_init_frac);
    read_range("soc_target_frac", ev.ranges.soc_target_frac);
    read_range("soc_min_frac", ev.ranges.soc_min_frac);
    read_range("soc_max_frac", ev.ranges.soc_max_frac);
  }

  if (require(j, "price", "ev", sink)) {
    const json& pj = j.at("price");
    if (pj.is_array()) {
      ev.price = vector_from(pj);
    } else if (pj.is_object() && pj.value("kind", "") == std::string("flat")) {
      if (sc.T > 0) ev.price = Eigen::VectorXd::Constant(sc.T, num_or(pj, "value", 0.0));
    } else {
      sink.add("ev.price: expected an array or {kind: flat, value}");
    }
  }
  if (sc.T > 0 && ev.price.size() > 0 && ev.price.size() != sc.T) {
    sink.add("ev.price: length " + std::to_string(ev.price.size()) + " does not match T=" +
             std::to_string(sc.T));
  }
}

void parse_comm(const json& j, Scenario& sc, ErrorSink& sink) {
  if (!j.is_object()) {
    sink.add("comm: expected an object");
    return;
  }
  const std::string kind = j.value("kind", std::string("complete"));
  if (kind == "complete") {
    sc.comm.kind = CommConfig::Kind::complete;
  } else if (kind == "k_regular") {
    sc.comm.kind = CommConfig::Kind::k_regular;
    sc.comm.degree = int_or(j, "degree", 0);
    if (sc.comm.degree < 1) sink.add("comm: k_regular requires degree >= 1");
  } else if (kind == "edges") {
    sc.comm.kind = CommConfig::Kind::edges;
    if (require(j, "edges", "comm", sink)) {
      for (const auto& ej : j.at("edges")) {
        if (!ej.is_array() || ej.size() != 2) {
          sink.add("comm.edges: entries must be [u, v]");
          continue;
        }
        sc.comm.edges.push_back({ej[0].get<int>(), ej[1].get<int>()});
      }
    }
  } else {
    sink.add("comm: unknown kind '" + kind + "'");
  }
}

void parse_algorithm(const json& j, Scenario& sc, ErrorSink& sink) {
  if (!j.is_object()) {
    sink.add("algorithm: expected an object");
    return;
  }
  AlgoConfig& a = sc.algo;
  a.c = num_or(j, "c", 100.0);
  a.iters = int_or(j, "iters", 30);
  a.policy.gamma = num_or(j, "gamma", 1.0);
  a.policy.epsilon = num_or(j, "epsilon", 0.5);
  a.policy.enabled = bool_or(j, "censoring", true);
  a.threads = int_or(j, "threads", 0);
  a.record_trajectory = bool_or(j, "record_trajectory", false);
  // unit of the consensus layer: named ("pu2", "volts2") or a raw number of
  // squared volts per p.u.^2
  if (j.contains("voltage_scale")) {
    a.unit_scale = j.at("voltage_scale").get<double>();
    if (a.unit_scale <= 0.0) sink.add("algorithm: voltage_scale must be positive");
  } else {
    const std::string unit = j.value("voltage_unit", std::string("pu2"));
    if (unit == "pu2") {
      a.unit_scale = 1.0;
    } else if (unit == "volts2") {
      a.unit_scale = -1.0;  // sentinel: (1000 base_kv)^2, filled in materialize
    } else {
      sink.add("algorithm: voltage_unit must be 'pu2' or 'volts2'");
    }
  }
  if (a.c <= 0.0) sink.add("algorithm: stepsize c must be positive");
  if (a.iters < 1) sink.add("algorithm: iters must be at least 1");
  try {
    a.policy.validate();  // gamma/epsilon ranges hold even when censoring is off
  } catch (const ValidationError& err) {
    sink.merge(err);
  }
  if (j.contains("solver")) {
    const json& s = j.at("solver");
    a.solver.eps_primal = num_or(s, "eps_primal", a.solver.eps_primal);
    a.solver.eps_dual = num_or(s, "eps_dual", a.solver.eps_dual);
    a.solver.max_iters = int_or(s, "max_iters", a.solver.max_iters);
    a.solver.warm_start = bool_or(s, "warm_start", a.solver.warm_start);
    a.solver.rho = num_or(s, "rho", a.solver.rho);
    a.solver.sigma = num_or(s, "sigma", a.solver.sigma);
    a.solver.adaptive_rho = bool_or(s, "adaptive_rho", a.solver.adaptive_rho);
    try {
      a.solver.validate();
    } catch (const ValidationError& err) {
      sink.merge(err);
    }
  }
}

int total_ev_count(const Scenario& sc) {
  int n = static_cast<int>(sc.ev.explicit_evs.size());
  for (const auto& [sp, count] : sc.ev.counts) n += count;
  return n;
}

void cross_checks(Scenario& sc, ErrorSink& sink) {
  // fill flat defaults that needed T
  if (sc.ev.departure == 0) sc.ev.departure = sc.T;

  if (!sc.ev.explicit_evs.empty() && !sc.ev.counts.empty()) {
    sink.add("ev: give either explicit EVs or randomized counts, not both");
  }

  for (const auto& [sp, count] : sc.ev.counts) {
    if (!sc.grid.node_has_phase(sp.node, sp.phase)) {
      sink.add("ev.counts: supply point " + to_string(sp) + " does not exist in the grid");
    }
  }
  for (auto& ex : sc.ev.explicit_evs) {
    if (ex.params.departure == 0) ex.params.departure = sc.T;
    if (!sc.grid.node_has_phase(ex.supply_point.node, ex.supply_point.phase)) {
      sink.add("ev.explicit id " + std::to_string(ex.params.id) + ": supply point " +
               to_string(ex.supply_point) + " does not exist in the grid");
    }
    EvParams probe = ex.params;
    if (probe.price.size() == 0) probe.price = sc.ev.price;
    probe.dt_hours = sc.dt_hours;
    try {
      probe.validate(sc.T);
    } catch (const InfeasibleParamsError& err) {
      sink.merge(err);
    }
  }

  if (!sc.ev.counts.empty()) {
    const auto& r = sc.ev.ranges;
    if (r.soc_min_frac.second > std::min(r.soc_init_frac.first, r.soc_target_frac.first)) {
      sink.add("ev.ranges: soc_min_frac may exceed a drawn initial or target SoC");
    }
    if (std::max(r.soc_init_frac.second, r.soc_target_frac.second) > r.soc_max_frac.first) {
      sink.add("ev.ranges: a drawn initial or target SoC may exceed soc_max_frac");
    }
    // worst-case draw must still reach the target before departure
    const double worst_gap =
        r.battery_kwh.second * (r.soc_target_frac.second - r.soc_init_frac.first);
    const int window = sc.ev.departure - sc.ev.arrival;
    if (worst_gap > sc.dt_hours * window * sc.ev.rate_max + 1e-12) {
      sink.add("ev.ranges: target SoC can be unreachable before departure for extreme draws");
    }
  }

  const int n = total_ev_count(sc);
  if (sc.comm.kind == CommConfig::Kind::k_regular && n > 0) {
    if (sc.comm.degree >= n) {
      sink.add("comm: k_regular degree must be below the number of EVs");
    } else if ((static_cast<long>(n) * sc.comm.degree) % 2 != 0) {
      sink.add("comm: n * degree must be even for a k-regular graph");
    }
  }
  if (sc.comm.kind == CommConfig::Kind::edges && n > 0) {
    try {
      CommGraph g = CommGraph::from_edges(n, sc.comm.edges);
      g.validate();
    } catch (const ValidationError& err) {
      sink.merge(err);
    }
  }

  if (sc.loads.mode == LoadsConfig::Mode::per_supply_point) {
    for (const auto& [key, _] : sc.loads.p_kw) {
      try {
        const SupplyPoint sp = supply_point_from_string(key);
        if (!sc.grid.node_has_phase(sp.node, sp.phase) || sp.node == sc.grid.root) {
          sink.add("loads.p_kw[" + key + "]: unknown supply point");
        }
      } catch (const InvalidQueryError& err) {
        sink.add("loads.p_kw[" + key + "]: " + err.what());
      }
    }
  }
}

}  // namespace

Scenario parse_scenario_json(const json& j, const std::string& source_name) {
  ErrorSink sink;
  Scenario sc;
  sc.name = j.value("name", source_name);
  if (j.contains("seed")) sc.seed = j.at("seed").get<std::uint64_t>();

  if (require(j, "grid", source_name, sink)) parse_grid(j.at("grid"), sc, sink);
  if (require(j, "loads", source_name, sink)) parse_loads(j.at("loads"), sc, sink);
  if (require(j, "ev", source_name, sink)) parse_ev(j.at("ev"), sc, sink);
  if (j.contains("comm")) parse_comm(j.at("comm"), sc, sink);
  if (require(j, "algorithm", source_name, sink)) parse_algorithm(j.at("algorithm"), sc, sink);
  if (j.contains("output") && j.at("output").is_object()) {
    sc.output_dir = j.at("output").value("dir", sc.output_dir);
  }

  if (sink.ok()) cross_checks(sc, sink);
  sink.finish();
  return sc;
}

Scenario parse_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scenario file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& err) {
    throw ValidationError("scenario '" + path + "' is not valid JSON: " + err.what());
  }
  return parse_scenario_json(j, std::filesystem::path(path).stem().string());
}

SimInputs materialize(const Scenario& scenario) {
  ErrorSink sink;
  SimInputs inputs;
  inputs.T = scenario.T;
  inputs.dt_hours = scenario.dt_hours;
  inputs.grid = scenario.grid;
  inputs.grid.customers.clear();
  inputs.algo = scenario.algo;
  if (inputs.algo.unit_scale < 0.0) {
    const double base_v = 1000.0 * scenario.grid.base_kv;
    inputs.algo.unit_scale = base_v * base_v;
  }

  // fleet: explicit parameters, or seeded draws grouped by supply point
  if (!scenario.ev.explicit_evs.empty()) {
    for (const auto& ex : scenario.ev.explicit_evs) {
      EvParams params = ex.params;
      if (params.price.size() == 0) params.price = scenario.ev.price;
      params.dt_hours = scenario.dt_hours;
      if (inputs.grid.customers.count(params.id)) {
        sink.add("duplicate customer id " + std::to_string(params.id));
        continue;
      }
      inputs.grid.customers[params.id] = ex.supply_point;
      inputs.evs.push_back(std::move(params));
    }
    std::sort(inputs.evs.begin(), inputs.evs.end(),
              [](const EvParams& a, const EvParams& b) { return a.id < b.id; });
  } else {
    std::mt19937_64 rng(split_seed(scenario.seed, seed_role::ev_params));
    const auto& r = scenario.ev.ranges;
    auto draw = [&rng](const std::pair<double, double>& range) {
      return std::uniform_real_distribution<double>(range.first, range.second)(rng);
    };
    int next_id = 1;
    for (const auto& [sp, count] : scenario.ev.counts) {
      for (int i = 0; i < count; ++i) {
        EvParams params;
        params.id = next_id++;
        params.arrival = scenario.ev.arrival;
        params.departure = scenario.ev.departure;
        params.inverter_kva = scenario.ev.inverter_kva;
        params.rate_max = scenario.ev.rate_max;
        params.rate_min = scenario.ev.rate_min;
        params.kappa = scenario.ev.kappa;
        params.battery_kwh = draw(r.battery_kwh);
        params.soc_init = draw(r.soc_init_frac) * params.battery_kwh;
        params.soc_target = draw(r.soc_target_frac) * params.battery_kwh;
        params.soc_min = draw(r.soc_min_frac) * params.battery_kwh;
        params.soc_max = draw(r.soc_max_frac) * params.battery_kwh;
        params.price = scenario.ev.price;
        params.dt_hours = scenario.dt_hours;
        inputs.grid.customers[params.id] = sp;
        inputs.evs.push_back(std::move(params));
      }
    }
  }

  for (const auto& ev : inputs.evs) {
    try {
      ev.validate(inputs.T);
    } catch (const InfeasibleParamsError& err) {
      sink.merge(err);
    }
  }
  sink.finish();

  inputs.sens = build_sensitivity(inputs.grid);

  // resolve loads onto supply points
  LoadSeries loads;
  loads.T = inputs.T;
  auto resolve = [&](const std::map<std::string, Eigen::VectorXd>& raw,
                     std::map<SupplyPoint, Eigen::VectorXd>& out) {
    for (const auto& [key, series] : raw) {
      SupplyPoint sp;
      if (scenario.loads.mode == LoadsConfig::Mode::per_supply_point) {
        sp = supply_point_from_string(key);
      } else {
        const int cust = std::stoi(key);
        const auto it = inputs.grid.customers.find(cust);
        if (it == inputs.grid.customers.end()) {
          throw ValidationError("loads reference unknown customer id " + key);
        }
        sp = it->second;
      }
      auto [it, inserted] = out.try_emplace(sp, series);
      if (!inserted) it->second += series;
    }
  };
  resolve(scenario.loads.p_kw, loads.p_kw);
  resolve(scenario.loads.q_kvar, loads.q_kvar);
  inputs.loads = std::move(loads);

  const Eigen::VectorXd vtilde = baseline_voltage(inputs.grid, inputs.sens, inputs.loads);
  const double f = scenario.band_fraction;
  const double lo = (1.0 - f) * (1.0 - f) * inputs.grid.v0;
  const double hi = (1.0 + f) * (1.0 + f) * inputs.grid.v0;
  inputs.env = build_coupling(inputs.sens, vtilde,
                              Eigen::VectorXd::Constant(vtilde.size(), lo),
                              Eigen::VectorXd::Constant(vtilde.size(), hi));

  const int n = static_cast<int>(inputs.evs.size());
  switch (scenario.comm.kind) {
    case CommConfig::Kind::complete:
      inputs.graph = CommGraph::complete(n);
      break;
    case CommConfig::Kind::k_regular:
      inputs.graph = CommGraph::k_regular_random(n, scenario.comm.degree,
                                                 split_seed(scenario.seed, seed_role::comm_graph));
      break;
    case CommConfig::Kind::edges:
      inputs.graph = CommGraph::from_edges(n, scenario.comm.edges);
      break;
  }

  return inputs;
}

nlohmann::ordered_json Scenario::to_json() const {
  ordered_json j;
  j["name"] = name;
  j["seed"] = seed;

  ordered_json gj;
  gj["base_kv"] = grid.base_kv;
  gj["base_kva"] = grid.base_kva;
  gj["v0_pu2"] = grid.v0;
  gj["band_fraction"] = band_fraction;
  gj["root"] = grid.root;
  gj["nodes"] = ordered_json::array();
  for (const auto& n : grid.nodes) {
    gj["nodes"].push_back({{"id", n.id}, {"phases", phases_to_string(n.phases)}});
  }
  gj["edges"] = ordered_json::array();
  for (const auto& e : grid.edges) {
    ordered_json ej;
    ej["from"] = e.from;
    ej["to"] = e.to;
    ej["phases"] = phases_to_string(e.phases);
    ordered_json zj;
    for (Phase a : e.phases) {
      for (Phase b : e.phases) {
        const auto z = e.z[static_cast<int>(a)][static_cast<int>(b)];
        zj[std::string{phase_to_char(a), phase_to_char(b)}] = {z.real(), z.imag()};
      }
    }
    ej["z_ohm"] = std::move(zj);
    gj["edges"].push_back(std::move(ej));
  }
  j["grid"] = std::move(gj);

  ordered_json lj;
  lj["T"] = T;
  lj["dt_hours"] = dt_hours;
  lj["mode"] =
      loads.mode == LoadsConfig::Mode::per_supply_point ? "per_supply_point" : "per_customer";
  auto series_map = [](const std::map<std::string, Eigen::VectorXd>& m) {
    ordered_json out = ordered_json::object();
    for (const auto& [k, v] : m) {
      out[k] = std::vector<double>(v.data(), v.data() + v.size());
    }
    return out;
  };
  lj["p_kw"] = series_map(loads.p_kw);
  lj["q_kvar"] = series_map(loads.q_kvar);
  j["loads"] = std::move(lj);

  ordered_json evj;
  if (!ev.counts.empty()) {
    ordered_json counts = ordered_json::object();
    for (const auto& [sp, c] : ev.counts) counts[to_string(sp)] = c;
    evj["counts"] = std::move(counts);
  }
  if (!ev.explicit_evs.empty()) {
    ordered_json arr = ordered_json::array();
    for (const auto& ex : ev.explicit_evs) {
      ordered_json e;
      e["id"] = ex.params.id;
      e["supply_point"] = to_string(ex.supply_point);
      e["arrival"] = ex.params.arrival;
      e["departure"] = ex.params.departure;
      e["battery_kwh"] = ex.params.battery_kwh;
      e["inverter_kva"] = ex.params.inverter_kva;
      e["soc_init"] = ex.params.soc_init;
      e["soc_target"] = ex.params.soc_target;
      e["soc_min"] = ex.params.soc_min;
      e["soc_max"] = ex.params.soc_max;
      e["rate_max"] = ex.params.rate_max;
      e["rate_min"] = ex.params.rate_min;
      e["kappa"] = ex.params.kappa;
      if (ex.params.price.size() > 0) {
        e["price"] =
            std::vector<double>(ex.params.price.data(), ex.params.price.data() + ex.params.price.size());
      }
      arr.push_back(std::move(e));
    }
    evj["explicit"] = std::move(arr);
  }
  evj["arrival"] = ev.arrival;
  evj["departure"] = ev.departure;
  evj["inverter_kva"] = ev.inverter_kva;
  evj["rate_max"] = ev.rate_max;
  evj["rate_min"] = ev.rate_min;
  evj["kappa"] = ev.kappa;
  if (!ev.counts.empty()) {
    ordered_json rj;
    auto range = [](const std::pair<double, double>& p) {
      return ordered_json::array({p.first, p.second});
    };
    rj["battery_kwh"] = range(ev.ranges.battery_kwh);
    rj["soc_init_frac"] = range(ev.ranges.soc_init_frac);
    rj["soc_target_frac"] = range(ev.ranges.soc_target_frac);
    rj["soc_min_frac"] = range(ev.ranges.soc_min_frac);
    rj["soc_max_frac"] = range(ev.ranges.soc_max_frac);
    evj["ranges"] = std::move(rj);
  }
  evj["price"] = std::vector<double>(ev.price.data(), ev.price.data() + ev.price.size());
  j["ev"] = std::move(evj);

  ordered_json cj;
  switch (comm.kind) {
    case CommConfig::Kind::complete:
      cj["kind"] = "complete";
      break;
    case CommConfig::Kind::k_regular:
      cj["kind"] = "k_regular";
      cj["degree"] = comm.degree;
      break;
    case CommConfig::Kind::edges: {
      cj["kind"] = "edges";
      ordered_json arr = ordered_json::array();
      for (const auto& [u, v] : comm.edges) arr.push_back({u, v});
      cj["edges"] = std::move(arr);
      break;
    }
  }
  j["comm"] = std::move(cj);

  ordered_json aj;
  aj["c"] = algo.c;
  aj["iters"] = algo.iters;
  aj["gamma"] = algo.policy.gamma;
  aj["epsilon"] = algo.policy.epsilon;
  aj["censoring"] = algo.policy.enabled;
  if (algo.unit_scale == 1.0) {
    aj["voltage_unit"] = "pu2";
  } else if (algo.unit_scale < 0.0) {
    aj["voltage_unit"] = "volts2";
  } else {
    aj["voltage_scale"] = algo.unit_scale;
  }
  aj["threads"] = algo.threads;
  aj["record_trajectory"] = algo.record_trajectory;
  ordered_json sj;
  sj["eps_primal"] = algo.solver.eps_primal;
  sj["eps_dual"] = algo.solver.eps_dual;
  sj["max_iters"] = algo.solver.max_iters;
  sj["warm_start"] = algo.solver.warm_start;
  sj["rho"] = algo.solver.rho;
  sj["sigma"] = algo.solver.sigma;
  sj["adaptive_rho"] = algo.solver.adaptive_rho;
  aj["solver"] = std::move(sj);
  j["algorithm"] = std::move(aj);

  j["output"] = {{"dir", output_dir}};
  return j;
}

namespace {

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", x);
  return buf;
}

}  // namespace

nlohmann::ordered_json metrics_json(const RunResult& result, const SimInputs& inputs) {
  ordered_json j;
  j["mode"] = result.mode == RunMode::benchmark ? "benchmark" : "censored";
  j["agents"] = result.N;
  j["iterations"] = result.S;
  j["stepsize_c"] = inputs.algo.c;
  j["gamma"] = inputs.algo.policy.gamma;
  j["epsilon"] = inputs.algo.policy.epsilon;
  j["censoring"] = result.mode == RunMode::censored && inputs.algo.policy.enabled;
  j["total_transmissions"] = result.total_transmissions;
  j["transmissions_per_iteration"] = result.transmissions_per_iteration;
  j["communication_fraction"] = nullptr;  // filled when paired against a benchmark run
  j["objective"] = result.objective;
  j["consensus_residuals"] = result.consensus_residual;
  j["non_converged_solves"] = result.non_converged_solves;
  if (result.voltage.size() > 0) {
    j["voltage_min_pu"] = std::sqrt(result.voltage.minCoeff());
    j["voltage_max_pu"] = std::sqrt(result.voltage.maxCoeff());
  }
  j["wall_seconds"] = result.wall_seconds;
  return j;
}

void emit_results(const RunResult& result, const SimInputs& inputs, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + dir + "'");

  const int K = inputs.sens.K();
  const int T = inputs.T;

  {
    std::ofstream out(fs::path(dir) / "voltages.csv");
    if (!out) throw std::runtime_error("cannot write voltages.csv");
    out << "t";
    for (const auto& sp : inputs.sens.points) out << "," << to_string(sp);
    out << "\n";
    for (int t = 0; t < T; ++t) {
      out << (t + 1);
      for (int k = 0; k < K; ++k) {
        out << "," << fmt_double(std::sqrt(result.voltage(static_cast<Eigen::Index>(t) * K + k)));
      }
      out << "\n";
    }
  }

  {
    std::ofstream out(fs::path(dir) / "comm_bitmap.csv");
    if (!out) throw std::runtime_error("cannot write comm_bitmap.csv");
    for (const auto& row : result.bitmap) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out << ",";
        out << static_cast<int>(row[i]);
      }
      out << "\n";
    }
  }

  {
    std::ofstream out(fs::path(dir) / "profiles.csv");
    if (!out) throw std::runtime_error("cannot write profiles.csv");
    out << "t";
    for (const auto& ev : inputs.evs) out << ",p:" << ev.id << ",q:" << ev.id;
    out << "\n";
    for (int t = 0; t < T; ++t) {
      out << (t + 1);
      for (int n = 0; n < result.N; ++n) {
        out << "," << fmt_double(result.p_final(t, n)) << "," << fmt_double(result.q_final(t, n));
      }
      out << "\n";
    }
  }

  {
    std::ofstream out(fs::path(dir) / "metrics.json");
    if (!out) throw std::runtime_error("cannot write metrics.json");
    out << metrics_json(result, inputs).dump(2) << "\n";
  }
}

}  // namespace evcoord
