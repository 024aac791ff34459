#pragma once

// Shared fixture builders for the test suites: a small single-phase feeder, a
// three-phase two-node feeder, and reference EV parameter sets.

#include <Eigen/Dense>

#include "evcoord/ev.hpp"
#include "evcoord/grid.hpp"
#include "evcoord/local_problem.hpp"
#include "evcoord/sim.hpp"

namespace test_helpers {

using namespace evcoord;

inline GridSpec single_phase_grid() {
  GridSpec g;
  g.nodes = {{0, {Phase::A, Phase::B, Phase::C}}, {1, {Phase::A}}};
  g.root = 0;
  g.base_kv = 1.0;
  LineSegment e;
  e.from = 0;
  e.to = 1;
  e.phases = {Phase::A};
  e.z[0][0] = {0.13, 0.39};
  g.edges.push_back(e);
  return g;
}

inline GridSpec two_node_three_phase_grid(bool with_mutual = true) {
  GridSpec g;
  g.nodes = {{0, {Phase::A, Phase::B, Phase::C}}, {1, {Phase::A, Phase::B, Phase::C}}};
  g.root = 0;
  g.base_kv = 1.0;
  LineSegment e;
  e.from = 0;
  e.to = 1;
  e.phases = {Phase::A, Phase::B, Phase::C};
  e.z[0][0] = {0.1313, 0.3856};
  e.z[1][1] = {0.1278, 0.3969};
  e.z[2][2] = {0.1293, 0.3920};
  if (with_mutual) {
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        if (a != b) e.z[a][b] = {0.04, 0.09};
      }
    }
  }
  g.edges.push_back(e);
  return g;
}

inline EvParams basic_ev(int id, int T, double dt = 0.5) {
  EvParams ev;
  ev.id = id;
  ev.arrival = 0;
  ev.departure = T;
  ev.battery_kwh = 50.0;
  ev.inverter_kva = 12.0;
  ev.soc_init = 20.0;
  ev.soc_target = 24.0;
  ev.soc_min = 5.0;
  ev.soc_max = 48.0;
  ev.rate_max = 7.0;
  ev.rate_min = -7.0;
  ev.kappa = 1e-4;
  ev.price = Eigen::VectorXd::Constant(T, 0.2);
  ev.dt_hours = dt;
  return ev;
}

/// Small fully assembled instance on the given grid: one EV per listed supply
/// point, uniform band, complete communication graph.
inline SimInputs small_instance(GridSpec grid, const std::vector<SupplyPoint>& points, int T,
                                double band = 0.05, double c = 2.0, int iters = 30) {
  for (int i = 0; i < static_cast<int>(points.size()); ++i) {
    grid.customers[i + 1] = points[i];
  }
  SimInputs in;
  in.T = T;
  in.dt_hours = 0.5;
  in.grid = grid;
  in.sens = build_sensitivity(in.grid);
  LoadSeries loads;
  loads.T = T;
  in.loads = loads;
  const Eigen::VectorXd vtilde = baseline_voltage(in.grid, in.sens, in.loads);
  const double lo = (1.0 - band) * (1.0 - band) * grid.v0;
  const double hi = (1.0 + band) * (1.0 + band) * grid.v0;
  in.env = build_coupling(in.sens, vtilde, Eigen::VectorXd::Constant(vtilde.size(), lo),
                          Eigen::VectorXd::Constant(vtilde.size(), hi));
  for (int i = 0; i < static_cast<int>(points.size()); ++i) {
    in.evs.push_back(basic_ev(i + 1, T, in.dt_hours));
  }
  in.graph = CommGraph::complete(static_cast<int>(points.size()));
  in.algo.c = c;
  in.algo.iters = iters;
  in.algo.policy.enabled = false;
  in.algo.solver.eps_primal = 1e-7;
  in.algo.solver.eps_dual = 1e-7;
  return in;
}

/// Dense materialization of Psi = [Gamma Xi I] for independent recomputation.
inline Eigen::MatrixXd dense_psi(const SensitivityModel& sens, const VoltageEnvelope& env,
                                 int col, int T) {
  const int KT = sens.K() * T;
  Eigen::MatrixXd psi(2 * KT, 2 * T + 2 * KT);
  psi.leftCols(T) = env.gamma(sens, col);
  psi.middleCols(T, T) = env.xi(sens, col);
  psi.rightCols(2 * KT) = Eigen::MatrixXd::Identity(2 * KT, 2 * KT);
  return psi;
}

}  // namespace test_helpers
