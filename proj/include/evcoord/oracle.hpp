#pragma once

#include <Eigen/Dense>

#include "evcoord/qp.hpp"
#include "evcoord/sim.hpp"

namespace evcoord {

/// Centralized reference solution of the fleet problem on small instances.
struct CentralSolution {
  Eigen::MatrixXd p, q;  // T x N
  double objective = 0.0;
  bool converged = false;
  int iters = 0;
  double primal_res = 0.0;
  double dual_res = 0.0;
};

/// Solves the stacked problem directly: minimize the total operational cost
/// over all per-EV feasibility sets with the voltage band as a one-sided
/// coupling constraint.
CentralSolution solve_centralized(const SimInputs& inputs, const qp::Settings& settings);

/// Slack reformulation of the same problem: the coupling held as an equality
/// against an explicit nonnegative slack (per-EV slacks summed into one
/// aggregate, which preserves the optimal value).
CentralSolution solve_centralized_slack(const SimInputs& inputs, const qp::Settings& settings);

struct GapReport {
  double distributed_objective = 0.0;
  double centralized_objective = 0.0;
  double relative_gap = 0.0;            // |distributed - centralized| / max(|centralized|, eps)
  double max_coupling_violation = 0.0;  // of the distributed point, p.u.^2
  double final_consensus_residual = 0.0;
};

GapReport compare(const SimInputs& inputs, const RunResult& distributed,
                  const CentralSolution& centralized);

}  // namespace evcoord
