#include "evcoord/oracle.hpp"

#include <cmath>
#include <limits>

namespace evcoord {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct StackedPieces {
  Eigen::MatrixXd P, A;
  Eigen::VectorXd g;
  qp::ConeSpec cone;
  int T = 0, N = 0, KT = 0;
};

// Stacked decision vector [p_1; q_1; ...; p_N; q_N] (+ slack when with_slack).
// Rows: per-EV polyhedra, per-EV per-slot discs, the 2KT coupling rows, and
// the slack nonnegativity block in the slack form.
StackedPieces build_stacked(const SimInputs& inputs, bool with_slack) {
  const int N = static_cast<int>(inputs.evs.size());
  const int T = inputs.T;
  const int K = inputs.sens.K();
  const int KT = K * T;
  const int frows = 8 * T + 1;

  StackedPieces out;
  out.T = T;
  out.N = N;
  out.KT = KT;

  const int nvar = 2 * T * N + (with_slack ? 2 * KT : 0);
  const int ncon = N * frows + 2 * T * N + 2 * KT + (with_slack ? 2 * KT : 0);

  out.P = Eigen::MatrixXd::Zero(nvar, nvar);
  out.g = Eigen::VectorXd::Zero(nvar);
  out.A = Eigen::MatrixXd::Zero(ncon, nvar);
  out.cone.lo = Eigen::VectorXd::Constant(ncon, -kInf);
  out.cone.hi = Eigen::VectorXd::Constant(ncon, kInf);

  int row = 0;
  std::vector<EvFeasibility> feas;
  feas.reserve(N);
  for (int n = 0; n < N; ++n) {
    feas.push_back(build_feasibility(inputs.evs[n], T));
    const int col = 2 * T * n;
    out.A.block(row, col, frows, 2 * T) = feas[n].F;
    out.cone.lo.segment(row, frows) = feas[n].f;
    row += frows;

    out.P.block(col, col, T, T).diagonal().setConstant(2.0 * inputs.evs[n].kappa);
    out.g.segment(col, T) = inputs.evs[n].dt_hours * inputs.evs[n].price;
  }

  for (int n = 0; n < N; ++n) {
    const int col = 2 * T * n;
    for (int t = 0; t < T; ++t) {
      out.A(row, col + t) = 1.0;
      out.A(row + 1, col + T + t) = 1.0;
      out.cone.discs.push_back({row, row + 1, feas[n].disc_radius});
      row += 2;
    }
  }

  const int couple = row;
  for (int n = 0; n < N; ++n) {
    const int evcol = inputs.sens.customer_column(inputs.evs[n].id);
    const int col = 2 * T * n;
    for (int t = 0; t < T; ++t) {
      for (int k = 0; k < K; ++k) {
        const double dv = inputs.sens.D(k, evcol);
        const double ev = inputs.sens.E(k, evcol);
        out.A(couple + t * K + k, col + t) += dv;
        out.A(couple + KT + t * K + k, col + t) -= dv;
        out.A(couple + t * K + k, col + T + t) += ev;
        out.A(couple + KT + t * K + k, col + T + t) -= ev;
      }
    }
  }
  if (with_slack) {
    const int scol = 2 * T * N;
    out.A.block(couple, scol, 2 * KT, 2 * KT).setIdentity();
    out.cone.lo.segment(couple, 2 * KT) = inputs.env.w;
    out.cone.hi.segment(couple, 2 * KT) = inputs.env.w;  // equality against the slack
    row = couple + 2 * KT;
    out.A.block(row, scol, 2 * KT, 2 * KT).setIdentity();
    out.cone.lo.segment(row, 2 * KT).setZero();
  } else {
    out.cone.hi.segment(couple, 2 * KT) = inputs.env.w;
  }

  return out;
}

CentralSolution run_stacked(const SimInputs& inputs, const qp::Settings& settings,
                            bool with_slack) {
  if (inputs.evs.empty()) {
    CentralSolution sol;
    sol.p = Eigen::MatrixXd::Zero(inputs.T, 0);
    sol.q = Eigen::MatrixXd::Zero(inputs.T, 0);
    sol.converged = true;
    return sol;
  }

  StackedPieces pieces = build_stacked(inputs, with_slack);
  qp::DenseProblem problem(std::move(pieces.P), pieces.g, std::move(pieces.A),
                           std::move(pieces.cone));
  const qp::Result res = qp::solve(problem, settings, nullptr);

  CentralSolution sol;
  sol.p.resize(pieces.T, pieces.N);
  sol.q.resize(pieces.T, pieces.N);
  for (int n = 0; n < pieces.N; ++n) {
    sol.p.col(n) = res.x.segment(2 * pieces.T * n, pieces.T);
    sol.q.col(n) = res.x.segment(2 * pieces.T * n + pieces.T, pieces.T);
  }
  sol.converged = res.converged;
  sol.iters = res.iters;
  sol.primal_res = res.primal_res;
  sol.dual_res = res.dual_res;
  sol.objective = 0.0;
  for (int n = 0; n < pieces.N; ++n) {
    sol.objective += operational_cost(sol.p.col(n), inputs.evs[n]);
  }
  return sol;
}

}  // namespace

CentralSolution solve_centralized(const SimInputs& inputs, const qp::Settings& settings) {
  return run_stacked(inputs, settings, false);
}

CentralSolution solve_centralized_slack(const SimInputs& inputs, const qp::Settings& settings) {
  return run_stacked(inputs, settings, true);
}

GapReport compare(const SimInputs& inputs, const RunResult& distributed,
                  const CentralSolution& centralized) {
  GapReport report;
  report.distributed_objective = distributed.objective;
  report.centralized_objective = centralized.objective;
  report.relative_gap = std::abs(distributed.objective - centralized.objective) /
                        std::max(std::abs(centralized.objective), 1e-12);
  report.max_coupling_violation = reconstruct_solution(inputs, distributed).max_coupling_violation;
  report.final_consensus_residual =
      distributed.consensus_residual.empty() ? 0.0 : distributed.consensus_residual.back();
  return report;
}

}  // namespace evcoord
