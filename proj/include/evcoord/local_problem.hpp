#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "evcoord/ev.hpp"
#include "evcoord/grid.hpp"
#include "evcoord/qp.hpp"

namespace evcoord {

/// One agent's per-iteration subproblem data. The decision vector is
/// u = [p; q; s] with s the nonnegative slack of the shared voltage-band
/// constraint, and Psi = [Gamma Xi I] so that sum_n Psi_n u_n = w.
///
/// w, d_col and e_col carry the consensus layer's voltage unit: the grid
/// model works in p.u.^2, but a scenario may declare that the algorithm runs
/// on squared-volt quantities instead (unit_scale = V_base^2 per p.u.^2).
/// That choice rescales lambda, nu and the censor threshold but leaves the
/// recovered power profiles identical; the step size c is always quoted in
/// the algorithm's unit.
struct LocalProblem {
  int T = 0;
  int K = 0;
  int num_customers = 0;  // N, for the w/N coupling share
  int degree = 0;         // |N_n|, communication neighbors
  double c = 0.0;         // consensus step size
  double kappa = 0.0;
  Eigen::VectorXd price_dt;  // dt * price, length T
  EvFeasibility feas;
  Eigen::VectorXd d_col;  // K, voltage sensitivity to this customer's p (p.u.^2/kW)
  Eigen::VectorXd e_col;  // K, sensitivity to q
  Eigen::VectorXd w;      // 2KT

  int dual_dim() const { return 2 * K * T; }
  int u_dim() const { return 2 * T + dual_dim(); }
  int p_offset() const { return 0; }
  int q_offset() const { return T; }
  int s_offset() const { return 2 * T; }

  /// 1 / (2 c |N_n|), the weight tying u to the consensus variables.
  double beta() const;

  Eigen::VectorXd apply_psi(const Eigen::VectorXd& u) const;
  Eigen::VectorXd apply_psi_t(const Eigen::VectorXd& a) const;
};

LocalProblem make_local_problem(const EvParams& params, const SensitivityModel& sens,
                                const VoltageEnvelope& env, int customer_col, int num_customers,
                                double c, int degree, double unit_scale = 1.0);

/// y = Psi u - w/N - nu_prev + c * sum_m (lhat_self_prev + lhat_m_prev)
Eigen::VectorXd assemble_y(const Eigen::VectorXd& u, const LocalProblem& prob,
                           const Eigen::VectorXd& nu_prev, const Eigen::VectorXd& lhat_self_prev,
                           const std::vector<Eigen::VectorXd>& lhat_neighbors_prev);

/// Same with the neighbor broadcasts already summed.
Eigen::VectorXd assemble_y_presummed(const Eigen::VectorXd& u, const LocalProblem& prob,
                                     const Eigen::VectorXd& nu_prev,
                                     const Eigen::VectorXd& lhat_self_prev,
                                     const Eigen::VectorXd& neighbor_sum);

/// r with y = Psi u - r, i.e. r = w/N + nu_prev - c (|N_n| lhat_self + sum_m lhat_m).
Eigen::VectorXd coupling_target(const LocalProblem& prob, const Eigen::VectorXd& nu_prev,
                                const Eigen::VectorXd& lhat_self_prev,
                                const Eigen::VectorXd& neighbor_sum);

/// lambda = y / (2 c |N_n|). Throws IsolatedAgentError when degree == 0.
Eigen::VectorXd update_lambda(const Eigen::VectorXd& u, const LocalProblem& prob,
                              const Eigen::VectorXd& nu_prev,
                              const Eigen::VectorXd& lhat_self_prev,
                              const Eigen::VectorXd& neighbor_sum);

/// nu = nu_prev + c * sum_m (lhat_self_now - lhat_m_now)
Eigen::VectorXd update_dual(const Eigen::VectorXd& nu_prev, double c,
                            const Eigen::VectorXd& lhat_self_now,
                            const std::vector<Eigen::VectorXd>& lhat_neighbors_now);

Eigen::VectorXd update_dual_presummed(const Eigen::VectorXd& nu_prev, double c,
                                      const Eigen::VectorXd& lhat_self_now,
                                      const Eigen::VectorXd& neighbor_sum_now, int degree);

/// Smooth objective of the u-update:
///   dt*price'p + kappa p'p + ||Psi u - r||^2 / (4 c |N_n|).
double u_objective(const LocalProblem& prob, const Eigen::VectorXd& u, const Eigen::VectorXd& r);
Eigen::VectorXd u_objective_gradient(const LocalProblem& prob, const Eigen::VectorXd& u,
                                     const Eigen::VectorXd& r);

class SubproblemSplit;  // qp::SplitProblem over [p; q; s], defined in the .cpp

/// Stateful solver for one agent: keeps the cached factorization and the
/// warm-start iterates across the outer consensus rounds.
class SubproblemSolver {
public:
  SubproblemSolver(LocalProblem prob, qp::Settings settings);
  ~SubproblemSolver();
  SubproblemSolver(SubproblemSolver&&) noexcept;
  SubproblemSolver& operator=(SubproblemSolver&&) noexcept;

  const LocalProblem& problem() const { return *prob_; }

  /// u-update for the current consensus context. Non-convergence is reported
  /// in the result, not thrown; infeasibility throws.
  const qp::Result& solve_u(const Eigen::VectorXd& nu_prev, const Eigen::VectorXd& lhat_self_prev,
                            const Eigen::VectorXd& neighbor_sum);

  void reset_warm();

private:
  std::shared_ptr<const LocalProblem> prob_;
  qp::Settings settings_;
  std::unique_ptr<SubproblemSplit> split_;
  qp::WarmState warm_;
  qp::Result last_;
};

/// One-shot u-update (cold start).
Eigen::VectorXd solve_u(const LocalProblem& prob, const Eigen::VectorXd& nu_prev,
                        const Eigen::VectorXd& lhat_self_prev,
                        const Eigen::VectorXd& neighbor_sum, const qp::Settings& settings);

}  // namespace evcoord
