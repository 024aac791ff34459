#include "evcoord/local_problem.hpp"

#include <Eigen/Cholesky>
#include <cmath>

namespace evcoord {

double LocalProblem::beta() const {
  if (degree <= 0) throw IsolatedAgentError("agent has no communication neighbors");
  return 1.0 / (2.0 * c * degree);
}

Eigen::VectorXd LocalProblem::apply_psi(const Eigen::VectorXd& u) const {
  if (u.size() != u_dim()) throw DimensionError("u has wrong length for apply_psi");
  const int KT = K * T;
  Eigen::VectorXd out(2 * KT);
  for (int t = 0; t < T; ++t) {
    const auto h = d_col * u(p_offset() + t) + e_col * u(q_offset() + t);
    out.segment(static_cast<Eigen::Index>(t) * K, K) = h;
    out.segment(KT + static_cast<Eigen::Index>(t) * K, K) = -h;
  }
  out += u.tail(2 * KT);
  return out;
}

Eigen::VectorXd LocalProblem::apply_psi_t(const Eigen::VectorXd& a) const {
  const int KT = K * T;
  if (a.size() != 2 * KT) throw DimensionError("vector has wrong length for apply_psi_t");
  Eigen::VectorXd out(u_dim());
  for (int t = 0; t < T; ++t) {
    const auto diff = a.segment(static_cast<Eigen::Index>(t) * K, K) -
                      a.segment(KT + static_cast<Eigen::Index>(t) * K, K);
    out(p_offset() + t) = d_col.dot(diff);
    out(q_offset() + t) = e_col.dot(diff);
  }
  out.tail(2 * KT) = a;
  return out;
}

LocalProblem make_local_problem(const EvParams& params, const SensitivityModel& sens,
                                const VoltageEnvelope& env, int customer_col, int num_customers,
                                double c, int degree, double unit_scale) {
  if (unit_scale <= 0.0) throw ValidationError("coupling unit scale must be positive");
  const int K = sens.K();
  const int T = static_cast<int>(env.vtilde.size()) / K;

  LocalProblem prob;
  prob.T = T;
  prob.K = K;
  prob.num_customers = num_customers;
  prob.degree = degree;
  prob.c = c;
  prob.kappa = params.kappa;
  prob.price_dt = params.dt_hours * params.price;
  prob.feas = build_feasibility(params, T);
  prob.d_col = unit_scale * sens.d_col(customer_col);
  prob.e_col = unit_scale * sens.e_col(customer_col);
  prob.w = unit_scale * env.w;
  return prob;
}

Eigen::VectorXd coupling_target(const LocalProblem& prob, const Eigen::VectorXd& nu_prev,
                                const Eigen::VectorXd& lhat_self_prev,
                                const Eigen::VectorXd& neighbor_sum) {
  if (nu_prev.size() != prob.dual_dim() || lhat_self_prev.size() != prob.dual_dim() ||
      neighbor_sum.size() != prob.dual_dim()) {
    throw DimensionError("consensus vectors must have length 2KT");
  }
  return prob.w / prob.num_customers + nu_prev -
         prob.c * (prob.degree * lhat_self_prev + neighbor_sum);
}

Eigen::VectorXd assemble_y_presummed(const Eigen::VectorXd& u, const LocalProblem& prob,
                                     const Eigen::VectorXd& nu_prev,
                                     const Eigen::VectorXd& lhat_self_prev,
                                     const Eigen::VectorXd& neighbor_sum) {
  return prob.apply_psi(u) - coupling_target(prob, nu_prev, lhat_self_prev, neighbor_sum);
}

Eigen::VectorXd assemble_y(const Eigen::VectorXd& u, const LocalProblem& prob,
                           const Eigen::VectorXd& nu_prev, const Eigen::VectorXd& lhat_self_prev,
                           const std::vector<Eigen::VectorXd>& lhat_neighbors_prev) {
  if (static_cast<int>(lhat_neighbors_prev.size()) != prob.degree) {
    throw DimensionError("expected one neighbor broadcast per neighbor");
  }
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(prob.dual_dim());
  for (const auto& l : lhat_neighbors_prev) sum += l;
  return assemble_y_presummed(u, prob, nu_prev, lhat_self_prev, sum);
}

Eigen::VectorXd update_lambda(const Eigen::VectorXd& u, const LocalProblem& prob,
                              const Eigen::VectorXd& nu_prev,
                              const Eigen::VectorXd& lhat_self_prev,
                              const Eigen::VectorXd& neighbor_sum) {
  if (prob.degree <= 0) {
    throw IsolatedAgentError("lambda update undefined for an agent with no neighbors");
  }
  return assemble_y_presummed(u, prob, nu_prev, lhat_self_prev, neighbor_sum) /
         (2.0 * prob.c * prob.degree);
}

Eigen::VectorXd update_dual_presummed(const Eigen::VectorXd& nu_prev, double c,
                                      const Eigen::VectorXd& lhat_self_now,
                                      const Eigen::VectorXd& neighbor_sum_now, int degree) {
  return nu_prev + c * (degree * lhat_self_now - neighbor_sum_now);
}

Eigen::VectorXd update_dual(const Eigen::VectorXd& nu_prev, double c,
                            const Eigen::VectorXd& lhat_self_now,
                            const std::vector<Eigen::VectorXd>& lhat_neighbors_now) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(nu_prev.size());
  for (const auto& l : lhat_neighbors_now) sum += l;
  return update_dual_presummed(nu_prev, c, lhat_self_now, sum,
                               static_cast<int>(lhat_neighbors_now.size()));
}

double u_objective(const LocalProblem& prob, const Eigen::VectorXd& u, const Eigen::VectorXd& r) {
  const auto p = u.head(prob.T);
  const double quad = (prob.apply_psi(u) - r).squaredNorm();
  return prob.price_dt.dot(p) + prob.kappa * p.squaredNorm() +
         quad / (4.0 * prob.c * prob.degree);
}

Eigen::VectorXd u_objective_gradient(const LocalProblem& prob, const Eigen::VectorXd& u,
                                     const Eigen::VectorXd& r) {
  Eigen::VectorXd grad = prob.apply_psi_t(prob.apply_psi(u) - r) / (2.0 * prob.c * prob.degree);
  grad.head(prob.T) += prob.price_dt + 2.0 * prob.kappa * u.head(prob.T);
  return grad;
}

// --- split-problem implementation -----------------------------------------
//
// Variables [p(T); q(T); s(2KT)]; constraint rows
//   [0, 8T+1)             F [p;q] >= f
//   [8T+1, 8T+1+2T)       copies of p and q, projected onto the per-slot discs
//   [8T+1+2T, ... +2KT)   copy of s, projected onto s >= 0
// The KKT system is solved by eliminating the s block (whose diagonal is
// beta + sigma + rho) and factoring the remaining 2T x 2T Schur complement.

class SubproblemSplit final : public qp::SplitProblem {
public:
  explicit SubproblemSplit(std::shared_ptr<const LocalProblem> prob_ptr)
      : prob_ptr_(std::move(prob_ptr)),
        prob_(*prob_ptr_),
        T_(prob_.T),
        KT_(prob_.K * prob_.T),
        beta_(prob_.beta()),
        g_(Eigen::VectorXd::Zero(prob_.u_dim())) {
    dd_ = prob_.d_col.squaredNorm();
    ee_ = prob_.e_col.squaredNorm();
    de_ = prob_.d_col.dot(prob_.e_col);
    set_coupling_target(Eigen::VectorXd::Zero(2 * KT_));
  }

  void set_coupling_target(const Eigen::VectorXd& r) {
    // g = [dt*price; 0; 0] - beta Psi' r
    g_ = -beta_ * prob_.apply_psi_t(r);
    g_.head(T_) += prob_.price_dt;
  }

  Eigen::Index num_vars() const override { return prob_.u_dim(); }
  Eigen::Index num_cons() const override { return 8 * T_ + 1 + 2 * T_ + 2 * KT_; }

  const Eigen::VectorXd& lin_cost() const override { return g_; }

  void apply_hessian(const Eigen::VectorXd& x, Eigen::VectorXd& out) const override {
    out = beta_ * prob_.apply_psi_t(prob_.apply_psi(x));
    out.head(T_) += 2.0 * prob_.kappa * x.head(T_);
  }

  void apply_constraints(const Eigen::VectorXd& x, Eigen::VectorXd& out) const override {
    out.resize(num_cons());
    const auto p = x.head(T_);
    const auto q = x.segment(T_, T_);
    const auto& avail = prob_.feas.avail;

    Eigen::VectorXd cs(T_);
    double acc = 0.0;
    for (int t = 0; t < T_; ++t) {
      acc += p(t);
      cs(t) = acc;
    }

    int r = 0;
    out.segment(r, T_) = p;
    r += T_;
    out.segment(r, T_) = -p;
    r += T_;
    out.segment(r, T_) = cs;
    r += T_;
    out.segment(r, T_) = -cs;
    r += T_;
    out(r) = acc;
    r += 1;
    out.segment(r, T_) = (1.0 - avail.array()) * p.array();
    r += T_;
    out.segment(r, T_) = -((1.0 - avail.array()) * p.array());
    r += T_;
    out.segment(r, T_) = (1.0 - avail.array()) * q.array();
    r += T_;
    out.segment(r, T_) = -((1.0 - avail.array()) * q.array());
    r += T_;
    out.segment(r, T_) = p;
    out.segment(r + T_, T_) = q;
    r += 2 * T_;
    out.segment(r, 2 * KT_) = x.tail(2 * KT_);
  }

  void apply_constraints_t(const Eigen::VectorXd& v, Eigen::VectorXd& out) const override {
    out.setZero(num_vars());
    const auto& avail = prob_.feas.avail;

    int r = 0;
    const auto v_plo = v.segment(r, T_);
    const auto v_phi = v.segment(r + T_, T_);
    r += 2 * T_;
    const auto v_slo = v.segment(r, T_);
    const auto v_shi = v.segment(r + T_, T_);
    r += 2 * T_;
    const double v_dem = v(r);
    r += 1;
    const auto v_ap1 = v.segment(r, T_);
    const auto v_ap2 = v.segment(r + T_, T_);
    r += 2 * T_;
    const auto v_aq1 = v.segment(r, T_);
    const auto v_aq2 = v.segment(r + T_, T_);
    r += 2 * T_;
    const auto v_dp = v.segment(r, T_);
    const auto v_dq = v.segment(r + T_, T_);
    r += 2 * T_;

    // M' applied to the SoC rows = suffix sums
    Eigen::VectorXd soc = v_slo - v_shi;
    double suffix = 0.0;
    Eigen::VectorXd mts(T_);
    for (int t = T_ - 1; t >= 0; --t) {
      suffix += soc(t);
      mts(t) = suffix;
    }

    out.head(T_) = v_plo - v_phi + mts + Eigen::VectorXd::Constant(T_, v_dem) + v_dp;
    out.head(T_).array() += (1.0 - avail.array()) * (v_ap1 - v_ap2).array();
    out.segment(T_, T_) = v_dq;
    out.segment(T_, T_).array() += (1.0 - avail.array()) * (v_aq1 - v_aq2).array();
    out.tail(2 * KT_) = v.segment(r, 2 * KT_);
  }

  void project(Eigen::VectorXd& z) const override {
    const int fr = 8 * T_ + 1;
    z.head(fr) = z.head(fr).cwiseMax(prob_.feas.f);

    const double radius = prob_.feas.disc_radius;
    const double radius_sq = radius * radius;
    for (int t = 0; t < T_; ++t) {
      double& a = z(fr + t);
      double& b = z(fr + T_ + t);
      const double norm_sq = a * a + b * b;
      if (norm_sq > radius_sq) {
        const double scale = radius / std::sqrt(norm_sq);
        a *= scale;
        b *= scale;
      }
    }

    z.tail(2 * KT_) = z.tail(2 * KT_).cwiseMax(0.0);
  }

  double support(const Eigen::VectorXd& v) const override {
    constexpr double kTol = 1e-9;
    const double inf = std::numeric_limits<double>::infinity();
    const int fr = 8 * T_ + 1;

    double total = 0.0;
    for (int i = 0; i < fr; ++i) {
      if (v(i) > kTol) return inf;
      total += prob_.feas.f(i) * v(i);
    }
    for (int t = 0; t < T_; ++t) {
      total += prob_.feas.disc_radius * std::hypot(v(fr + t), v(fr + T_ + t));
    }
    for (int i = fr + 2 * T_; i < num_cons(); ++i) {
      if (v(i) > kTol) return inf;
    }
    return total;
  }

  void refactorize(double sigma, double rho) override {
    diag_s_ = beta_ + sigma + rho;
    const double bt = beta_ - beta_ * beta_ / diag_s_;  // Schur-reduced coupling weight

    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(2 * T_, 2 * T_);
    const auto& avail = prob_.feas.avail;

    // p block: 2 kappa + sigma + rho(disc) + 2 bt |D|^2 on the diagonal,
    // plus rho * (F'F)_pp = rho (2I + 2 M'M + 11' + 2 diag(1-avail))
    for (int i = 0; i < T_; ++i) {
      for (int j = 0; j < T_; ++j) {
        const double mtm = static_cast<double>(T_ - std::max(i, j));
        S(i, j) = rho * (2.0 * mtm + 1.0);
        S(T_ + i, T_ + j) = 0.0;
      }
      S(i, i) += 2.0 * prob_.kappa + sigma + rho + 2.0 * bt * dd_ +
                 rho * (2.0 + 2.0 * (1.0 - avail(i)));
      S(T_ + i, T_ + i) += sigma + rho + 2.0 * bt * ee_ + rho * 2.0 * (1.0 - avail(i));
      S(i, T_ + i) = 2.0 * bt * de_;
      S(T_ + i, i) = 2.0 * bt * de_;
    }

    llt_.compute(S);
    if (llt_.info() != Eigen::Success) {
      throw std::runtime_error("subproblem KKT factorization failed");
    }
  }

  void solve_kkt(const Eigen::VectorXd& rhs, Eigen::VectorXd& out) const override {
    out.resize(num_vars());
    const auto b1 = rhs.head(2 * T_);
    const auto b2 = rhs.tail(2 * KT_);

    // t = b1 - (beta/d) G' b2, with G = [Gamma Xi]
    Eigen::VectorXd t = b1;
    const double scale = beta_ / diag_s_;
    for (int i = 0; i < T_; ++i) {
      const auto diff = b2.segment(static_cast<Eigen::Index>(i) * prob_.K, prob_.K) -
                        b2.segment(KT_ + static_cast<Eigen::Index>(i) * prob_.K, prob_.K);
      t(i) -= scale * prob_.d_col.dot(diff);
      t(T_ + i) -= scale * prob_.e_col.dot(diff);
    }

    out.head(2 * T_) = llt_.solve(t);

    // s block back-substitution: x2 = (b2 - beta G x1) / d
    for (int i = 0; i < T_; ++i) {
      const auto h = prob_.d_col * out(i) + prob_.e_col * out(T_ + i);
      out.segment(2 * T_ + static_cast<Eigen::Index>(i) * prob_.K, prob_.K) =
          (b2.segment(static_cast<Eigen::Index>(i) * prob_.K, prob_.K) - beta_ * h) / diag_s_;
      out.segment(2 * T_ + KT_ + static_cast<Eigen::Index>(i) * prob_.K, prob_.K) =
          (b2.segment(KT_ + static_cast<Eigen::Index>(i) * prob_.K, prob_.K) + beta_ * h) /
          diag_s_;
    }
  }

private:
  std::shared_ptr<const LocalProblem> prob_ptr_;
  const LocalProblem& prob_;
  int T_ = 0;
  int KT_ = 0;
  double beta_ = 0.0;
  double dd_ = 0.0, ee_ = 0.0, de_ = 0.0;
  double diag_s_ = 1.0;
  Eigen::VectorXd g_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

SubproblemSolver::SubproblemSolver(LocalProblem prob, qp::Settings settings)
    : prob_(std::make_shared<const LocalProblem>(std::move(prob))),
      settings_(settings),
      split_(std::make_unique<SubproblemSplit>(prob_)) {}

SubproblemSolver::~SubproblemSolver() = default;
SubproblemSolver::SubproblemSolver(SubproblemSolver&&) noexcept = default;
SubproblemSolver& SubproblemSolver::operator=(SubproblemSolver&&) noexcept = default;

const qp::Result& SubproblemSolver::solve_u(const Eigen::VectorXd& nu_prev,
                                            const Eigen::VectorXd& lhat_self_prev,
                                            const Eigen::VectorXd& neighbor_sum) {
  split_->set_coupling_target(coupling_target(*prob_, nu_prev, lhat_self_prev, neighbor_sum));
  last_ = qp::solve(*split_, settings_, &warm_);
  return last_;
}

void SubproblemSolver::reset_warm() { warm_ = qp::WarmState{}; }

Eigen::VectorXd solve_u(const LocalProblem& prob, const Eigen::VectorXd& nu_prev,
                        const Eigen::VectorXd& lhat_self_prev,
                        const Eigen::VectorXd& neighbor_sum, const qp::Settings& settings) {
  SubproblemSolver solver(prob, settings);
  return solver.solve_u(nu_prev, lhat_self_prev, neighbor_sum).x;
}

}  // namespace evcoord
