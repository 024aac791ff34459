#include "evcoord/qp.hpp"

#include <algorithm>
#include <cmath>

namespace evcoord::qp {

double SplitProblem::support(const Eigen::VectorXd&) const {
  return std::numeric_limits<double>::infinity();
}

namespace {

double inf_norm(const Eigen::VectorXd& v) {
  return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
}

}  // namespace

Result solve(SplitProblem& problem, const Settings& settings, WarmState* warm) {
  settings.validate();

  const Eigen::Index n = problem.num_vars();
  const Eigen::Index m = problem.num_cons();

  Result res;
  res.x = Eigen::VectorXd::Zero(n);
  res.z = Eigen::VectorXd::Zero(m);
  res.y = Eigen::VectorXd::Zero(m);
  if (settings.warm_start && warm && warm->valid && warm->x.size() == n && warm->z.size() == m) {
    res.x = warm->x;
    res.z = warm->z;
    res.y = warm->y;
  }

  double rho = settings.rho;
  problem.refactorize(settings.sigma, rho);

  Eigen::VectorXd rhs(n), xt(n), zt(m), v(m), ax(m), work_n(n), work_m(m);
  Eigen::VectorXd y_prev_check = res.y;

  const double relax = settings.relax;
  const double inf = std::numeric_limits<double>::infinity();

  int k = 0;
  while (k < settings.max_iters) {
    ++k;

    // x-step: (P + sigma I + rho A'A) xt = sigma x - g + A'(rho z - y)
    work_m = rho * res.z - res.y;
    problem.apply_constraints_t(work_m, rhs);
    rhs += settings.sigma * res.x - problem.lin_cost();
    problem.solve_kkt(rhs, xt);
    problem.apply_constraints(xt, zt);

    res.x = relax * xt + (1.0 - relax) * res.x;

    // z-step: project relaxed constraint iterate shifted by the multipliers
    v = relax * zt + (1.0 - relax) * res.z + res.y / rho;
    work_m = relax * zt + (1.0 - relax) * res.z;  // pre-projection value
    res.z = v;
    problem.project(res.z);

    // y-step
    res.y += rho * (work_m - res.z);

    const bool last = (k == settings.max_iters);
    if (k % settings.check_every != 0 && !last) continue;

    // residuals: r_prim = ||Ax - z||_inf, r_dual = ||Px + g + A'y||_inf
    problem.apply_constraints(res.x, ax);
    const double r_prim = inf_norm(ax - res.z);
    problem.apply_hessian(res.x, work_n);
    work_n += problem.lin_cost();
    problem.apply_constraints_t(res.y, rhs);
    const double r_dual = inf_norm(work_n + rhs);

    const double prim_scale = std::max({1.0, inf_norm(ax), inf_norm(res.z)});
    const double dual_scale =
        std::max({1.0, inf_norm(work_n - problem.lin_cost()), inf_norm(rhs),
                  inf_norm(problem.lin_cost())});

    res.iters = k;
    res.primal_res = r_prim;
    res.dual_res = r_dual;
    if (res.first_primal_res == inf) {
      res.first_primal_res = r_prim;
      res.first_dual_res = r_dual;
    }

    if (r_prim <= settings.eps_primal * prim_scale && r_dual <= settings.eps_dual * dual_scale) {
      res.converged = true;
      break;
    }

    // primal infeasibility certificate from the multiplier drift
    Eigen::VectorXd dy = res.y - y_prev_check;
    const double dy_norm = inf_norm(dy);
    if (dy_norm > 1e-12) {
      dy /= dy_norm;
      problem.apply_constraints_t(dy, work_n);
      const double eps_inf = 1e-5;
      if (inf_norm(work_n) <= eps_inf && problem.support(dy) <= -eps_inf) {
        throw InfeasibleProblemError(
            "primal infeasibility certificate found after " + std::to_string(k) + " iterations");
      }
    }
    y_prev_check = res.y;

    if (settings.adaptive_rho && !last) {
      const double ratio = (r_prim / prim_scale) / std::max(r_dual / dual_scale, 1e-16);
      const double scale = std::sqrt(ratio);
      if (scale > 5.0 || scale < 0.2) {
        const double new_rho = std::clamp(rho * scale, settings.rho_min, settings.rho_max);
        if (new_rho != rho) {
          rho = new_rho;
          problem.refactorize(settings.sigma, rho);
        }
      }
    }
  }

  res.iters = std::min(k, settings.max_iters);
  if (warm) {
    warm->valid = true;
    warm->x = res.x;
    warm->z = res.z;
    warm->y = res.y;
  }
  return res;
}

DenseProblem::DenseProblem(Eigen::MatrixXd hessian, Eigen::VectorXd lin,
                           Eigen::MatrixXd constraints, ConeSpec cone)
    : P_(std::move(hessian)), A_(std::move(constraints)), g_(std::move(lin)),
      cone_(std::move(cone)) {
  if (P_.rows() != P_.cols() || P_.rows() != A_.cols() || g_.size() != A_.cols()) {
    throw DimensionError("dense problem pieces disagree on the variable count");
  }
  if (cone_.lo.size() != A_.rows() || cone_.hi.size() != A_.rows()) {
    throw DimensionError("cone bounds must cover every constraint row");
  }
}

void DenseProblem::apply_hessian(const Eigen::VectorXd& x, Eigen::VectorXd& out) const {
  out.noalias() = P_ * x;
}

void DenseProblem::apply_constraints(const Eigen::VectorXd& x, Eigen::VectorXd& out) const {
  out.noalias() = A_ * x;
}

void DenseProblem::apply_constraints_t(const Eigen::VectorXd& v, Eigen::VectorXd& out) const {
  out.noalias() = A_.transpose() * v;
}

void DenseProblem::project(Eigen::VectorXd& z) const {
  z = z.cwiseMax(cone_.lo).cwiseMin(cone_.hi);
  for (const auto& disc : cone_.discs) {
    double& a = z(disc.row_a);
    double& b = z(disc.row_b);
    const double norm_sq = a * a + b * b;
    if (norm_sq > disc.radius * disc.radius) {
      const double scale = disc.radius / std::sqrt(norm_sq);
      a *= scale;
      b *= scale;
    }
  }
}

void DenseProblem::refactorize(double sigma, double rho) {
  Eigen::MatrixXd kkt = P_;
  kkt.diagonal().array() += sigma;
  kkt.noalias() += rho * A_.transpose() * A_;
  ldlt_.compute(kkt);
  if (ldlt_.info() != Eigen::Success) {
    throw std::runtime_error("dense KKT factorization failed");
  }
}

void DenseProblem::solve_kkt(const Eigen::VectorXd& rhs, Eigen::VectorXd& out) const {
  out = ldlt_.solve(rhs);
}

double DenseProblem::support(const Eigen::VectorXd& v) const {
  constexpr double kTol = 1e-9;
  const double inf = std::numeric_limits<double>::infinity();

  std::vector<char> disc_row(A_.rows(), 0);
  for (const auto& d : cone_.discs) {
    disc_row[d.row_a] = 1;
    disc_row[d.row_b] = 1;
  }

  double total = 0.0;
  for (Eigen::Index i = 0; i < A_.rows(); ++i) {
    if (disc_row[i]) continue;
    if (v(i) > kTol) {
      if (std::isinf(cone_.hi(i))) return inf;
      total += v(i) * cone_.hi(i);
    } else if (v(i) < -kTol) {
      if (std::isinf(cone_.lo(i))) return inf;
      total += v(i) * cone_.lo(i);
    }
  }
  for (const auto& d : cone_.discs) {
    total += d.radius * std::hypot(v(d.row_a), v(d.row_b));
  }
  return total;
}

}  // namespace evcoord::qp
