#pragma once

#include <Eigen/Dense>
#include <limits>
#include <vector>

#include "evcoord/common.hpp"

namespace evcoord::qp {

struct Settings {
  double eps_primal = 1e-6;
  double eps_dual = 1e-6;
  int max_iters = 5000;
  bool warm_start = true;

  // splitting parameters
  double rho = 1.0;
  double sigma = 1e-6;
  double relax = 1.6;     // over-relaxation
  int check_every = 25;
  bool adaptive_rho = true;
  double rho_min = 1e-4;
  double rho_max = 1e4;

  void validate() const {
    std::vector<std::string> problems;
    if (eps_primal <= 0.0) problems.push_back("eps_primal must be positive");
    if (eps_dual <= 0.0) problems.push_back("eps_dual must be positive");
    if (max_iters <= 0) problems.push_back("max_iters must be positive");
    if (rho <= 0.0) problems.push_back("rho must be positive");
    if (!problems.empty()) throw ValidationError(std::move(problems));
  }
};

struct Result {
  Eigen::VectorXd x;  // primal iterate
  Eigen::VectorXd z;  // projected constraint iterate
  Eigen::VectorXd y;  // constraint multipliers
  int iters = 0;
  bool converged = false;
  double primal_res = std::numeric_limits<double>::infinity();
  double dual_res = std::numeric_limits<double>::infinity();
  double first_primal_res = std::numeric_limits<double>::infinity();
  double first_dual_res = std::numeric_limits<double>::infinity();
};

/// Warm-start carry-over between consecutive solves of the same problem shape.
struct WarmState {
  bool valid = false;
  Eigen::VectorXd x, z, y;
};

/// A convex QP split as   minimize 1/2 x'Px + g'x   s.t.  Ax in C,
/// where C is a product of intervals and discs with cheap exact projections.
/// Implementations expose P and A as operators and own the factorization of
/// (P + sigma I + rho A'A).
class SplitProblem {
public:
  virtual ~SplitProblem() = default;

  virtual Eigen::Index num_vars() const = 0;
  virtual Eigen::Index num_cons() const = 0;

  virtual const Eigen::VectorXd& lin_cost() const = 0;
  virtual void apply_hessian(const Eigen::VectorXd& x, Eigen::VectorXd& out) const = 0;
  virtual void apply_constraints(const Eigen::VectorXd& x, Eigen::VectorXd& out) const = 0;
  virtual void apply_constraints_t(const Eigen::VectorXd& v, Eigen::VectorXd& out) const = 0;

  /// Project z onto C in place.
  virtual void project(Eigen::VectorXd& z) const = 0;

  /// Prepare the KKT solve for the given parameters. Called before iteration
  /// starts and again whenever rho adapts.
  virtual void refactorize(double sigma, double rho) = 0;
  virtual void solve_kkt(const Eigen::VectorXd& rhs, Eigen::VectorXd& out) const = 0;

  /// Support function of C, used to certify primal infeasibility. May return
  /// +infinity when the direction is unbounded over C.
  virtual double support(const Eigen::VectorXd& v) const;
};

/// Operator-splitting iteration (ADMM with over-relaxation). Throws
/// InfeasibleProblemError when a primal infeasibility certificate is found.
Result solve(SplitProblem& problem, const Settings& settings, WarmState* warm = nullptr);

/// Constraint cone as per-row intervals plus pairwise discs. Disc rows must
/// have infinite interval bounds; the disc projection owns them.
struct ConeSpec {
  Eigen::VectorXd lo, hi;
  struct Disc {
    int row_a = 0;
    int row_b = 0;
    double radius = 0.0;
  };
  std::vector<Disc> discs;
};

/// Fully materialized problem with dense P and A. Small instances only; also
/// serves as the independent route against structured implementations.
class DenseProblem final : public SplitProblem {
public:
  DenseProblem(Eigen::MatrixXd hessian, Eigen::VectorXd lin, Eigen::MatrixXd constraints,
               ConeSpec cone);

  Eigen::Index num_vars() const override { return A_.cols(); }
  Eigen::Index num_cons() const override { return A_.rows(); }
  const Eigen::VectorXd& lin_cost() const override { return g_; }
  void apply_hessian(const Eigen::VectorXd& x, Eigen::VectorXd& out) const override;
  void apply_constraints(const Eigen::VectorXd& x, Eigen::VectorXd& out) const override;
  void apply_constraints_t(const Eigen::VectorXd& v, Eigen::VectorXd& out) const override;
  void project(Eigen::VectorXd& z) const override;
  void refactorize(double sigma, double rho) override;
  void solve_kkt(const Eigen::VectorXd& rhs, Eigen::VectorXd& out) const override;
  double support(const Eigen::VectorXd& v) const override;

private:
  Eigen::MatrixXd P_, A_;
  Eigen::VectorXd g_;
  ConeSpec cone_;
  Eigen::LDLT<Eigen::MatrixXd> ldlt_;
};

}  // namespace evcoord::qp
