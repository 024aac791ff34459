#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <limits>

#include "evcoord/qp.hpp"

using namespace evcoord;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

qp::ConeSpec interval_cone(const VectorXd& lo, const VectorXd& hi) {
  qp::ConeSpec cone;
  cone.lo = lo;
  cone.hi = hi;
  return cone;
}
}  // namespace

TEST_CASE("scalar box QP: minimum sits on the active bound") {
  // min 1/2 x^2 + x  over x in [0, 1]  ->  x* = 0
  MatrixXd P(1, 1);
  P << 1.0;
  VectorXd g(1);
  g << 1.0;
  MatrixXd A(1, 1);
  A << 1.0;
  qp::DenseProblem prob(P, g, A, interval_cone(VectorXd::Zero(1), VectorXd::Ones(1)));
  const qp::Result res = qp::solve(prob, {});
  CHECK(res.converged);
  CHECK(res.x(0) == doctest::Approx(0.0).epsilon(1e-5));
}

TEST_CASE("equality-constrained least squares matches the analytic projection") {
  // min ||x - a||^2 s.t. sum x = 1 -> x = a + (1 - sum a)/n
  const int n = 4;
  VectorXd a(n);
  a << 0.3, -1.2, 2.0, 0.4;
  MatrixXd P = 2.0 * MatrixXd::Identity(n, n);
  VectorXd g = -2.0 * a;
  MatrixXd A = MatrixXd::Ones(1, n);
  qp::DenseProblem prob(P, g, A, interval_cone(VectorXd::Ones(1), VectorXd::Ones(1)));
  qp::Settings settings;
  settings.eps_primal = 1e-9;
  settings.eps_dual = 1e-9;
  const qp::Result res = qp::solve(prob, settings);
  CHECK(res.converged);
  const VectorXd expected = a.array() + (1.0 - a.sum()) / n;
  CHECK((res.x - expected).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("disc-constrained least squares scales onto the boundary") {
  // min ||x - c||^2 with x inside a radius-1 disc, c outside -> x = c/||c||
  MatrixXd P = 2.0 * MatrixXd::Identity(2, 2);
  VectorXd c(2);
  c << 3.0, 4.0;
  VectorXd g = -2.0 * c;
  MatrixXd A = MatrixXd::Identity(2, 2);
  qp::ConeSpec cone = interval_cone(VectorXd::Constant(2, -kInf), VectorXd::Constant(2, kInf));
  cone.discs.push_back({0, 1, 1.0});
  qp::DenseProblem prob(P, g, A, cone);
  const qp::Result res = qp::solve(prob, {});
  CHECK(res.converged);
  CHECK(res.x(0) == doctest::Approx(0.6).epsilon(1e-4));
  CHECK(res.x(1) == doctest::Approx(0.8).epsilon(1e-4));
}

TEST_CASE("interior optimum is untouched by inactive constraints") {
  MatrixXd P(2, 2);
  P << 4.0, 1.0, 1.0, 3.0;
  VectorXd g(2);
  g << -1.0, 2.0;
  MatrixXd A = MatrixXd::Identity(2, 2);
  qp::DenseProblem prob(P, g, A,
                        interval_cone(VectorXd::Constant(2, -100.0), VectorXd::Constant(2, 100.0)));
  qp::Settings settings;
  settings.eps_primal = 1e-9;
  settings.eps_dual = 1e-9;
  const qp::Result res = qp::solve(prob, settings);
  CHECK(res.converged);
  const VectorXd expected = -P.ldlt().solve(g);
  CHECK((res.x - expected).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("contradictory interval rows produce an infeasibility certificate") {
  MatrixXd P = MatrixXd::Zero(1, 1);
  VectorXd g = VectorXd::Zero(1);
  MatrixXd A(2, 1);
  A << 1.0, 1.0;
  VectorXd lo(2), hi(2);
  lo << 1.0, -2.0;
  hi << 2.0, -1.0;
  qp::DenseProblem prob(P, g, A, interval_cone(lo, hi));
  qp::Settings settings;
  settings.max_iters = 20000;
  CHECK_THROWS_AS(qp::solve(prob, settings), InfeasibleProblemError);
}

TEST_CASE("iteration cap returns a flagged, not thrown, result") {
  MatrixXd P = 2.0 * MatrixXd::Identity(3, 3);
  VectorXd g = VectorXd::Ones(3);
  MatrixXd A = MatrixXd::Identity(3, 3);
  qp::DenseProblem prob(P, g, A,
                        interval_cone(VectorXd::Constant(3, -1.0), VectorXd::Constant(3, 1.0)));
  qp::Settings settings;
  settings.max_iters = 2;
  settings.check_every = 1;
  settings.adaptive_rho = false;
  const qp::Result res = qp::solve(prob, settings);
  CHECK(!res.converged);
  CHECK(res.iters == 2);
  CHECK(res.primal_res < kInf);
}

TEST_CASE("warm start resumes from the previous solution") {
  MatrixXd P = 2.0 * MatrixXd::Identity(2, 2);
  VectorXd g(2);
  g << -2.0, -4.0;
  MatrixXd A = MatrixXd::Identity(2, 2);
  qp::DenseProblem prob(P, g, A,
                        interval_cone(VectorXd::Zero(2), VectorXd::Constant(2, 10.0)));
  qp::WarmState warm;
  const qp::Result first = qp::solve(prob, {}, &warm);
  CHECK(first.converged);
  qp::Settings quick;
  quick.check_every = 1;
  const qp::Result second = qp::solve(prob, quick, &warm);
  CHECK(second.converged);
  CHECK(second.iters <= first.iters);
  CHECK((second.x - first.x).cwiseAbs().maxCoeff() < 1e-6);
}
