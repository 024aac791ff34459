#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "evcoord/grid.hpp"

using namespace evcoord;
using Complex = std::complex<double>;

namespace {

// the two-node three-phase circuit with the printed self impedances
GridSpec two_node_grid(bool with_mutual = false) {
  GridSpec g;
  g.nodes = {{0, {Phase::A, Phase::B, Phase::C}}, {1, {Phase::A, Phase::B, Phase::C}}};
  g.root = 0;
  g.base_kv = 1.0;
  g.base_kva = 1000.0;
  g.v0 = 1.0;

  LineSegment e;
  e.from = 0;
  e.to = 1;
  e.phases = {Phase::A, Phase::B, Phase::C};
  e.z[0][0] = {0.1313, 0.3856};
  e.z[1][1] = {0.1278, 0.3969};
  e.z[2][2] = {0.1293, 0.3920};
  if (with_mutual) {
    const Complex m{0.04, 0.09};
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        if (a != b) e.z[a][b] = m;
      }
    }
  }
  g.edges.push_back(e);
  return g;
}

}  // namespace

TEST_CASE("common path impedance on the two-node circuit matches the line data") {
  const GridSpec g = two_node_grid();
  const Complex z = common_path_impedance(g, 1, 1, Phase::A, Phase::A);
  CHECK(z.real() == doctest::Approx(0.1313).epsilon(1e-12));
  CHECK(z.imag() == doctest::Approx(0.3856).epsilon(1e-12));
}

TEST_CASE("disjoint laterals share no path impedance") {
  GridSpec g;
  g.nodes = {{0, {Phase::A, Phase::B, Phase::C}}, {1, {Phase::A}}, {2, {Phase::A}}};
  g.root = 0;
  LineSegment e1;
  e1.from = 0;
  e1.to = 1;
  e1.phases = {Phase::A};
  e1.z[0][0] = {0.5, 1.0};
  LineSegment e2 = e1;
  e2.to = 2;
  g.edges = {e1, e2};

  CHECK(common_path_impedance(g, 1, 2, Phase::A, Phase::A) == Complex{0.0, 0.0});
}

TEST_CASE("three-edge chain: shared path of nodes 3 and 2 is two segments") {
  GridSpec g;
  g.nodes = {{0, {Phase::A, Phase::B, Phase::C}}, {1, {Phase::A}}, {2, {Phase::A}}, {3, {Phase::A}}};
  g.root = 0;
  const Complex z{0.2, 0.4};
  for (int i = 0; i < 3; ++i) {
    LineSegment e;
    e.from = i;
    e.to = i + 1;
    e.phases = {Phase::A};
    e.z[0][0] = z;
    g.edges.push_back(e);
  }
  // path(3) = {01,12,23}, path(2) = {01,12}; intersection has two edges
  const Complex got = common_path_impedance(g, 3, 2, Phase::A, Phase::A);
  CHECK(got.real() == doctest::Approx((2.0 * z).real()));
  CHECK(got.imag() == doctest::Approx((2.0 * z).imag()));
}

TEST_CASE("common path impedance rejects unknown nodes and phases") {
  const GridSpec g = two_node_grid();
  CHECK_THROWS_AS(common_path_impedance(g, 1, 7, Phase::A, Phase::A), InvalidQueryError);
  GridSpec h = g;
  h.nodes[1].phases = {Phase::A};
  CHECK_THROWS_AS(common_path_impedance(h, 1, 1, Phase::A, Phase::B), InvalidQueryError);
}

TEST_CASE("sensitivity entries: same-phase diagonal is (2r, 2x)") {
  const GridSpec g = two_node_grid();
  const SensitivityModel sens = build_sensitivity(g);
  const int ia = sens.index_of({1, Phase::A});
  const int ib = sens.index_of({1, Phase::B});
  CHECK(sens.R(ia, ia) == doctest::Approx(2 * 0.1313));
  CHECK(sens.X(ia, ia) == doctest::Approx(2 * 0.3856));
  CHECK(sens.R(ib, ib) == doctest::Approx(2 * 0.1278));
  // no mutual terms: off-diagonal entries vanish
  CHECK(sens.R(ia, ib) == doctest::Approx(0.0));
  CHECK(sens.X(ia, ib) == doctest::Approx(0.0));
}

TEST_CASE("sensitivity entries: cross-phase rotation evaluated independently") {
  GridSpec g = two_node_grid();
  g.edges[0].z[0][1] = {0.1, 0.2};
  g.edges[0].z[1][0] = {0.1, 0.2};
  const SensitivityModel sens = build_sensitivity(g);

  // independent evaluation of 2 Re / -2 Im of (Z*) omega^([[a]]-[[b]])
  const Complex z{0.1, 0.2};
  const Complex omega = std::exp(Complex{0.0, -2.0 * std::numbers::pi / 3.0});
  const Complex rot = std::conj(z) * std::pow(omega, -1);
  const int ia = sens.index_of({1, Phase::A});
  const int ib = sens.index_of({1, Phase::B});
  CHECK(sens.R(ia, ib) == doctest::Approx(2.0 * rot.real()).epsilon(1e-12));
  CHECK(sens.X(ia, ib) == doctest::Approx(-2.0 * rot.imag()).epsilon(1e-12));
}

TEST_CASE("theta columns sum to one; row sums count customers per point") {
  GridSpec g = two_node_grid();
  g.customers[1] = {1, Phase::A};
  g.customers[2] = {1, Phase::A};
  g.customers[3] = {1, Phase::B};
  g.customers[4] = {1, Phase::C};
  const SensitivityModel sens = build_sensitivity(g);

  CHECK(sens.theta.colwise().sum().isOnes());
  CHECK(sens.theta.row(sens.index_of({1, Phase::A})).sum() == doctest::Approx(2.0));
  CHECK(sens.theta.row(sens.index_of({1, Phase::B})).sum() == doctest::Approx(1.0));
  CHECK(sens.theta.sum() == doctest::Approx(4.0));
}

TEST_CASE("diagonal R entries are positive along resistive paths") {
  const SensitivityModel sens = build_sensitivity(two_node_grid(true));
  for (int k = 0; k < sens.K(); ++k) CHECK(sens.R(k, k) > 0.0);
}

TEST_CASE("baseline voltage: zero loads give the nominal profile") {
  GridSpec g = two_node_grid();
  const SensitivityModel sens = build_sensitivity(g);
  LoadSeries loads;
  loads.T = 5;
  const Eigen::VectorXd vtilde = baseline_voltage(g, sens, loads);
  REQUIRE(vtilde.size() == sens.K() * 5);
  CHECK((vtilde.array() == g.v0).all());
}

TEST_CASE("baseline voltage: a single 1 kW load drops one entry by R*scale") {
  GridSpec g = two_node_grid();
  const SensitivityModel sens = build_sensitivity(g);
  LoadSeries loads;
  loads.T = 1;
  loads.p_kw[{1, Phase::A}] = Eigen::VectorXd::Constant(1, 1.0);
  const Eigen::VectorXd vtilde = baseline_voltage(g, sens, loads);

  const int ia = sens.index_of({1, Phase::A});
  const double expected = g.v0 - sens.R(ia, ia) * 1.0 * g.kw_to_pu2();
  CHECK(vtilde(ia) == doctest::Approx(expected).epsilon(1e-14));
  // other phases untouched without mutual impedance
  CHECK(vtilde(sens.index_of({1, Phase::B})) == doctest::Approx(g.v0));
}

TEST_CASE("baseline voltage rejects series with the wrong length") {
  GridSpec g = two_node_grid();
  const SensitivityModel sens = build_sensitivity(g);
  LoadSeries loads;
  loads.T = 4;
  loads.p_kw[{1, Phase::A}] = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(baseline_voltage(g, sens, loads), DimensionError);
}

TEST_CASE("evaluate_voltage: zero profiles return the baseline") {
  GridSpec g = two_node_grid(true);
  g.customers[1] = {1, Phase::A};
  g.customers[2] = {1, Phase::C};
  const SensitivityModel sens = build_sensitivity(g);
  const int T = 4;
  const Eigen::VectorXd vtilde = Eigen::VectorXd::Constant(sens.K() * T, 1.0);
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(T, sens.N());
  CHECK((evaluate_voltage(vtilde, sens, zero, zero) - vtilde).norm() == doctest::Approx(0.0));
}

TEST_CASE("evaluate_voltage: charging on a phase depresses that phase") {
  GridSpec g = two_node_grid();
  g.customers[1] = {1, Phase::A};
  const SensitivityModel sens = build_sensitivity(g);
  const int T = 2;
  const Eigen::VectorXd vtilde = Eigen::VectorXd::Constant(sens.K() * T, 1.0);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(T, 1), q = Eigen::MatrixXd::Zero(T, 1);
  p(0, 0) = 7.0;
  const Eigen::VectorXd v = evaluate_voltage(vtilde, sens, p, q);
  CHECK(v(sens.index_of({1, Phase::A})) < 1.0);
  CHECK(v(sens.K() + sens.index_of({1, Phase::A})) == doctest::Approx(1.0));  // t=2 untouched
}

TEST_CASE("evaluate_voltage is linear: superposition holds exactly") {
  GridSpec g = two_node_grid(true);
  for (int i = 1; i <= 4; ++i) g.customers[i] = {1, static_cast<Phase>((i - 1) % 3)};
  const SensitivityModel sens = build_sensitivity(g);
  const int T = 6;
  const Eigen::VectorXd vtilde = Eigen::VectorXd::Constant(sens.K() * T, 1.0);

  std::mt19937 rng(7);
  std::uniform_real_distribution<double> dist(-5.0, 5.0);
  auto rand_mat = [&] {
    Eigen::MatrixXd m(T, sens.N());
    for (int r = 0; r < m.rows(); ++r) {
      for (int c = 0; c < m.cols(); ++c) m(r, c) = dist(rng);
    }
    return m;
  };
  const Eigen::MatrixXd p1 = rand_mat(), p2 = rand_mat();
  const Eigen::MatrixXd zq = Eigen::MatrixXd::Zero(T, sens.N());

  const Eigen::VectorXd lhs = evaluate_voltage(vtilde, sens, p1 + p2, zq) - vtilde;
  const Eigen::VectorXd rhs = (evaluate_voltage(vtilde, sens, p1, zq) - vtilde) +
                              (evaluate_voltage(vtilde, sens, p2, zq) - vtilde);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("finite-difference slope of evaluate_voltage equals the Dbar entry") {
  GridSpec g = two_node_grid(true);
  g.customers[1] = {1, Phase::B};
  g.customers[2] = {1, Phase::C};
  const SensitivityModel sens = build_sensitivity(g);
  const int T = 3;
  const Eigen::VectorXd vtilde = Eigen::VectorXd::Constant(sens.K() * T, 1.0);
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(T, sens.N());

  const Eigen::MatrixXd dbar = sens.dbar(1, T);  // customer id 2
  for (int t = 0; t < T; ++t) {
    Eigen::MatrixXd p = zero;
    p(t, 1) = 1.0;
    const Eigen::VectorXd diff = evaluate_voltage(vtilde, sens, p, zero) - vtilde;
    CHECK((diff - dbar.col(t)).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("coupling form and voltage band are the same constraint") {
  GridSpec g = two_node_grid(true);
  for (int i = 1; i <= 3; ++i) g.customers[i] = {1, static_cast<Phase>(i - 1)};
  const SensitivityModel sens = build_sensitivity(g);
  const int T = 4;
  const int KT = sens.K() * T;
  const Eigen::VectorXd vtilde = Eigen::VectorXd::Constant(KT, 1.0);
  const Eigen::VectorXd vlo = Eigen::VectorXd::Constant(KT, 0.9025);
  const Eigen::VectorXd vhi = Eigen::VectorXd::Constant(KT, 1.1025);
  const VoltageEnvelope env = build_coupling(sens, vtilde, vlo, vhi);

  REQUIRE(env.w.size() == 2 * KT);

  std::mt19937 rng(11);
  std::uniform_real_distribution<double> dist(-80.0, 80.0);
  for (int trial = 0; trial < 25; ++trial) {
    Eigen::MatrixXd p(T, sens.N()), q(T, sens.N());
    for (int r = 0; r < T; ++r) {
      for (int c = 0; c < sens.N(); ++c) {
        p(r, c) = dist(rng);
        q(r, c) = dist(rng);
      }
    }
    // slow route: materialized Gamma/Xi blocks
    Eigen::VectorXd lhs = Eigen::VectorXd::Zero(2 * KT);
    for (int n = 0; n < sens.N(); ++n) {
      lhs += env.gamma(sens, n) * p.col(n) + env.xi(sens, n) * q.col(n);
    }
    const Eigen::VectorXd v = evaluate_voltage(vtilde, sens, p, q);
    // slack identity: w - sum == [vhi - V; V - vlo]
    const Eigen::VectorXd slack = env.w - lhs;
    CHECK((slack.head(KT) - (vhi - v)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((slack.tail(KT) - (v - vlo)).cwiseAbs().maxCoeff() < 1e-12);
    const bool in_band = (v.array() >= vlo.array()).all() && (v.array() <= vhi.array()).all();
    const bool coupled = (lhs.array() <= env.w.array()).all();
    CHECK(in_band == coupled);
  }
}

TEST_CASE("two-node circuit at T=48 has a 288-entry headroom vector") {
  const SensitivityModel sens = build_sensitivity(two_node_grid());
  const int KT = sens.K() * 48;
  const Eigen::VectorXd vtilde = Eigen::VectorXd::Constant(KT, 1.0);
  const VoltageEnvelope env =
      build_coupling(sens, vtilde, Eigen::VectorXd::Constant(KT, 0.9),
                     Eigen::VectorXd::Constant(KT, 1.1));
  CHECK(env.w.size() == 288);
}

TEST_CASE("a profile that breaches the upper band violates exactly one coupling row") {
  GridSpec g = two_node_grid();
  g.customers[1] = {1, Phase::A};
  const SensitivityModel sens = build_sensitivity(g);
  const int T = 3;
  const int KT = sens.K() * T;
  const Eigen::VectorXd vtilde = Eigen::VectorXd::Constant(KT, 1.0);
  const VoltageEnvelope env =
      build_coupling(sens, vtilde, Eigen::VectorXd::Constant(KT, 0.99),
                     Eigen::VectorXd::Constant(KT, 1.01));

  // discharge hard at t=2 only: raises phase a above vhi there and nowhere else
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(T, 1), q = Eigen::MatrixXd::Zero(T, 1);
  p(1, 0) = -60.0;
  const Eigen::VectorXd lhs = env.gamma(sens, 0) * p.col(0) + env.xi(sens, 0) * q.col(0);
  int violated = 0, where = -1;
  for (int i = 0; i < lhs.size(); ++i) {
    if (lhs(i) > env.w(i)) {
      ++violated;
      where = i;
    }
  }
  CHECK(violated == 1);
  CHECK(where == 1 * sens.K() + sens.index_of({1, Phase::A}));  // upper block, t=2
}

TEST_CASE("grid validation rejects cycles, phase mismatches and bad customers") {
  GridSpec g = two_node_grid();
  g.nodes.push_back({2, {Phase::A}});
  LineSegment extra;
  extra.from = 1;
  extra.to = 2;
  extra.phases = {Phase::A};
  g.edges.push_back(extra);
  LineSegment dup;
  dup.from = 0;
  dup.to = 2;
  dup.phases = {Phase::B};  // node 2 lacks phase b, and node 2 gains two parents
  g.edges.push_back(dup);
  g.customers[9] = {5, Phase::A};

  try {
    g.validate();
    FAIL("validation should have thrown");
  } catch (const ValidationError& err) {
    CHECK(err.problems().size() >= 3);
  }
}
