#include "evcoord/ev.hpp"

#include <cmath>
#include <string>

namespace evcoord {

void EvParams::validate(int T) const {
  std::vector<std::string> problems;
  const std::string tag = "ev " + std::to_string(id) + ": ";

  if (T <= 0) problems.push_back(tag + "horizon must be positive");
  if (arrival < 0 || arrival > T) problems.push_back(tag + "arrival index out of [0,T]");
  if (departure < 1 || departure > T) problems.push_back(tag + "departure index out of [1,T]");
  if (arrival >= departure) problems.push_back(tag + "arrival must precede departure");
  if (rate_min > 0.0 || rate_max < 0.0) {
    problems.push_back(tag + "charge-rate bounds must satisfy rate_min <= 0 <= rate_max");
  }
  if (inverter_kva < 0.0) problems.push_back(tag + "inverter capacity must be nonnegative");
  if (soc_min > soc_init || soc_init > soc_max) {
    problems.push_back(tag + "initial SoC outside [soc_min, soc_max]");
  }
  if (soc_min > soc_target || soc_target > soc_max) {
    problems.push_back(tag + "target SoC outside [soc_min, soc_max]");
  }
  if (kappa < 0.0) problems.push_back(tag + "kappa must be nonnegative");
  if (dt_hours <= 0.0) problems.push_back(tag + "slot length must be positive");
  if (price.size() != T) {
    problems.push_back(tag + "price profile has length " + std::to_string(price.size()) +
                       ", expected " + std::to_string(T));
  }

  // target must be reachable by charging flat out between arrival and departure
  if (arrival < departure &&
      soc_target > soc_init + dt_hours * (departure - arrival) * rate_max + 1e-12) {
    problems.push_back(tag + "target SoC unreachable before departure");
  }

  if (!problems.empty()) throw InfeasibleParamsError(std::move(problems));
}

Eigen::MatrixXd EvFeasibility::cumsum_matrix(int T) {
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(T, T);
  for (int i = 0; i < T; ++i) M.row(i).head(i + 1).setOnes();
  return M;
}

EvFeasibility build_feasibility(const EvParams& params, int T) {
  params.validate(T);

  EvFeasibility feas;
  feas.T = T;
  feas.disc_radius = params.inverter_kva;
  feas.alpha_lo = (params.soc_min - params.soc_init) / params.dt_hours;
  feas.alpha_hi = (params.soc_max - params.soc_init) / params.dt_hours;
  feas.demand = (params.soc_target - params.soc_init) / params.dt_hours;
  feas.rate_min = params.rate_min;
  feas.rate_max = params.rate_max;

  feas.avail = Eigen::VectorXd::Zero(T);
  for (int t = 1; t <= T; ++t) {
    if (params.arrival < t && t <= params.departure) feas.avail(t - 1) = 1.0;
  }

  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(T, T);
  const Eigen::MatrixXd M = EvFeasibility::cumsum_matrix(T);
  const Eigen::MatrixXd IminusL = I - feas.avail.asDiagonal().toDenseMatrix();

  feas.F = Eigen::MatrixXd::Zero(8 * T + 1, 2 * T);
  feas.f = Eigen::VectorXd::Zero(8 * T + 1);

  int r = 0;
  feas.F.block(r, 0, T, T) = I;
  feas.f.segment(r, T).setConstant(params.rate_min);
  r += T;
  feas.F.block(r, 0, T, T) = -I;
  feas.f.segment(r, T).setConstant(-params.rate_max);
  r += T;
  feas.F.block(r, 0, T, T) = M;
  feas.f.segment(r, T).setConstant(feas.alpha_lo);
  r += T;
  feas.F.block(r, 0, T, T) = -M;
  feas.f.segment(r, T).setConstant(-feas.alpha_hi);
  r += T;
  feas.F.block(r, 0, 1, T).setOnes();
  feas.f(r) = feas.demand;
  r += 1;
  feas.F.block(r, 0, T, T) = IminusL;
  r += T;
  feas.F.block(r, 0, T, T) = -IminusL;
  r += T;
  feas.F.block(r, T, T, T) = IminusL;
  r += T;
  feas.F.block(r, T, T, T) = -IminusL;

  return feas;
}

ViolationReport check_feasible(const EvFeasibility& feas, const Eigen::VectorXd& p,
                               const Eigen::VectorXd& q, double tol) {
  if (p.size() != feas.T || q.size() != feas.T) {
    throw DimensionError("profile length does not match the feasibility horizon");
  }

  ViolationReport report;
  Eigen::VectorXd pq(2 * feas.T);
  pq << p, q;
  const Eigen::VectorXd lhs = feas.F * pq;
  for (int r = 0; r < feas.rows(); ++r) {
    const double slack = lhs(r) - feas.f(r);
    if (slack < -tol) report.rows.push_back({r, -slack});
  }

  const double radius_sq = feas.disc_radius * feas.disc_radius;
  for (int t = 0; t < feas.T; ++t) {
    const double overflow = p(t) * p(t) + q(t) * q(t) - radius_sq;
    if (overflow > tol) report.discs.push_back({t, overflow});
  }
  return report;
}

double operational_cost(const Eigen::VectorXd& p, const EvParams& params) {
  if (p.size() != params.price.size()) {
    throw DimensionError("profile and price must have the same length");
  }
  return params.dt_hours * params.price.dot(p) + params.kappa * p.squaredNorm();
}

Eigen::VectorXd soc_profile(const Eigen::VectorXd& p, const EvParams& params) {
  Eigen::VectorXd soc(p.size());
  double acc = params.soc_init;
  for (Eigen::Index t = 0; t < p.size(); ++t) {
    acc += params.dt_hours * p(t);
    soc(t) = acc;
  }
  return soc;
}

}  // namespace evcoord
