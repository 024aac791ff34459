#pragma once

#include <Eigen/Dense>
#include <vector>

#include "evcoord/common.hpp"

namespace evcoord {

/// One EV customer's design parameters plus the tariff it faces.
/// Slot t covers [dt*(t-1), dt*t] hours; the EV is grid-connected for slots
/// arrival < t <= departure (1-based).
struct EvParams {
  int id = 0;
  int arrival = 0;
  int departure = 0;
  double battery_kwh = 0.0;   // capacity; kept for reporting and randomization only
  double inverter_kva = 0.0;  // apparent-power limit of the battery inverter
  double soc_init = 0.0;      // kWh
  double soc_target = 0.0;
  double soc_min = 0.0;
  double soc_max = 0.0;
  double rate_max = 0.0;  // kW, >= 0
  double rate_min = 0.0;  // kW, <= 0 (discharge)
  double kappa = 0.0;     // charge-cycle regularization weight
  Eigen::VectorXd price;  // $/kWh per slot, length T
  double dt_hours = 0.5;

  /// Throws InfeasibleParamsError listing every violated parameter condition,
  /// including target reachability before departure.
  void validate(int T) const;
};

struct RowViolation {
  int row = 0;
  double amount = 0.0;  // f(row) - (F [p;q])(row), positive when violated
};

struct DiscViolation {
  int t = 0;              // 0-based slot
  double amount = 0.0;    // p^2 + q^2 - s_max^2, positive when violated
};

struct ViolationReport {
  std::vector<RowViolation> rows;
  std::vector<DiscViolation> discs;
  bool ok() const { return rows.empty() && discs.empty(); }
};

/// The polyhedral part F [p;q] >= f of one EV's feasibility set plus the
/// per-slot inverter disc radius. Row blocks in order:
///   [0,T)      p >= rate_min
///   [T,2T)    -p >= -rate_max
///   [2T,3T)    cumulative sums >= alpha_lo
///   [3T,4T)   -cumulative sums >= -alpha_hi
///   [4T]       total energy >= demand
///   (4T,5T]    (I-L) p >= 0
///   (5T,6T]    (L-I) p >= 0
///   (6T,7T]    (I-L) q >= 0
///   (7T,8T]    (L-I) q >= 0
struct EvFeasibility {
  int T = 0;
  Eigen::MatrixXd F;       // (8T+1) x 2T
  Eigen::VectorXd f;       // 8T+1
  Eigen::VectorXd avail;   // diagonal of L: 1 while grid-connected
  double disc_radius = 0.0;
  double alpha_lo = 0.0;   // (soc_min - soc_init) / dt
  double alpha_hi = 0.0;   // (soc_max - soc_init) / dt
  double demand = 0.0;     // (soc_target - soc_init) / dt
  double rate_min = 0.0;
  double rate_max = 0.0;

  int rows() const { return 8 * T + 1; }

  /// Lower-triangular all-ones matrix mapping a profile to its running sums.
  static Eigen::MatrixXd cumsum_matrix(int T);
};

EvFeasibility build_feasibility(const EvParams& params, int T);

/// Reports every violated polyhedral row (beyond tol) and every slot whose
/// apparent power exceeds the inverter disc (beyond tol).
ViolationReport check_feasible(const EvFeasibility& feas, const Eigen::VectorXd& p,
                               const Eigen::VectorXd& q, double tol = 1e-6);

/// dt * price' p + kappa * p' p. Negative values are net compensation.
double operational_cost(const Eigen::VectorXd& p, const EvParams& params);

/// soc(t) = soc_init + dt * sum_{j<=t} p(j)
Eigen::VectorXd soc_profile(const Eigen::VectorXd& p, const EvParams& params);

}  // namespace evcoord
