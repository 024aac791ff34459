#pragma once

#include <Eigen/Dense>
#include <complex>
#include <map>
#include <string>
#include <vector>

#include "evcoord/common.hpp"

namespace evcoord {

enum class Phase : int { A = 0, B = 1, C = 2 };

Phase phase_from_char(char c);
char phase_to_char(Phase p);

/// One phase of one feeder node, e.g. "1:a". Serves a group of customers.
struct SupplyPoint {
  int node = 0;
  Phase phase = Phase::A;
  friend auto operator<=>(const SupplyPoint&, const SupplyPoint&) = default;
};

std::string to_string(const SupplyPoint& sp);
SupplyPoint supply_point_from_string(const std::string& s);

/// A line segment (i, j) with i nearer the root. z holds the per-phase-pair
/// complex impedance in ohms; pairs not on the segment stay zero.
struct LineSegment {
  int from = 0;
  int to = 0;
  std::vector<Phase> phases;
  std::complex<double> z[3][3] = {};

  bool has_phase(Phase p) const;
};

struct GridNode {
  int id = 0;
  std::vector<Phase> phases;
};

/// Radial unbalanced feeder: topology, impedances, voltage/power bases and the
/// customer-to-supply-point assignment.
struct GridSpec {
  std::vector<GridNode> nodes;  // includes the root
  int root = 0;
  std::vector<LineSegment> edges;
  double v0 = 1.0;          // squared voltage magnitude at the root, p.u.^2
  double base_kv = 1.0;     // per-phase voltage base, kV
  double base_kva = 1000.0; // power base, kVA (reporting; the kW->p.u.^2 map only needs base_kv)
  std::map<int, SupplyPoint> customers;

  /// Scale turning (ohm * kW) voltage-drop terms into p.u.^2.
  double kw_to_pu2() const { return 1e-3 / (base_kv * base_kv); }

  const GridNode* find_node(int id) const;
  bool node_has_phase(int id, Phase p) const;

  /// Checks radiality, phase consistency and customer assignments.
  /// Throws ValidationError listing every problem found.
  void validate() const;
};

/// Linear map from per-customer power injections to squared voltage magnitudes.
/// R and X are ohm-like (entries 2*Re{...} / -2*Im{...}); D and E are the
/// per-customer sensitivity columns already scaled to p.u.^2 per kW, so the
/// voltage equation V = Vtilde + sum_n (Dbar_n p_n + Ebar_n q_n) needs no
/// further unit handling.
struct SensitivityModel {
  std::vector<SupplyPoint> points;  // row order: ascending (node, phase)
  std::vector<int> customer_ids;   // column order: ascending customer id
  Eigen::MatrixXd R;               // K x K
  Eigen::MatrixXd X;               // K x K
  Eigen::MatrixXd theta;           // K x N, one 1 per column
  Eigen::MatrixXd D;               // K x N = -R * theta * kw_to_pu2
  Eigen::MatrixXd E;               // K x N = -X * theta * kw_to_pu2
  double kw_to_pu2 = 1e-3;

  int K() const { return static_cast<int>(points.size()); }
  int N() const { return static_cast<int>(customer_ids.size()); }

  int index_of(const SupplyPoint& sp) const;  // throws InvalidQueryError
  int customer_column(int customer_id) const;

  Eigen::VectorXd d_col(int col) const { return D.col(col); }
  Eigen::VectorXd e_col(int col) const { return E.col(col); }

  /// KT x T block-diagonal expansion holding T copies of column `col` of D.
  Eigen::MatrixXd dbar(int col, int T) const;
  Eigen::MatrixXd ebar(int col, int T) const;
};

/// Non-EV load time series per supply point (kW / kVAr). Missing points mean
/// zero load.
struct LoadSeries {
  int T = 0;
  std::map<SupplyPoint, Eigen::VectorXd> p_kw;
  std::map<SupplyPoint, Eigen::VectorXd> q_kvar;
};

/// Voltage band data for the coupling constraint
///   sum_n Gamma_n p_n + Xi_n q_n <= w  <=>  vlo <= V <= vhi.
struct VoltageEnvelope {
  Eigen::VectorXd vtilde;  // KT baseline, p.u.^2
  Eigen::VectorXd vlo;     // KT
  Eigen::VectorXd vhi;     // KT
  Eigen::VectorXd w;       // 2KT = [vhi - vtilde; vtilde - vlo]

  Eigen::MatrixXd gamma(const SensitivityModel& sens, int col) const;  // [Dbar; -Dbar]
  Eigen::MatrixXd xi(const SensitivityModel& sens, int col) const;     // [Ebar; -Ebar]
};

/// Sum of impedances z^{uv,phi psi} over the edges shared by the root->i and
/// root->j paths. Edges lacking the phase pair contribute zero.
std::complex<double> common_path_impedance(const GridSpec& grid, int i, int j, Phase phi,
                                           Phase psi);

SensitivityModel build_sensitivity(const GridSpec& grid);

/// Vtilde(t) = V0 - (R*Ptilde(t) + X*Qtilde(t)) * kw_to_pu2, concatenated over t.
Eigen::VectorXd baseline_voltage(const GridSpec& grid, const SensitivityModel& sens,
                                 const LoadSeries& loads);

/// V = vtilde + sum_n (Dbar_n p_n + Ebar_n q_n); p and q are T x N (kW, kVAr).
Eigen::VectorXd evaluate_voltage(const Eigen::VectorXd& vtilde, const SensitivityModel& sens,
                                 const Eigen::MatrixXd& p, const Eigen::MatrixXd& q);

VoltageEnvelope build_coupling(const SensitivityModel& sens, const Eigen::VectorXd& vtilde,
                               const Eigen::VectorXd& vlo, const Eigen::VectorXd& vhi);

}  // namespace evcoord
