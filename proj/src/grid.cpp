#include "evcoord/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace evcoord {

namespace {

// omega^d with omega = exp(-2*pi*i/3); d may be negative.
std::complex<double> omega_pow(int d) {
  const double angle = -2.0 * std::numbers::pi * static_cast<double>(d) / 3.0;
  return {std::cos(angle), std::sin(angle)};
}

}  // namespace

Phase phase_from_char(char c) {
  switch (c) {
    case 'a': case 'A': return Phase::A;
    case 'b': case 'B': return Phase::B;
    case 'c': case 'C': return Phase::C;
    default: throw InvalidQueryError(std::string("unknown phase '") + c + "'");
  }
}

char phase_to_char(Phase p) {
  switch (p) {
    case Phase::A: return 'a';
    case Phase::B: return 'b';
    case Phase::C: return 'c';
  }
  throw InvalidQueryError("unknown phase enum value");
}

std::string to_string(const SupplyPoint& sp) {
  return std::to_string(sp.node) + ":" + phase_to_char(sp.phase);
}

SupplyPoint supply_point_from_string(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos || colon + 2 != s.size()) {
    throw InvalidQueryError("supply point must look like '<node>:<phase>', got '" + s + "'");
  }
  SupplyPoint sp;
  try {
    sp.node = std::stoi(s.substr(0, colon));
  } catch (const std::exception&) {
    throw InvalidQueryError("bad node id in supply point '" + s + "'");
  }
  sp.phase = phase_from_char(s[colon + 1]);
  return sp;
}

bool LineSegment::has_phase(Phase p) const {
  return std::find(phases.begin(), phases.end(), p) != phases.end();
}

const GridNode* GridSpec::find_node(int id) const {
  for (const auto& n : nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

bool GridSpec::node_has_phase(int id, Phase p) const {
  const GridNode* n = find_node(id);
  if (!n) return false;
  return std::find(n->phases.begin(), n->phases.end(), p) != n->phases.end();
}

void GridSpec::validate() const {
  std::vector<std::string> problems;

  if (!find_node(root)) problems.push_back("root node " + std::to_string(root) + " not in node list");

  std::set<int> ids;
  for (const auto& n : nodes) {
    if (!ids.insert(n.id).second) problems.push_back("duplicate node id " + std::to_string(n.id));
    if (n.phases.empty()) problems.push_back("node " + std::to_string(n.id) + " has no phases");
  }

  std::set<int> reached{root};
  std::map<int, int> parent;
  for (const auto& e : edges) {
    if (e.from == e.to) {
      problems.push_back("self loop at node " + std::to_string(e.from));
      continue;
    }
    if (!find_node(e.from) || !find_node(e.to)) {
      problems.push_back("edge (" + std::to_string(e.from) + "," + std::to_string(e.to) +
                         ") references unknown node");
      continue;
    }
    if (parent.count(e.to)) {
      problems.push_back("node " + std::to_string(e.to) + " has two parents (graph not radial)");
    }
    parent[e.to] = e.from;
    for (Phase p : e.phases) {
      if (!node_has_phase(e.from, p) || !node_has_phase(e.to, p)) {
        problems.push_back("edge (" + std::to_string(e.from) + "," + std::to_string(e.to) +
                           ") carries phase '" + phase_to_char(p) +
                           "' missing at one of its end nodes");
      }
    }
  }
  if (parent.count(root)) problems.push_back("root node has a parent edge");

  // every non-root node must reach the root through parent links
  for (const auto& n : nodes) {
    if (n.id == root) continue;
    int cur = n.id;
    int hops = 0;
    bool ok = false;
    while (hops++ <= static_cast<int>(nodes.size())) {
      auto it = parent.find(cur);
      if (it == parent.end()) break;
      cur = it->second;
      if (cur == root) { ok = true; break; }
    }
    if (!ok) {
      problems.push_back("node " + std::to_string(n.id) + " is not connected to the root");
    }
  }

  for (const auto& [cust, sp] : customers) {
    if (sp.node == root) {
      problems.push_back("customer " + std::to_string(cust) + " assigned to the root node");
    } else if (!node_has_phase(sp.node, sp.phase)) {
      problems.push_back("customer " + std::to_string(cust) + " assigned to missing supply point " +
                         to_string(sp));
    }
  }

  if (!problems.empty()) throw ValidationError(std::move(problems));
}

int SensitivityModel::index_of(const SupplyPoint& sp) const {
  const auto it = std::lower_bound(points.begin(), points.end(), sp);
  if (it == points.end() || !(*it == sp)) {
    throw InvalidQueryError("unknown supply point " + to_string(sp));
  }
  return static_cast<int>(it - points.begin());
}

int SensitivityModel::customer_column(int customer_id) const {
  const auto it = std::lower_bound(customer_ids.begin(), customer_ids.end(), customer_id);
  if (it == customer_ids.end() || *it != customer_id) {
    throw InvalidQueryError("unknown customer id " + std::to_string(customer_id));
  }
  return static_cast<int>(it - customer_ids.begin());
}

Eigen::MatrixXd SensitivityModel::dbar(int col, int T) const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(K()) * T, T);
  for (int t = 0; t < T; ++t) out.block(static_cast<Eigen::Index>(t) * K(), t, K(), 1) = D.col(col);
  return out;
}

Eigen::MatrixXd SensitivityModel::ebar(int col, int T) const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(K()) * T, T);
  for (int t = 0; t < T; ++t) out.block(static_cast<Eigen::Index>(t) * K(), t, K(), 1) = E.col(col);
  return out;
}

namespace {

// Edge indices on the unique path from the root to `node`.
std::vector<int> path_edges(const GridSpec& grid, int node) {
  std::map<int, int> incoming;  // to -> edge index
  for (int idx = 0; idx < static_cast<int>(grid.edges.size()); ++idx) {
    incoming[grid.edges[idx].to] = idx;
  }
  std::vector<int> out;
  int cur = node;
  while (cur != grid.root) {
    auto it = incoming.find(cur);
    if (it == incoming.end()) {
      throw InvalidQueryError("node " + std::to_string(node) + " has no path to the root");
    }
    out.push_back(it->second);
    cur = grid.edges[it->second].from;
  }
  return out;
}

}  // namespace

std::complex<double> common_path_impedance(const GridSpec& grid, int i, int j, Phase phi,
                                           Phase psi) {
  if (!grid.find_node(i)) throw InvalidQueryError("unknown node " + std::to_string(i));
  if (!grid.find_node(j)) throw InvalidQueryError("unknown node " + std::to_string(j));
  if (!grid.node_has_phase(i, phi)) {
    throw InvalidQueryError("node " + std::to_string(i) + " has no phase '" + phase_to_char(phi) + "'");
  }
  if (!grid.node_has_phase(j, psi)) {
    throw InvalidQueryError("node " + std::to_string(j) + " has no phase '" + phase_to_char(psi) + "'");
  }

  const std::vector<int> pi = path_edges(grid, i);
  const std::vector<int> pj = path_edges(grid, j);
  const std::set<int> setj(pj.begin(), pj.end());

  std::complex<double> total{0.0, 0.0};
  for (int idx : pi) {
    if (!setj.count(idx)) continue;
    const LineSegment& e = grid.edges[idx];
    // segments without the pair contribute nothing (no mutual coupling)
    if (!e.has_phase(phi) || !e.has_phase(psi)) continue;
    total += e.z[static_cast<int>(phi)][static_cast<int>(psi)];
  }
  return total;
}

SensitivityModel build_sensitivity(const GridSpec& grid) {
  grid.validate();

  SensitivityModel m;
  m.kw_to_pu2 = grid.kw_to_pu2();

  for (const auto& n : grid.nodes) {
    if (n.id == grid.root) continue;
    for (Phase p : n.phases) m.points.push_back({n.id, p});
  }
  std::sort(m.points.begin(), m.points.end());

  for (const auto& [cust, sp] : grid.customers) m.customer_ids.push_back(cust);
  std::sort(m.customer_ids.begin(), m.customer_ids.end());

  const int K = m.K();
  const int N = m.N();

  m.R.resize(K, K);
  m.X.resize(K, K);
  for (int r = 0; r < K; ++r) {
    for (int col = 0; col < K; ++col) {
      const SupplyPoint& a = m.points[r];
      const SupplyPoint& b = m.points[col];
      const std::complex<double> zpath =
          common_path_impedance(grid, a.node, b.node, a.phase, b.phase);
      const std::complex<double> rotated =
          std::conj(zpath) * omega_pow(static_cast<int>(a.phase) - static_cast<int>(b.phase));
      m.R(r, col) = 2.0 * rotated.real();
      m.X(r, col) = -2.0 * rotated.imag();
    }
  }

  m.theta = Eigen::MatrixXd::Zero(K, N);
  for (int col = 0; col < N; ++col) {
    const SupplyPoint sp = grid.customers.at(m.customer_ids[col]);
    m.theta(m.index_of(sp), col) = 1.0;
  }

  m.D = -(m.R * m.theta) * m.kw_to_pu2;
  m.E = -(m.X * m.theta) * m.kw_to_pu2;
  return m;
}

Eigen::VectorXd baseline_voltage(const GridSpec& grid, const SensitivityModel& sens,
                                 const LoadSeries& loads) {
  const int K = sens.K();
  const int T = loads.T;

  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(K, T);
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(K, T);
  for (const auto& [sp, series] : loads.p_kw) {
    if (series.size() != T) {
      throw DimensionError("load series for " + to_string(sp) + " has length " +
                           std::to_string(series.size()) + ", expected " + std::to_string(T));
    }
    P.row(sens.index_of(sp)) += series.transpose();
  }
  for (const auto& [sp, series] : loads.q_kvar) {
    if (series.size() != T) {
      throw DimensionError("reactive load series for " + to_string(sp) + " has length " +
                           std::to_string(series.size()) + ", expected " + std::to_string(T));
    }
    Q.row(sens.index_of(sp)) += series.transpose();
  }

  Eigen::VectorXd vtilde(static_cast<Eigen::Index>(K) * T);
  const Eigen::VectorXd v0 = Eigen::VectorXd::Constant(K, grid.v0);
  for (int t = 0; t < T; ++t) {
    vtilde.segment(static_cast<Eigen::Index>(t) * K, K) =
        v0 - (sens.R * P.col(t) + sens.X * Q.col(t)) * sens.kw_to_pu2;
  }
  return vtilde;
}

Eigen::VectorXd evaluate_voltage(const Eigen::VectorXd& vtilde, const SensitivityModel& sens,
                                 const Eigen::MatrixXd& p, const Eigen::MatrixXd& q) {
  const int K = sens.K();
  if (vtilde.size() % K != 0) throw DimensionError("baseline length is not a multiple of K");
  const int T = static_cast<int>(vtilde.size()) / K;
  if (p.rows() != T || q.rows() != T) {
    throw DimensionError("profile length " + std::to_string(p.rows()) + " does not match horizon " +
                         std::to_string(T));
  }
  if (p.cols() != sens.N() || q.cols() != sens.N()) {
    throw DimensionError("expected one profile column per customer");
  }

  Eigen::VectorXd v = vtilde;
  for (int t = 0; t < T; ++t) {
    // V(t) += D * P(t) + E * Q(t), customer-indexed
    v.segment(static_cast<Eigen::Index>(t) * K, K) +=
        sens.D * p.row(t).transpose() + sens.E * q.row(t).transpose();
  }
  return v;
}

VoltageEnvelope build_coupling(const SensitivityModel& sens, const Eigen::VectorXd& vtilde,
                               const Eigen::VectorXd& vlo, const Eigen::VectorXd& vhi) {
  if (vlo.size() != vtilde.size() || vhi.size() != vtilde.size()) {
    throw DimensionError("voltage bounds must match the baseline length");
  }
  if (vtilde.size() % sens.K() != 0) throw DimensionError("baseline length is not a multiple of K");
  if (!(vlo.array() < vhi.array()).all()) {
    throw ValidationError("voltage lower bound must be strictly below the upper bound");
  }

  VoltageEnvelope env;
  env.vtilde = vtilde;
  env.vlo = vlo;
  env.vhi = vhi;
  env.w.resize(2 * vtilde.size());
  env.w.head(vtilde.size()) = vhi - vtilde;
  env.w.tail(vtilde.size()) = vtilde - vlo;
  return env;
}

Eigen::MatrixXd VoltageEnvelope::gamma(const SensitivityModel& sens, int col) const {
  const int KT = static_cast<int>(vtilde.size());
  const int T = KT / sens.K();
  Eigen::MatrixXd out(2 * KT, T);
  out.topRows(KT) = sens.dbar(col, T);
  out.bottomRows(KT) = -out.topRows(KT);
  return out;
}

Eigen::MatrixXd VoltageEnvelope::xi(const SensitivityModel& sens, int col) const {
  const int KT = static_cast<int>(vtilde.size());
  const int T = KT / sens.K();
  Eigen::MatrixXd out(2 * KT, T);
  out.topRows(KT) = sens.ebar(col, T);
  out.bottomRows(KT) = -out.topRows(KT);
  return out;
}

}  // namespace evcoord
