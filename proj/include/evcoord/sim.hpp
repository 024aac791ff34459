#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "evcoord/comm_graph.hpp"
#include "evcoord/ev.hpp"
#include "evcoord/grid.hpp"
#include "evcoord/local_problem.hpp"
#include "evcoord/protocol.hpp"
#include "evcoord/qp.hpp"

namespace evcoord {

enum class RunMode { censored, benchmark };

struct AlgoConfig {
  double c = 100.0;
  int iters = 30;  // synchronous rounds S
  CensorPolicy policy;
  qp::Settings solver;
  int threads = 0;  // 0 = hardware concurrency
  bool record_trajectory = false;

  /// Voltage unit of the consensus layer relative to p.u.^2 (1 = p.u.^2,
  /// (1000 base_kv)^2 = squared volts). c and gamma are quoted in this unit.
  double unit_scale = 1.0;
};

/// Per-iteration snapshots of every agent, for equivalence and bookkeeping
/// tests on small instances.
struct Trajectory {
  std::vector<Eigen::MatrixXd> lambda;      // S matrices, dual_dim x N
  std::vector<Eigen::MatrixXd> lambda_hat;  // broadcast states after each round
  std::vector<Eigen::MatrixXd> nu;
  std::vector<Eigen::MatrixXd> u;  // u_dim x N
};

struct RunResult {
  RunMode mode = RunMode::censored;
  int S = 0;
  int N = 0;
  std::vector<std::vector<std::uint8_t>> bitmap;  // S rows x N columns, 1 = transmitted
  std::vector<long> transmissions_per_iteration;  // bitmap row sums
  long total_transmissions = 0;
  std::vector<double> consensus_residual;  // max_{(uv) in E} ||lambda_u - lambda_v|| per iteration
  Eigen::MatrixXd p_final;                 // T x N (kW)
  Eigen::MatrixXd q_final;                 // T x N (kVAr)
  Eigen::VectorXd voltage;                 // KT, p.u.^2
  double objective = 0.0;                  // sum of per-EV operational costs
  int non_converged_solves = 0;
  double wall_seconds = 0.0;
  std::optional<Trajectory> trajectory;
};

/// A fully materialized case: grid model, EV fleet, communication graph and
/// algorithm parameters. Immutable during a run.
struct SimInputs {
  GridSpec grid;
  SensitivityModel sens;
  VoltageEnvelope env;
  LoadSeries loads;
  std::vector<EvParams> evs;  // ev.id keys grid.customers
  CommGraph graph;
  AlgoConfig algo;
  int T = 0;
  double dt_hours = 0.5;
};

/// Delivery boundary for one synchronous round. Broadcasts queued during the
/// compute phase are flushed to the sender's neighbors in sender-id order,
/// which pins the floating-point accumulation order. Only the in-memory
/// transport ships; a socket transport would implement the same interface.
class Transport {
public:
  virtual ~Transport() = default;
  virtual void queue(Broadcast msg) = 0;
  virtual void flush_round(std::vector<Agent>& agents) = 0;
};

class InMemoryTransport final : public Transport {
public:
  explicit InMemoryTransport(const CommGraph& graph) : graph_(graph) {}
  void queue(Broadcast msg) override;
  void flush_round(std::vector<Agent>& agents) override;

private:
  const CommGraph& graph_;
  std::vector<Broadcast> pending_;
};

/// Adapter running the EV u-update + lambda update behind the protocol's
/// solver interface.
class EvLocalDualSolver final : public LocalDualSolver {
public:
  EvLocalDualSolver(LocalProblem prob, qp::Settings settings)
      : solver_(std::move(prob), settings) {}

  int dual_dim() const override { return solver_.problem().dual_dim(); }
  Output solve(const Eigen::VectorXd& nu_prev, const Eigen::VectorXd& lhat_self_prev,
               const Eigen::VectorXd& neighbor_sum) override;

  const LocalProblem& problem() const { return solver_.problem(); }

private:
  SubproblemSolver solver_;
};

/// Drives S synchronous rounds of every agent. Benchmark mode disables the
/// censor so every agent broadcasts every round. Deterministic for fixed
/// inputs regardless of thread count.
RunResult run(const SimInputs& inputs, RunMode mode);

/// Total censored transmissions over total benchmark transmissions.
double communication_fraction(const RunResult& censored, const RunResult& benchmark);

struct SolutionReport {
  Eigen::VectorXd voltage;  // KT, p.u.^2
  double objective = 0.0;
  double max_coupling_violation = 0.0;  // p.u.^2 above the band, 0 when inside
  std::vector<ViolationReport> per_ev;

  bool feasible(double tol) const;
};

/// Evaluates the final profiles against the grid model: voltage trajectory,
/// band violation and per-EV constraint slack.
SolutionReport reconstruct_solution(const SimInputs& inputs, const RunResult& result);

}  // namespace evcoord
