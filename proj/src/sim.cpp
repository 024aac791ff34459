#include "evcoord/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <thread>

namespace evcoord {

namespace {

void parallel_for(int count, int threads, const std::function<void(int)>& body) {
  if (threads <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  const int workers = std::min(threads, count);
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  auto chunk = [&](int w) {
    for (int i = w; i < count; i += workers) body(i);
  };
  for (int w = 1; w < workers; ++w) pool.emplace_back(chunk, w);
  chunk(0);
  for (auto& t : pool) t.join();
}

}  // namespace

void InMemoryTransport::queue(Broadcast msg) { pending_.push_back(std::move(msg)); }

void InMemoryTransport::flush_round(std::vector<Agent>& agents) {
  std::sort(pending_.begin(), pending_.end(),
            [](const Broadcast& a, const Broadcast& b) { return a.sender < b.sender; });
  for (const Broadcast& msg : pending_) {
    for (int m : graph_.neighbors[msg.sender]) agents[m].deliver(msg);
  }
  pending_.clear();
}

LocalDualSolver::Output EvLocalDualSolver::solve(const Eigen::VectorXd& nu_prev,
                                                 const Eigen::VectorXd& lhat_self_prev,
                                                 const Eigen::VectorXd& neighbor_sum) {
  const qp::Result& res = solver_.solve_u(nu_prev, lhat_self_prev, neighbor_sum);
  Output out;
  out.u = res.x;
  out.lambda = update_lambda(res.x, solver_.problem(), nu_prev, lhat_self_prev, neighbor_sum);
  out.converged = res.converged;
  out.iters = res.iters;
  return out;
}

RunResult run(const SimInputs& inputs, RunMode mode) {
  const auto t_start = std::chrono::steady_clock::now();

  const int N = static_cast<int>(inputs.evs.size());
  const int S = inputs.algo.iters;
  const int T = inputs.T;

  RunResult result;
  result.mode = mode;
  result.S = S;
  result.N = N;
  result.bitmap.assign(S, std::vector<std::uint8_t>(N, 0));
  result.transmissions_per_iteration.assign(S, 0);
  result.consensus_residual.assign(S, 0.0);
  result.p_final = Eigen::MatrixXd::Zero(T, N);
  result.q_final = Eigen::MatrixXd::Zero(T, N);

  if (N == 0) {
    // nothing to coordinate; the feeder carries the baseline only
    result.voltage = inputs.env.vtilde;
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return result;
  }

  if (inputs.graph.n != N) {
    throw ValidationError("communication graph has " + std::to_string(inputs.graph.n) +
                          " vertices for " + std::to_string(N) + " EVs");
  }
  inputs.graph.validate();
  for (int u = 0; u < N; ++u) {
    if (inputs.graph.neighbors[u].empty()) {
      throw IsolatedAgentError("agent " + std::to_string(u) + " has no neighbors");
    }
  }

  CensorPolicy policy = inputs.algo.policy;
  if (mode == RunMode::benchmark) policy.enabled = false;

  std::vector<Agent> agents;
  agents.reserve(N);
  for (int i = 0; i < N; ++i) {
    const EvParams& ev = inputs.evs[i];
    const int col = inputs.sens.customer_column(ev.id);
    LocalProblem prob =
        make_local_problem(ev, inputs.sens, inputs.env, col, N, inputs.algo.c,
                           static_cast<int>(inputs.graph.neighbors[i].size()),
                           inputs.algo.unit_scale);
    auto solver = std::make_shared<EvLocalDualSolver>(std::move(prob), inputs.algo.solver);
    agents.emplace_back(i, inputs.graph.neighbors[i], std::move(solver), policy, inputs.algo.c);
  }

  if (inputs.algo.record_trajectory) result.trajectory.emplace();

  const int threads = inputs.algo.threads > 0
                          ? inputs.algo.threads
                          : std::max(1u, std::thread::hardware_concurrency());
  const auto edges = inputs.graph.edge_list();
  const int dual_dim = static_cast<int>(agents[0].state().lambda.size());

  InMemoryTransport transport(inputs.graph);
  std::vector<std::optional<Broadcast>> outbound(N);
  std::vector<std::string> failures(N);

  for (int k = 1; k <= S; ++k) {
    parallel_for(N, threads, [&](int i) {
      try {
        outbound[i] = agents[i].compute_and_censor();
      } catch (const std::exception& err) {
        failures[i] = err.what();
      }
    });
    for (int i = 0; i < N; ++i) {
      if (!failures[i].empty()) {
        throw InfeasibleProblemError("agent " + std::to_string(i) + " failed at iteration " +
                                     std::to_string(k) + ": " + failures[i]);
      }
    }

    for (int sender = 0; sender < N; ++sender) {
      if (!outbound[sender]) continue;
      result.bitmap[k - 1][sender] = 1;
      transport.queue(*outbound[sender]);
    }
    transport.flush_round(agents);
    for (int i = 0; i < N; ++i) agents[i].finish_round();

    long sent = 0;
    for (int i = 0; i < N; ++i) sent += result.bitmap[k - 1][i];
    result.transmissions_per_iteration[k - 1] = sent;
    result.total_transmissions += sent;
    for (int i = 0; i < N; ++i) {
      if (!agents[i].state().last_solve_converged) ++result.non_converged_solves;
    }

    double res_max = 0.0;
    for (const auto& [u, v] : edges) {
      res_max = std::max(res_max, (agents[u].state().lambda - agents[v].state().lambda).norm());
    }
    result.consensus_residual[k - 1] = res_max;

    if (result.trajectory) {
      Eigen::MatrixXd lam(dual_dim, N), lhat(dual_dim, N), nu(dual_dim, N),
          uu(agents[0].state().u.size(), N);
      for (int i = 0; i < N; ++i) {
        lam.col(i) = agents[i].state().lambda;
        lhat.col(i) = agents[i].state().lambda_hat;
        nu.col(i) = agents[i].state().nu;
        uu.col(i) = agents[i].state().u;
      }
      result.trajectory->lambda.push_back(std::move(lam));
      result.trajectory->lambda_hat.push_back(std::move(lhat));
      result.trajectory->nu.push_back(std::move(nu));
      result.trajectory->u.push_back(std::move(uu));
    }
  }

  for (int i = 0; i < N; ++i) {
    result.p_final.col(i) = agents[i].state().u.head(T);
    result.q_final.col(i) = agents[i].state().u.segment(T, T);
    result.objective += operational_cost(result.p_final.col(i), inputs.evs[i]);
  }
  result.voltage = evaluate_voltage(inputs.env.vtilde, inputs.sens, result.p_final, result.q_final);
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

double communication_fraction(const RunResult& censored, const RunResult& benchmark) {
  if (censored.S != benchmark.S || censored.N != benchmark.N) {
    throw ValidationError("communication fraction requires runs of the same scenario shape");
  }
  if (benchmark.total_transmissions <= 0) {
    throw ValidationError("benchmark run transmitted nothing");
  }
  return static_cast<double>(censored.total_transmissions) /
         static_cast<double>(benchmark.total_transmissions);
}

bool SolutionReport::feasible(double tol) const {
  if (max_coupling_violation > tol) return false;
  for (const auto& rep : per_ev) {
    if (!rep.ok()) return false;
  }
  return true;
}

SolutionReport reconstruct_solution(const SimInputs& inputs, const RunResult& result) {
  SolutionReport report;
  report.voltage =
      evaluate_voltage(inputs.env.vtilde, inputs.sens, result.p_final, result.q_final);

  double viol = 0.0;
  for (Eigen::Index i = 0; i < report.voltage.size(); ++i) {
    viol = std::max(viol, report.voltage(i) - inputs.env.vhi(i));
    viol = std::max(viol, inputs.env.vlo(i) - report.voltage(i));
  }
  report.max_coupling_violation = std::max(0.0, viol);

  report.objective = 0.0;
  for (int i = 0; i < result.N; ++i) {
    report.objective += operational_cost(result.p_final.col(i), inputs.evs[i]);
    const EvFeasibility feas = build_feasibility(inputs.evs[i], inputs.T);
    report.per_ev.push_back(
        check_feasible(feas, result.p_final.col(i), result.q_final.col(i), 1e-6));
  }
  return report;
}

}  // namespace evcoord
