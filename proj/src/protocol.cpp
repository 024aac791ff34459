#include "evcoord/protocol.hpp"

#include <algorithm>
#include <cmath>

namespace evcoord {

void CensorPolicy::validate() const {
  std::vector<std::string> problems;
  if (!(gamma > 0.0)) problems.push_back("censor gamma must be positive");
  if (!(epsilon > 0.0 && epsilon < 1.0)) problems.push_back("censor epsilon must lie in (0,1)");
  if (!problems.empty()) throw ValidationError(std::move(problems));
}

bool censor_decision(const Eigen::VectorXd& xi, int k, const CensorPolicy& policy) {
  if (!policy.enabled) return true;
  return xi.norm() - policy.threshold(k) >= 0.0;
}

Agent::Agent(int id, std::vector<int> neighbors, std::shared_ptr<LocalDualSolver> solver,
             CensorPolicy policy, double c)
    : neighbors_(std::move(neighbors)), solver_(std::move(solver)), policy_(policy), c_(c) {
  if (policy_.enabled) policy_.validate();
  std::sort(neighbors_.begin(), neighbors_.end());

  const int dim = solver_->dual_dim();
  state_.id = id;
  state_.lambda = Eigen::VectorXd::Zero(dim);
  state_.nu = Eigen::VectorXd::Zero(dim);
  state_.lambda_hat = Eigen::VectorXd::Zero(dim);
  state_.neighbor_hat_sum = Eigen::VectorXd::Zero(dim);
  const auto zero = std::make_shared<const Eigen::VectorXd>(Eigen::VectorXd::Zero(dim));
  for (int m : neighbors_) state_.neighbor_hat[m] = zero;
}

std::optional<Broadcast> Agent::compute_and_censor() {
  const int k = state_.iteration + 1;

  auto out = solver_->solve(state_.nu, state_.lambda_hat, state_.neighbor_hat_sum);
  state_.u = std::move(out.u);
  state_.lambda = std::move(out.lambda);
  state_.last_solve_converged = out.converged;
  state_.last_solve_iters = out.iters;

  const Eigen::VectorXd xi = state_.lambda_hat - state_.lambda;
  if (!censor_decision(xi, k, policy_)) return std::nullopt;

  state_.lambda_hat = state_.lambda;
  state_.transmit_count += 1;
  return Broadcast{state_.id, k, std::make_shared<const Eigen::VectorXd>(state_.lambda)};
}

void Agent::deliver(const Broadcast& msg) {
  auto it = state_.neighbor_hat.find(msg.sender);
  if (it == state_.neighbor_hat.end()) {
    throw InvalidQueryError("agent " + std::to_string(state_.id) +
                            " received a broadcast from non-neighbor " +
                            std::to_string(msg.sender));
  }
  state_.neighbor_hat_sum += *msg.lambda - *it->second;
  it->second = msg.lambda;
}

void Agent::finish_round() {
  // nu += c * sum_m (lambda_hat_self - lambda_hat_m)
  state_.nu += c_ * (degree() * state_.lambda_hat - state_.neighbor_hat_sum);
  state_.iteration += 1;
}

std::optional<Broadcast> agent_step(Agent& agent, std::span<const Broadcast> inbox) {
  auto outbound = agent.compute_and_censor();
  for (const auto& msg : inbox) agent.deliver(msg);
  agent.finish_round();
  return outbound;
}

}  // namespace evcoord
