#pragma once

#include <Eigen/Dense>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "evcoord/common.hpp"

namespace evcoord {

/// Decaying-threshold censoring rule: transmit at iteration k only when the
/// broadcast state moved by at least gamma * epsilon^k.
struct CensorPolicy {
  double gamma = 1.0;
  double epsilon = 0.5;
  bool enabled = true;

  double threshold(int k) const { return gamma * std::pow(epsilon, k); }
  void validate() const;
};

/// transmit  <=>  ||xi|| - gamma epsilon^k >= 0 (boundary transmits).
/// A disabled policy always transmits.
bool censor_decision(const Eigen::VectorXd& xi, int k, const CensorPolicy& policy);

/// A broadcast consensus iterate. The payload is shared immutably so a single
/// message can sit in every neighbor's inbox without copies.
struct Broadcast {
  int sender = -1;
  int iteration = 0;
  std::shared_ptr<const Eigen::VectorXd> lambda;
};

struct AgentState {
  int id = -1;
  int iteration = 0;  // completed iterations (k counts 1..S)
  Eigen::VectorXd lambda;      // local consensus iterate
  Eigen::VectorXd nu;          // local dual
  Eigen::VectorXd lambda_hat;  // own last broadcast
  std::map<int, std::shared_ptr<const Eigen::VectorXd>> neighbor_hat;  // last received per neighbor
  Eigen::VectorXd neighbor_hat_sum;  // cached sum of neighbor_hat
  Eigen::VectorXd u;                 // last local primal iterate
  bool last_solve_converged = true;
  int last_solve_iters = 0;
  long transmit_count = 0;
};

/// The local computation an agent runs each round: the u-update followed by
/// the closed-form lambda update. Abstract so the protocol can be exercised
/// with hand-built costs.
class LocalDualSolver {
public:
  virtual ~LocalDualSolver() = default;
  virtual int dual_dim() const = 0;

  struct Output {
    Eigen::VectorXd u;
    Eigen::VectorXd lambda;
    bool converged = true;
    int iters = 0;
  };

  virtual Output solve(const Eigen::VectorXd& nu_prev, const Eigen::VectorXd& lhat_self_prev,
                       const Eigen::VectorXd& neighbor_sum) = 0;
};

/// One agent of the censored consensus protocol. A synchronous round is
/// compute_and_censor() on every agent, delivery of the produced broadcasts,
/// then finish_round() on every agent.
class Agent {
public:
  Agent(int id, std::vector<int> neighbors, std::shared_ptr<LocalDualSolver> solver,
        CensorPolicy policy, double c);

  /// First half of iteration k: solve, compare against the last broadcast,
  /// decide transmission. Updates lambda/lambda_hat/u.
  std::optional<Broadcast> compute_and_censor();

  /// Record a neighbor broadcast for the current round.
  void deliver(const Broadcast& msg);

  /// Second half: dual update from the post-delivery broadcast states.
  void finish_round();

  const AgentState& state() const { return state_; }
  const std::vector<int>& neighbors() const { return neighbors_; }
  int degree() const { return static_cast<int>(neighbors_.size()); }

private:
  AgentState state_;
  std::vector<int> neighbors_;
  std::shared_ptr<LocalDualSolver> solver_;
  CensorPolicy policy_;
  double c_;
};

/// Single-shot synchronous step: compute/censor, absorb the round's inbox,
/// update the dual. Returns the outbound broadcast when the censor fired.
std::optional<Broadcast> agent_step(Agent& agent, std::span<const Broadcast> inbox);

}  // namespace evcoord
