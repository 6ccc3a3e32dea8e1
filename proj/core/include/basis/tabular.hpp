#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <optional>
#include <stdexcept>
#include <vector>

#include "basis/approx.hpp"
#include "basis/rng.hpp"

namespace basis {

// Exact finite MDP. transition[a] is an S x S row-stochastic sparse matrix;
// reward[task] is S x A. Terminal states must self-loop with probability 1
// and carry zero reward for every task.
struct TabularMDP {
  int num_states = 0;
  int num_actions = 0;
  std::vector<Eigen::SparseMatrix<double, Eigen::RowMajor>> transition;
  std::vector<Eigen::MatrixXd> reward;
  double gamma = 0.9;
  Eigen::VectorXd initial_dist;
  std::vector<uint8_t> terminal;  // size S, 1 = terminal

  int num_tasks() const { return static_cast<int>(reward.size()); }
  bool is_terminal(int s) const { return !terminal.empty() && terminal[s]; }
  // throws std::invalid_argument on any structural violation
  void validate() const;
};

struct QTable {
  Eigen::MatrixXd values;  // S x A
};

struct PolicyTable {
  Eigen::MatrixXd probs;  // S x A, rows sum to 1
};

// Per-action tables of d-vectors: values[a] is S x d.
struct PsiTable {
  std::vector<Eigen::MatrixXd> values;
  int dim() const { return values.empty() ? 0 : static_cast<int>(values[0].cols()); }
};

struct Trajectory {
  std::vector<int> states;                       // tabular rollouts
  std::vector<Eigen::VectorXd> observations;     // environment rollouts
  std::vector<int> actions;
  std::vector<double> rewards;                   // eval-only channel
  double episode_return = 0.0;
  size_t length() const { return actions.size(); }
};

// Maximum-entropy value iteration: Q(s,a) = r(s,a) + gamma * E[V(s')] with
// V(s) = log sum_a exp Q(s,a) and V = Q = 0 at terminal states. Converges to
// sup-norm residual <= tol or throws NonConvergence.
QTable soft_value_iteration(const TabularMDP& mdp, int task, double tol = 1e-8,
                            int max_iters = 100000);

// One soft backup sweep; returns the sup-norm residual |Q_out - Q_in|.
double soft_backup(const TabularMDP& mdp, int task, const Eigen::MatrixXd& q_in,
                   Eigen::MatrixXd& q_out);

PolicyTable softmax_policy(const QTable& q, double temperature = 1.0);
PolicyTable greedy_policy(const QTable& q);  // ties break to the lowest action index

// Solves (I - gamma * P_pi) psi = phi per cumulant dimension with a dense LU
// over the (s,a) product space; terminal states get zero successor features.
// Oracle-grade: requires num_states*num_actions small enough for dense algebra.
PsiTable exact_successor_features(const TabularMDP& mdp, const PolicyTable& policy,
                                  const PsiTable& phi, double gamma);

// Exact discounted policy evaluation: v = r_pi + gamma * P_pi v, iterated to
// tol (geometric convergence; equivalent to the linear solve for gamma < 1).
Eigen::VectorXd policy_values(const TabularMDP& mdp, const PolicyTable& policy,
                              int task, double tol = 1e-12);

// Exact undiscounted H-step return under initial_dist.
double finite_horizon_return(const TabularMDP& mdp, const PolicyTable& policy,
                             int task, int horizon);

Trajectory rollout(const TabularMDP& mdp, const PolicyTable& policy, int task,
                   int horizon, Rng& rng);

// Monte Carlo mean of discounted returns over seeded episodes; the exact
// companion is initial_dist . policy_values(...).
double expected_return(const TabularMDP& mdp, const PolicyTable& policy, int task,
                       int episodes, int horizon, Rng& rng);
double expected_return_exact(const TabularMDP& mdp, const PolicyTable& policy,
                             int task);

}  // namespace basis
