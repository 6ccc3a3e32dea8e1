#include "basis/tabular.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace basis {

void TabularMDP::validate() const {
  if (num_states < 1 || num_actions < 1)
    throw std::invalid_argument("TabularMDP: empty state or action space");
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw std::invalid_argument("TabularMDP: gamma must be in [0,1)");
  if (static_cast<int>(transition.size()) != num_actions)
    throw std::invalid_argument("TabularMDP: one transition matrix per action required");
  for (const auto& P : transition) {
    if (P.rows() != num_states || P.cols() != num_states)
      throw std::invalid_argument("TabularMDP: transition shape mismatch");
    Eigen::VectorXd row_sums = P * Eigen::VectorXd::Ones(num_states);
    for (int s = 0; s < num_states; ++s)
      if (std::abs(row_sums[s] - 1.0) > 1e-9)
        throw std::invalid_argument("TabularMDP: transition row does not sum to 1");
    for (int k = 0; k < P.outerSize(); ++k)
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(P, k); it; ++it)
        if (it.value() < 0.0)
          throw std::invalid_argument("TabularMDP: negative transition probability");
  }
  for (const auto& R : reward)
    if (R.rows() != num_states || R.cols() != num_actions)
      throw std::invalid_argument("TabularMDP: reward shape mismatch");
  if (initial_dist.size() != num_states)
    throw std::invalid_argument("TabularMDP: initial_dist size mismatch");
  if (std::abs(initial_dist.sum() - 1.0) > 1e-9 || initial_dist.minCoeff() < 0.0)
    throw std::invalid_argument("TabularMDP: initial_dist is not a distribution");
  if (!terminal.empty() && terminal.size() != static_cast<size_t>(num_states))
    throw std::invalid_argument("TabularMDP: terminal mask size mismatch");
  for (int s = 0; s < num_states; ++s) {
    if (!is_terminal(s)) continue;
    for (int a = 0; a < num_actions; ++a) {
      if (std::abs(transition[a].coeff(s, s) - 1.0) > 1e-12)
        throw std::invalid_argument("TabularMDP: terminal state must self-loop");
      for (const auto& R : reward)
        if (R(s, a) != 0.0)
          throw std::invalid_argument("TabularMDP: terminal state must have zero reward");
    }
  }
}

namespace {

Eigen::VectorXd soft_values(const TabularMDP& mdp, const Eigen::MatrixXd& q) {
  Eigen::VectorXd m = q.rowwise().maxCoeff();
  Eigen::VectorXd v =
      m.array() + (q.colwise() - m).array().exp().rowwise().sum().log();
  for (int s = 0; s < mdp.num_states; ++s)
    if (mdp.is_terminal(s)) v[s] = 0.0;
  return v;
}

}  // namespace

double soft_backup(const TabularMDP& mdp, int task, const Eigen::MatrixXd& q_in,
                   Eigen::MatrixXd& q_out) {
  Eigen::VectorXd v = soft_values(mdp, q_in);
  q_out.resize(mdp.num_states, mdp.num_actions);
  for (int a = 0; a < mdp.num_actions; ++a)
    q_out.col(a) = mdp.reward[task].col(a) + mdp.gamma * (mdp.transition[a] * v);
  for (int s = 0; s < mdp.num_states; ++s)
    if (mdp.is_terminal(s)) q_out.row(s).setZero();
  return (q_out - q_in).cwiseAbs().maxCoeff();
}

QTable soft_value_iteration(const TabularMDP& mdp, int task, double tol,
                            int max_iters) {
  if (task < 0 || task >= mdp.num_tasks())
    throw std::invalid_argument("soft_value_iteration: task out of range");
  if (!(tol > 0.0)) throw std::invalid_argument("soft_value_iteration: tol must be > 0");
  mdp.validate();
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(mdp.num_states, mdp.num_actions);
  Eigen::MatrixXd next;
  double residual = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iters; ++it) {
    residual = soft_backup(mdp, task, q, next);
    q.swap(next);
    if (residual <= tol) return QTable{std::move(q)};
  }
  throw NonConvergence("soft_value_iteration: residual above tol after max_iters",
                       residual);
}

PolicyTable softmax_policy(const QTable& q, double temperature) {
  if (!(temperature > 0.0))
    throw std::invalid_argument("softmax_policy: temperature must be > 0");
  if (!q.values.allFinite())
    throw std::invalid_argument("softmax_policy: non-finite Q values");
  Eigen::MatrixXd z = q.values / temperature;
  Eigen::VectorXd m = z.rowwise().maxCoeff();
  Eigen::MatrixXd e = (z.colwise() - m).array().exp();
  Eigen::VectorXd sums = e.rowwise().sum();
  return PolicyTable{e.array().colwise() / sums.array()};
}

PolicyTable greedy_policy(const QTable& q) {
  if (!q.values.allFinite())
    throw std::invalid_argument("greedy_policy: non-finite Q values");
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(q.values.rows(), q.values.cols());
  for (int s = 0; s < q.values.rows(); ++s) {
    int best = 0;
    for (int a = 1; a < q.values.cols(); ++a)
      if (q.values(s, a) > q.values(s, best)) best = a;
    p(s, best) = 1.0;
  }
  return PolicyTable{std::move(p)};
}

PsiTable exact_successor_features(const TabularMDP& mdp, const PolicyTable& policy,
                                  const PsiTable& phi, double gamma) {
  const int S = mdp.num_states, A = mdp.num_actions;
  if (static_cast<int>(phi.values.size()) != A)
    throw std::invalid_argument("exact_successor_features: phi action count mismatch");
  const int d = phi.dim();
  if (d < 1) throw std::invalid_argument("exact_successor_features: empty cumulants");
  const long n = static_cast<long>(S) * A;
  if (n > 20000)
    throw std::invalid_argument(
        "exact_successor_features: state-action space too large for the dense oracle");

  // M = I - gamma * P_pi over (s,a) pairs, index sa = s*A + a
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n);
  for (int a = 0; a < A; ++a) {
    const auto& P = mdp.transition[a];
    for (int s = 0; s < S; ++s) {
      if (mdp.is_terminal(s)) continue;
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(P, s); it;
           ++it) {
        int sp = static_cast<int>(it.col());
        for (int ap = 0; ap < A; ++ap) {
          double w = gamma * it.value() * policy.probs(sp, ap);
          if (w != 0.0) M(s * A + a, sp * A + ap) -= w;
        }
      }
    }
  }
  Eigen::MatrixXd rhs(n, d);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a)
      rhs.row(s * A + a) = mdp.is_terminal(s)
                               ? Eigen::RowVectorXd::Zero(d)
                               : Eigen::RowVectorXd(phi.values[a].row(s));
  // terminal rows of M are already identity: psi(terminal,.) = rhs = 0
  for (int s = 0; s < S; ++s) {
    if (!mdp.is_terminal(s)) continue;
    for (int a = 0; a < A; ++a) M.row(s * A + a).setZero(), M(s * A + a, s * A + a) = 1.0;
  }

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
  Eigen::MatrixXd sol = lu.solve(rhs);
  double res = (M * sol - rhs).cwiseAbs().maxCoeff();
  if (!(res <= 1e-8))
    throw std::runtime_error("exact_successor_features: linear solve residual too large");

  PsiTable psi;
  psi.values.assign(A, Eigen::MatrixXd(S, d));
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) psi.values[a].row(s) = sol.row(s * A + a);
  return psi;
}

namespace {

// expected immediate reward and value propagation under a fixed policy
Eigen::VectorXd policy_reward(const TabularMDP& mdp, const PolicyTable& policy,
                              int task) {
  return (mdp.reward[task].array() * policy.probs.array()).rowwise().sum();
}

Eigen::VectorXd policy_step(const TabularMDP& mdp, const PolicyTable& policy,
                            const Eigen::VectorXd& v) {
  // (P_pi v)(s) = sum_a pi(a|s) sum_s' P(s'|s,a) v(s')
  Eigen::VectorXd out = Eigen::VectorXd::Zero(mdp.num_states);
  for (int a = 0; a < mdp.num_actions; ++a)
    out.array() += policy.probs.col(a).array() * (mdp.transition[a] * v).array();
  return out;
}

}  // namespace

Eigen::VectorXd policy_values(const TabularMDP& mdp, const PolicyTable& policy,
                              int task, double tol) {
  Eigen::VectorXd r = policy_reward(mdp, policy, task);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(mdp.num_states);
  double bound = r.cwiseAbs().maxCoeff() / (1.0 - mdp.gamma) + 1.0;
  int max_iters = static_cast<int>(std::log(tol / bound) / std::log(mdp.gamma)) + 64;
  for (int it = 0; it < max_iters; ++it) {
    Eigen::VectorXd next = r + mdp.gamma * policy_step(mdp, policy, v);
    for (int s = 0; s < mdp.num_states; ++s)
      if (mdp.is_terminal(s)) next[s] = 0.0;
    double res = (next - v).cwiseAbs().maxCoeff();
    v.swap(next);
    if (res * mdp.gamma / (1.0 - mdp.gamma) <= tol) break;
  }
  return v;
}

double finite_horizon_return(const TabularMDP& mdp, const PolicyTable& policy,
                             int task, int horizon) {
  Eigen::VectorXd r = policy_reward(mdp, policy, task);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(mdp.num_states);
  for (int t = 0; t < horizon; ++t) {
    v = r + policy_step(mdp, policy, v);
    for (int s = 0; s < mdp.num_states; ++s)
      if (mdp.is_terminal(s)) v[s] = 0.0;
  }
  return mdp.initial_dist.dot(v);
}

Trajectory rollout(const TabularMDP& mdp, const PolicyTable& policy, int task,
                   int horizon, Rng& rng) {
  if (horizon < 1) throw std::invalid_argument("rollout: horizon must be >= 1");
  Trajectory traj;
  std::vector<double> init(mdp.initial_dist.data(),
                           mdp.initial_dist.data() + mdp.num_states);
  int s = rng.choice(init);
  for (int t = 0; t < horizon; ++t) {
    if (mdp.is_terminal(s)) break;
    Eigen::VectorXd row = policy.probs.row(s);
    int a = rng.choice(std::span<const double>(row.data(), row.size()));
    traj.states.push_back(s);
    traj.actions.push_back(a);
    double r = mdp.reward[task](s, a);
    traj.rewards.push_back(r);
    traj.episode_return += r;
    // sample next state from the sparse row
    const auto& P = mdp.transition[a];
    double u = rng.uniform();
    double acc = 0.0;
    int next = s;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(P, s); it;
         ++it) {
      acc += it.value();
      next = static_cast<int>(it.col());
      if (u < acc) break;
    }
    s = next;
  }
  return traj;
}

double expected_return(const TabularMDP& mdp, const PolicyTable& policy, int task,
                       int episodes, int horizon, Rng& rng) {
  if (episodes < 1) throw std::invalid_argument("expected_return: episodes must be >= 1");
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    Rng ep = rng.stream("episode", static_cast<uint64_t>(e));
    Trajectory traj = rollout(mdp, policy, task, horizon, ep);
    double g = 0.0, scale = 1.0;
    for (double r : traj.rewards) {
      g += scale * r;
      scale *= mdp.gamma;
    }
    total += g;
  }
  return total / episodes;
}

double expected_return_exact(const TabularMDP& mdp, const PolicyTable& policy,
                             int task) {
  return mdp.initial_dist.dot(policy_values(mdp, policy, task));
}

}  // namespace basis
