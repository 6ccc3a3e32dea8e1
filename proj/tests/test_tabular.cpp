#include <doctest.h>

#include <cmath>
#include <vector>

#include "basis/tabular.hpp"

using namespace basis;

namespace {

Eigen::SparseMatrix<double, Eigen::RowMajor> dense_to_sparse(
    const Eigen::MatrixXd& m) {
  Eigen::SparseMatrix<double, Eigen::RowMajor> s = m.sparseView();
  s.makeCompressed();
  return s;
}

// Single non-terminal state with a self-loop: closed forms are exact.
TabularMDP one_state(double r0, double r1, double gamma) {
  TabularMDP mdp;
  mdp.num_states = 1;
  mdp.num_actions = 2;
  Eigen::MatrixXd loop = Eigen::MatrixXd::Ones(1, 1);
  mdp.transition = {dense_to_sparse(loop), dense_to_sparse(loop)};
  Eigen::MatrixXd r(1, 2);
  r << r0, r1;
  mdp.reward = {r};
  mdp.gamma = gamma;
  mdp.initial_dist = Eigen::VectorXd::Ones(1);
  mdp.terminal = {0};
  return mdp;
}

// Three-state chain 0 -> 1 -> 2(terminal); action 0 stays, action 1 advances.
TabularMDP chain(double gamma) {
  TabularMDP mdp;
  mdp.num_states = 3;
  mdp.num_actions = 2;
  Eigen::MatrixXd stay = Eigen::MatrixXd::Zero(3, 3);
  stay(0, 0) = stay(1, 1) = stay(2, 2) = 1.0;
  Eigen::MatrixXd adv = Eigen::MatrixXd::Zero(3, 3);
  adv(0, 1) = adv(1, 2) = adv(2, 2) = 1.0;
  mdp.transition = {dense_to_sparse(stay), dense_to_sparse(adv)};
  Eigen::MatrixXd r(3, 2);
  r << 0.1, 0.4, 0.2, 1.0, 0.0, 0.0;
  mdp.reward = {r};
  mdp.gamma = gamma;
  mdp.initial_dist = Eigen::VectorXd::Zero(3);
  mdp.initial_dist[0] = 1.0;
  mdp.terminal = {0, 0, 1};
  return mdp;
}

}  // namespace

TEST_CASE("validate accepts the chain and rejects structural breakage") {
  TabularMDP mdp = chain(0.9);
  CHECK_NOTHROW(mdp.validate());

  SUBCASE("non-stochastic row") {
    TabularMDP bad = chain(0.9);
    Eigen::MatrixXd stay = Eigen::MatrixXd::Zero(3, 3);
    stay(0, 0) = 0.7;  // row sums to 0.7
    stay(1, 1) = stay(2, 2) = 1.0;
    bad.transition[0] = dense_to_sparse(stay);
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  }
  SUBCASE("terminal state with reward") {
    TabularMDP bad = chain(0.9);
    bad.reward[0](2, 0) = 1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  }
  SUBCASE("terminal state that leaks probability") {
    TabularMDP bad = chain(0.9);
    Eigen::MatrixXd adv = Eigen::MatrixXd::Zero(3, 3);
    adv(0, 1) = adv(1, 2) = 1.0;
    adv(2, 0) = 1.0;  // terminal must self-loop
    bad.transition[1] = dense_to_sparse(adv);
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  }
  SUBCASE("bad gamma") {
    TabularMDP bad = chain(0.9);
    bad.gamma = 1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  }
}

TEST_CASE("soft value iteration zeroes terminal states") {
  TabularMDP mdp = one_state(0.0, 0.0, 0.9);
  mdp.terminal[0] = 1;
  QTable q = soft_value_iteration(mdp, 0);
  CHECK(q.values(0, 0) == 0.0);
  CHECK(q.values(0, 1) == 0.0);
}

TEST_CASE("soft value iteration matches the symmetric closed form") {
  // non-terminal self-loop, equal rewards r: Q = r + gamma (Q + log 2)
  TabularMDP mdp = one_state(0.3, 0.3, 0.5);
  QTable q = soft_value_iteration(mdp, 0, 1e-12);
  double expect = (0.3 + 0.5 * std::log(2.0)) / (1.0 - 0.5);
  CHECK(q.values(0, 0) == doctest::Approx(expect).epsilon(1e-9));
  CHECK(q.values(0, 1) == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("soft value iteration on the chain matches backward induction") {
  double gamma = 0.8;
  TabularMDP mdp = chain(gamma);
  QTable q = soft_value_iteration(mdp, 0, 1e-12);

  // state 1: Q(1,advance) = 1 (terminal successor), Q(1,stay) solves
  // Q = 0.2 + gamma * log(exp Q + exp 1)
  double q1a = 1.0;
  double q1s = 0.0;
  for (int i = 0; i < 10000; ++i)
    q1s = 0.2 + gamma * std::log(std::exp(q1s) + std::exp(q1a));
  double v1 = std::log(std::exp(q1s) + std::exp(q1a));
  CHECK(q.values(1, 1) == doctest::Approx(q1a).epsilon(1e-9));
  CHECK(q.values(1, 0) == doctest::Approx(q1s).epsilon(1e-9));

  // state 0: advance reaches state 1, stay self-loops
  double q0a = 0.4 + gamma * v1;
  double q0s = 0.0;
  for (int i = 0; i < 10000; ++i)
    q0s = 0.1 + gamma * std::log(std::exp(q0s) + std::exp(q0a));
  CHECK(q.values(0, 1) == doctest::Approx(q0a).epsilon(1e-9));
  CHECK(q.values(0, 0) == doctest::Approx(q0s).epsilon(1e-9));

  // terminal state stays identically zero
  CHECK(q.values(2, 0) == 0.0);
  CHECK(q.values(2, 1) == 0.0);
}

TEST_CASE("soft_backup reports the sup-norm residual") {
  TabularMDP mdp = chain(0.8);
  QTable q = soft_value_iteration(mdp, 0, 1e-12);
  Eigen::MatrixXd out(3, 2);
  CHECK(soft_backup(mdp, 0, q.values, out) < 1e-11);
  Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(3, 2);
  double r = soft_backup(mdp, 0, zero, out);
  CHECK(r > 0.1);  // far from the fixed point
  CHECK(out(1, 1) == doctest::Approx(1.0));  // one backup from zero = reward + gamma*lse(0)
}

TEST_CASE("softmax_policy matches direct enumeration and temperature limits") {
  QTable q;
  q.values.resize(1, 3);
  q.values << 1.0, 2.0, 0.5;
  PolicyTable p = softmax_policy(q, 1.0);
  double z = std::exp(1.0) + std::exp(2.0) + std::exp(0.5);
  CHECK(p.probs(0, 0) == doctest::Approx(std::exp(1.0) / z).epsilon(1e-12));
  CHECK(p.probs(0, 1) == doctest::Approx(std::exp(2.0) / z).epsilon(1e-12));
  CHECK(p.probs(0, 2) == doctest::Approx(std::exp(0.5) / z).epsilon(1e-12));

  // low temperature approaches greedy; scale invariance under shared shift
  PolicyTable cold = softmax_policy(q, 1e-3);
  CHECK(cold.probs(0, 1) == doctest::Approx(1.0).epsilon(1e-6));
  QTable shifted;
  shifted.values = q.values.array() + 1000.0;
  PolicyTable ps = softmax_policy(shifted, 1.0);
  for (int a = 0; a < 3; ++a)
    CHECK(ps.probs(0, a) == doctest::Approx(p.probs(0, a)).epsilon(1e-9));
}

TEST_CASE("greedy_policy picks the argmax and breaks ties low") {
  QTable q;
  q.values.resize(2, 3);
  q.values << 1.0, 3.0, 3.0, -1.0, -5.0, -2.0;
  PolicyTable p = greedy_policy(q);
  CHECK(p.probs(0, 1) == 1.0);  // tie between 1 and 2 goes to 1
  CHECK(p.probs(0, 2) == 0.0);
  CHECK(p.probs(1, 0) == 1.0);
}

TEST_CASE("exact successor features equal the truncated Neumann series") {
  TabularMDP mdp = chain(0.7);
  QTable q = soft_value_iteration(mdp, 0);
  PolicyTable pi = softmax_policy(q, 1.0);

  const int d = 3;
  PsiTable phi;
  Rng rng(31);
  for (int a = 0; a < 2; ++a) {
    phi.values.emplace_back(3, d);
    for (int i = 0; i < phi.values[a].size(); ++i)
      phi.values[a].data()[i] = rng.normal();
  }
  // terminal rows carry no cumulant
  phi.values[0].row(2).setZero();
  phi.values[1].row(2).setZero();

  PsiTable psi = exact_successor_features(mdp, pi, phi, mdp.gamma);

  // independent truncated series: psi(s,a) = phi(s,a) + sum_t gamma^t E[phi_t]
  for (int a0 = 0; a0 < 2; ++a0) {
    for (int s0 = 0; s0 < 2; ++s0) {
      Eigen::VectorXd expect = phi.values[a0].row(s0).transpose();
      Eigen::VectorXd dist = Eigen::VectorXd::Zero(3);
      // state distribution after taking a0 from s0
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(
               mdp.transition[a0], s0);
           it; ++it)
        dist[it.col()] = it.value();
      double g = mdp.gamma;
      for (int t = 0; t < 200; ++t) {
        Eigen::VectorXd next = Eigen::VectorXd::Zero(3);
        for (int s = 0; s < 3; ++s) {
          if (dist[s] == 0.0 || mdp.is_terminal(s)) continue;
          for (int a = 0; a < 2; ++a) {
            double pa = pi.probs(s, a) * dist[s];
            expect += g * pa * phi.values[a].row(s).transpose();
            for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(
                     mdp.transition[a], s);
                 it; ++it)
              next[it.col()] += pa * it.value();
          }
        }
        dist = next;
        g *= mdp.gamma;
      }
      for (int j = 0; j < d; ++j)
        CHECK(psi.values[a0](s0, j) == doctest::Approx(expect[j]).epsilon(1e-8));
    }
  }
  // terminal states have zero successor features
  CHECK(psi.values[0].row(2).norm() == 0.0);
  CHECK(psi.values[1].row(2).norm() == 0.0);
}

TEST_CASE("successor features contract rewards back to Q values") {
  // psi^T w with phi = per-task reward columns reproduces policy evaluation
  TabularMDP mdp = chain(0.85);
  QTable q = soft_value_iteration(mdp, 0);
  PolicyTable pi = softmax_policy(q, 1.0);

  PsiTable phi;
  for (int a = 0; a < 2; ++a) phi.values.emplace_back(mdp.reward[0].col(a));
  PsiTable psi = exact_successor_features(mdp, pi, phi, mdp.gamma);

  Eigen::VectorXd v = policy_values(mdp, pi, 0);
  for (int s = 0; s < 3; ++s) {
    for (int a = 0; a < 2; ++a) {
      double q_direct = mdp.reward[0](s, a);
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(
               mdp.transition[a], s);
           it; ++it)
        q_direct += mdp.gamma * it.value() * v[it.col()];
      if (mdp.is_terminal(s)) q_direct = 0.0;
      CHECK(psi.values[a](s, 0) == doctest::Approx(q_direct).epsilon(1e-9));
    }
  }
}

TEST_CASE("policy_values matches the geometric series on a deterministic loop") {
  TabularMDP mdp = one_state(0.4, 0.0, 0.9);
  mdp.terminal[0] = 0;
  PolicyTable pi;
  pi.probs = Eigen::MatrixXd::Zero(1, 2);
  pi.probs(0, 0) = 1.0;
  Eigen::VectorXd v = policy_values(mdp, pi, 0);
  CHECK(v[0] == doctest::Approx(0.4 / (1.0 - 0.9)).epsilon(1e-10));
}

TEST_CASE("finite_horizon_return sums undiscounted expected rewards") {
  TabularMDP mdp = chain(0.9);
  PolicyTable adv;
  adv.probs = Eigen::MatrixXd::Zero(3, 2);
  adv.probs.col(1).setOnes();
  // deterministic advance: rewards 0.4 then 1.0, then terminal zeros
  CHECK(finite_horizon_return(mdp, adv, 0, 1) == doctest::Approx(0.4));
  CHECK(finite_horizon_return(mdp, adv, 0, 2) == doctest::Approx(1.4));
  CHECK(finite_horizon_return(mdp, adv, 0, 10) == doctest::Approx(1.4));

  PolicyTable stay;
  stay.probs = Eigen::MatrixXd::Zero(3, 2);
  stay.probs.col(0).setOnes();
  CHECK(finite_horizon_return(mdp, stay, 0, 5) == doctest::Approx(0.5));
}

TEST_CASE("rollout respects dynamics and records rewards") {
  TabularMDP mdp = chain(0.9);
  PolicyTable adv;
  adv.probs = Eigen::MatrixXd::Zero(3, 2);
  adv.probs.col(1).setOnes();
  Rng rng(3);
  Trajectory tr = rollout(mdp, adv, 0, 10, rng);
  // only acted-from states are recorded; the terminal stop is implicit
  REQUIRE(tr.length() == 2);
  CHECK(tr.states[0] == 0);
  CHECK(tr.states[1] == 1);
  CHECK(tr.actions[0] == 1);
  CHECK(tr.rewards[1] == doctest::Approx(1.0));
  CHECK(tr.episode_return == doctest::Approx(1.4));
}

TEST_CASE("Monte Carlo return converges to the exact value") {
  TabularMDP mdp = chain(0.9);
  QTable q = soft_value_iteration(mdp, 0);
  PolicyTable pi = softmax_policy(q, 1.0);
  Rng rng(9);
  double mc = expected_return(mdp, pi, 0, 4000, 200, rng);
  double exact = expected_return_exact(mdp, pi, 0);
  CHECK(mc == doctest::Approx(exact).epsilon(0.05));
}
