#include "basis/irl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace basis {

void IRLConfig::validate() const {
  if (epochs < 0 || min_gradient_steps < 1 || batch_size < 1 || target_update_interval < 1)
    throw std::invalid_argument("irl: counts must be positive");
  if (lr <= 0.0) throw std::invalid_argument("irl: lr must be > 0");
  if (gamma < 0.0 || gamma >= 1.0) throw std::invalid_argument("irl: gamma in [0,1)");
  if (bc_weight < 0.0 || itd_weight < 0.0)
    throw std::invalid_argument("irl: loss weights must be >= 0");
  for (int n : demo_counts)
    if (n < 1) throw std::invalid_argument("irl: demo counts must be >= 1");
}

int IRLConfig::epochs_for(long demo_steps) const {
  if (epochs > 0) return epochs;
  long batches = std::max<long>(1, demo_steps / batch_size);
  return static_cast<int>((min_gradient_steps + batches - 1) / batches);
}

namespace {

void copy_params(const Mlp& src, Mlp& dst) {
  auto s = src.params().flat();
  auto d = dst.params().flat();
  if (s.size() != d.size()) throw std::invalid_argument("irl: parameter layout mismatch");
  std::copy(s.begin(), s.end(), d.begin());
}

}  // namespace

BasisModel make_irl_model(const BasisModel& basis) {
  BasisSpec spec = basis.spec();
  spec.num_prefs = 1;
  BasisModel irl(spec);
  if (irl.has_trunk()) copy_params(basis.trunk(), irl.trunk());
  copy_params(basis.phi(), irl.phi());
  copy_params(basis.psi(), irl.psi());
  irl.preferences().col(0) = basis.preferences().rowwise().mean();
  irl.sync_target();
  return irl;
}

double loss_bc(const BasisModel& model, const TransitionBatch& batch, BasisGrads& grads) {
  const BasisSpec& spec = model.spec();
  batch.validate(spec);
  grads.zero();
  const int B = batch.size();
  const int d = spec.d, A = spec.num_actions;

  Eigen::MatrixXd X = model.assemble_inputs(batch.obs, batch.task);
  MlpTape trunk_tape, psi_tape;
  Eigen::MatrixXd Z =
      model.has_trunk() ? model.trunk().forward(X, trunk_tape) : std::move(X);
  Eigen::MatrixXd Y = model.psi().forward(Z, psi_tape);

  double loss = 0.0;
  Eigen::MatrixXd cot = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d) * A, B);
  Eigen::VectorXd q(A), p(A);
  for (int i = 0; i < B; ++i) {
    int k = batch.task[i] >= 0 ? batch.task[i] : 0;
    if (k >= spec.num_prefs) throw std::invalid_argument("loss_bc: task out of range");
    auto w = model.preferences().col(k);
    for (int a = 0; a < A; ++a)
      q[a] = Y.col(i).segment(static_cast<Eigen::Index>(a) * d, d).dot(w);
    double m = q.maxCoeff();
    p = (q.array() - m).exp();
    p /= p.sum();
    loss -= std::log(std::max(p[batch.action[i]], 1e-300));
    // dQ = (p - onehot(a)) / B; dpsi_a = dQ_a * w; dw += sum_a dQ_a * psi_a
    for (int a = 0; a < A; ++a) {
      double g = (p[a] - (a == batch.action[i] ? 1.0 : 0.0)) / B;
      Eigen::Index ai = static_cast<Eigen::Index>(a) * d;
      cot.col(i).segment(ai, d) += g * w;
      grads.w.col(k) += g * Y.col(i).segment(ai, d);
    }
  }
  loss /= B;
  if (!std::isfinite(loss)) throw NonConvergence("loss_bc diverged", loss);

  if (model.has_trunk()) {
    Eigen::MatrixXd dZ;
    model.psi().backward(psi_tape, cot, grads.psi, &dZ);
    model.trunk().backward(trunk_tape, dZ, grads.trunk);
  } else {
    model.psi().backward(psi_tape, cot, grads.psi);
  }
  return loss;
}

IRLResult run_irl(BasisModel model, const DemoSet& demos, const IRLConfig& config) {
  config.validate();
  demos.validate();
  TransitionBatch all = demo_batch(demos);
  const long n = all.size();
  const int B = std::min<long>(config.batch_size, n);
  const int epochs = config.epochs_for(n);

  Rng rng(config.seed);
  Rng order_rng = rng.stream("irl-order");

  IRLResult out{std::move(model), {}};
  BasisModel& m = out.model;

  BasisGrads grads(m);
  AdamState bc_psi(m.psi().params().size()), bc_w(m.preferences().size());
  AdamState itd_psi(m.psi().params().size()), itd_phi(m.phi().params().size());
  AdamState bc_trunk(m.has_trunk() ? m.trunk().params().size() : 0);
  AdamState itd_trunk(bc_trunk.m.size());

  std::vector<long> order(n);
  std::iota(order.begin(), order.end(), 0);
  TransitionBatch mb;
  mb.obs.resize(all.obs.rows(), B);
  mb.next_obs.resize(all.obs.rows(), B);
  mb.action.resize(B);
  mb.next_action.resize(B);
  mb.task.resize(B);
  mb.reward.resize(B);
  mb.done.resize(B);

  long gstep = 0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    order_rng.shuffle(order);
    double bc_sum = 0.0, itd_sum = 0.0;
    long batches = 0;
    for (long start = 0; start + B <= n; start += B) {
      for (int j = 0; j < B; ++j) {
        long i = order[start + j];
        mb.obs.col(j) = all.obs.col(i);
        mb.next_obs.col(j) = all.next_obs.col(i);
        mb.action[j] = all.action[i];
        mb.next_action[j] = all.next_action[i];
        mb.task[j] = all.task[i];
        mb.reward[j] = all.reward[i];
        mb.done[j] = all.done[i];
      }
      bc_sum += loss_bc(m, mb, grads);
      if (m.has_trunk())
        optimizer_step(m.trunk().params(), grads.trunk, bc_trunk,
                       config.lr * config.bc_weight);
      optimizer_step(m.psi().params(), grads.psi, bc_psi, config.lr * config.bc_weight);
      optimizer_step(std::span<double>(m.preferences().data(), m.preferences().size()),
                     std::span<const double>(grads.w.data(), grads.w.size()), bc_w,
                     config.lr * config.bc_weight);

      itd_sum += loss_itd_e(m, mb, config.gamma, grads, config.freeze_phi);
      if (m.has_trunk())
        optimizer_step(m.trunk().params(), grads.trunk, itd_trunk,
                       config.lr * config.itd_weight);
      optimizer_step(m.psi().params(), grads.psi, itd_psi, config.lr * config.itd_weight);
      if (!config.freeze_phi)
        optimizer_step(m.phi().params(), grads.phi, itd_phi, config.lr * config.itd_weight);

      if (++gstep % config.target_update_interval == 0) m.sync_target();
      ++batches;
    }
    if (batches > 0)
      out.log.push_back({epoch, bc_sum / batches, itd_sum / batches});
  }
  return out;
}

ObsPolicy extract_policy(const BasisModel& model, PolicyMode mode) {
  // captures the model by reference: callers keep it alive during rollouts
  const int A = model.spec().num_actions;
  return [&model, mode, A](const Observation& obs) {
    Eigen::VectorXd q = model.q_values(obs, model.preferences().col(0));
    Eigen::VectorXd p = Eigen::VectorXd::Zero(A);
    if (mode == PolicyMode::greedy) {
      int best = 0;
      for (int a = 1; a < A; ++a)
        if (q[a] > q[best]) best = a;
      p[best] = 1.0;
    } else {
      Eigen::ArrayXd e = (q.array() - q.maxCoeff()).exp();
      p = (e / e.sum()).matrix();
    }
    return p;
  };
}

Eigen::MatrixXd inferred_reward_table(const BasisModel& model, const EnumeratedMdp& tab) {
  const int S = tab.mdp.num_states;
  const int A = tab.mdp.num_actions;
  const int d = model.spec().d;
  Eigen::MatrixXd out(S, A);
  Eigen::MatrixXd X;
  std::vector<int> ids;
  constexpr int kChunk = 4096;
  auto w = model.preferences().col(0);
  for (int start = 0; start < S; start += kChunk) {
    int n = std::min(kChunk, S - start);
    ids.resize(n);
    std::iota(ids.begin(), ids.end(), start);
    tab.fill_features(ids, X);
    std::vector<int> tasks(n, -1);
    Eigen::MatrixXd inputs = model.assemble_inputs(X, tasks);
    Eigen::MatrixXd Z = model.has_trunk() ? model.trunk().forward(inputs) : std::move(inputs);
    Eigen::MatrixXd Y = model.phi().forward(Z);
    for (int i = 0; i < n; ++i)
      for (int a = 0; a < A; ++a)
        out(start + i, a) = Y.col(i).segment(static_cast<Eigen::Index>(a) * d, d).dot(w);
  }
  return out;
}

PolicyTable tabular_policy(const BasisModel& model, const EnumeratedMdp& tab,
                           const Eigen::VectorXd& w, int task_onehot, PolicyMode mode) {
  const int S = tab.mdp.num_states;
  const int A = tab.mdp.num_actions;
  QTable q;
  q.values.resize(S, A);
  Eigen::MatrixXd X;
  std::vector<int> ids;
  constexpr int kChunk = 4096;
  for (int start = 0; start < S; start += kChunk) {
    int n = std::min(kChunk, S - start);
    ids.resize(n);
    std::iota(ids.begin(), ids.end(), start);
    tab.fill_features(ids, X);
    std::vector<int> tasks(n, task_onehot);
    q.values.middleRows(start, n) = model.q_values_batch(X, tasks, w).transpose();
  }
  return mode == PolicyMode::greedy ? greedy_policy(q) : softmax_policy(q);
}

}  // namespace basis
