#include "basis/sf_model.hpp"

#include <cmath>
#include <stdexcept>

#include "basis/tabular.hpp"

namespace basis {

void BasisSpec::validate() const {
  if (feature_dim < 1) throw std::invalid_argument("BasisSpec: feature_dim must be >= 1");
  if (task_channel < 0) throw std::invalid_argument("BasisSpec: task_channel negative");
  if (num_prefs < 1) throw std::invalid_argument("BasisSpec: num_prefs must be >= 1");
  if (d < 1) throw std::invalid_argument("BasisSpec: d must be >= 1");
  if (num_actions < 1) throw std::invalid_argument("BasisSpec: num_actions must be >= 1");
  if (has_trunk() && trunk_out < 1)
    throw std::invalid_argument("BasisSpec: trunk_out must be >= 1");
  for (int h : trunk_hidden)
    if (h < 1) throw std::invalid_argument("BasisSpec: trunk hidden sizes must be >= 1");
  for (int h : head_hidden)
    if (h < 1) throw std::invalid_argument("BasisSpec: head hidden sizes must be >= 1");
}

BasisModel::BasisModel(BasisSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  if (spec_.has_trunk())
    trunk_ = Mlp({spec_.input_dim(), spec_.trunk_hidden, spec_.activation, spec_.trunk_out});
  ApproximatorSpec head{spec_.head_input(), spec_.head_hidden, spec_.activation,
                        spec_.d * spec_.num_actions};
  phi_ = Mlp(head);
  psi_ = Mlp(head);
  psi_target_ = Mlp(head);
  w_ = Eigen::MatrixXd::Zero(spec_.d, spec_.num_prefs);
}

void BasisModel::init(Rng& rng) {
  if (has_trunk()) trunk_.init_uniform(rng);
  phi_.init_uniform(rng);
  psi_.init_uniform(rng);
  w_.setZero();
  sync_target();
}

void BasisModel::sync_target() {
  auto src = psi_.params().flat();
  auto dst = psi_target_.params().flat();
  std::copy(src.begin(), src.end(), dst.begin());
}

Eigen::MatrixXd BasisModel::assemble_inputs(const Eigen::MatrixXd& features,
                                            std::span<const int> tasks) const {
  if (features.rows() != spec_.feature_dim)
    throw std::invalid_argument("assemble_inputs: feature row mismatch");
  if (static_cast<size_t>(features.cols()) != tasks.size())
    throw std::invalid_argument("assemble_inputs: column/task count mismatch");
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(spec_.input_dim(), features.cols());
  X.topRows(spec_.feature_dim) = features;
  for (Eigen::Index i = 0; i < features.cols(); ++i) {
    int k = tasks[i];
    if (k >= spec_.task_channel)
      throw std::invalid_argument("assemble_inputs: task index exceeds channel width");
    if (k >= 0) X(spec_.feature_dim + k, i) = 1.0;
  }
  return X;
}

Eigen::MatrixXd BasisModel::head_output(const Mlp& head, const Observation& obs) const {
  if (obs.features.size() != spec_.feature_dim)
    throw std::invalid_argument("BasisModel: observation feature length mismatch");
  Eigen::VectorXd x = Eigen::VectorXd::Zero(spec_.input_dim());
  x.head(spec_.feature_dim) = obs.features;
  if (obs.task_onehot.size() > 0) {
    if (obs.task_onehot.size() != spec_.task_channel)
      throw std::invalid_argument("BasisModel: task channel width mismatch");
    x.tail(spec_.task_channel) = obs.task_onehot;
  }
  Eigen::MatrixXd xm = x;
  Eigen::MatrixXd z = has_trunk() ? trunk_.forward(xm) : xm;
  Eigen::MatrixXd y = head.forward(z);
  return Eigen::Map<Eigen::MatrixXd>(y.data(), spec_.d, spec_.num_actions);
}

Eigen::MatrixXd BasisModel::cumulants(const Observation& obs) const {
  return head_output(phi_, obs);
}

Eigen::MatrixXd BasisModel::successor(const Observation& obs, bool use_target) const {
  return head_output(use_target ? psi_target_ : psi_, obs);
}

Eigen::VectorXd BasisModel::q_values(const Observation& obs,
                                     const Eigen::VectorXd& w) const {
  if (w.size() != spec_.d) throw std::invalid_argument("q_values: |w| != d");
  return successor(obs).transpose() * w;
}

double BasisModel::predict_reward(const Observation& obs, int action,
                                  const Eigen::VectorXd& w) const {
  if (w.size() != spec_.d) throw std::invalid_argument("predict_reward: |w| != d");
  if (action < 0 || action >= spec_.num_actions)
    throw std::invalid_argument("predict_reward: action out of range");
  return cumulants(obs).col(action).dot(w);
}

Eigen::MatrixXd BasisModel::q_values_batch(const Eigen::MatrixXd& features,
                                           std::span<const int> tasks,
                                           const Eigen::VectorXd& w,
                                           bool use_target) const {
  Eigen::MatrixXd X = assemble_inputs(features, tasks);
  Eigen::MatrixXd Z = has_trunk() ? trunk_.forward(X) : std::move(X);
  Eigen::MatrixXd Y = (use_target ? psi_target_ : psi_).forward(Z);
  Eigen::MatrixXd Q(spec_.num_actions, features.cols());
  for (int a = 0; a < spec_.num_actions; ++a)
    Q.row(a) = w.transpose() * Y.middleRows(static_cast<Eigen::Index>(a) * spec_.d, spec_.d);
  return Q;
}

Eigen::VectorXd BasisModel::predict_reward_batch(const Eigen::MatrixXd& features,
                                                 std::span<const int> tasks,
                                                 std::span<const int> actions,
                                                 const Eigen::VectorXd& w) const {
  Eigen::MatrixXd X = assemble_inputs(features, tasks);
  Eigen::MatrixXd Z = has_trunk() ? trunk_.forward(X) : std::move(X);
  Eigen::MatrixXd Y = phi_.forward(Z);
  Eigen::VectorXd out(features.cols());
  for (Eigen::Index i = 0; i < features.cols(); ++i)
    out[i] = Y.col(i).segment(static_cast<Eigen::Index>(actions[i]) * spec_.d, spec_.d).dot(w);
  return out;
}

void TransitionBatch::validate(const BasisSpec& spec) const {
  const size_t n = action.size();
  if (n == 0) throw std::invalid_argument("TransitionBatch: empty batch");
  if (next_action.size() != n || task.size() != n || done.size() != n ||
      static_cast<size_t>(reward.size()) != n ||
      static_cast<size_t>(obs.cols()) != n || static_cast<size_t>(next_obs.cols()) != n)
    throw std::invalid_argument("TransitionBatch: field lengths differ");
  if (obs.rows() != spec.feature_dim || next_obs.rows() != spec.feature_dim)
    throw std::invalid_argument("TransitionBatch: feature rows mismatch");
  for (size_t i = 0; i < n; ++i) {
    if (action[i] < 0 || action[i] >= spec.num_actions || next_action[i] < 0 ||
        next_action[i] >= spec.num_actions)
      throw std::invalid_argument("TransitionBatch: action out of range");
    if (task[i] < -1 || task[i] >= spec.task_channel)
      throw std::invalid_argument("TransitionBatch: task id out of range");
  }
}

BasisGrads::BasisGrads(const BasisModel& model)
    : trunk(model.has_trunk() ? GradBuffer(model.trunk().params()) : GradBuffer()),
      phi(model.phi().params()),
      psi(model.psi().params()),
      w(Eigen::MatrixXd::Zero(model.spec().d, model.spec().num_prefs)) {}

void BasisGrads::zero() {
  trunk.zero();
  phi.zero();
  psi.zero();
  w.setZero();
}

namespace {

int pref_index(const BasisSpec& spec, int task, const char* who) {
  if (task < 0 || task >= spec.num_prefs)
    throw std::invalid_argument(std::string(who) + ": batch task must name a preference");
  return task;
}

void check_finite(double loss, const char* who) {
  if (!std::isfinite(loss)) throw NonConvergence(std::string(who) + " diverged", loss);
}

}  // namespace

double loss_q(const BasisModel& model, const TransitionBatch& batch, double gamma,
              double temperature, BasisGrads& grads) {
  const BasisSpec& spec = model.spec();
  batch.validate(spec);
  if (temperature <= 0.0) throw std::invalid_argument("loss_q: temperature must be > 0");
  grads.zero();
  const int B = batch.size();
  const int d = spec.d, A = spec.num_actions;

  Eigen::MatrixXd X = model.assemble_inputs(batch.obs, batch.task);
  Eigen::MatrixXd Xn = model.assemble_inputs(batch.next_obs, batch.task);
  MlpTape trunk_tape, psi_tape;
  Eigen::MatrixXd Z =
      model.has_trunk() ? model.trunk().forward(X, trunk_tape) : std::move(X);
  Eigen::MatrixXd Y = model.psi().forward(Z, psi_tape);
  Eigen::MatrixXd Zn = model.has_trunk() ? model.trunk().forward(Xn) : std::move(Xn);
  Eigen::MatrixXd Yn = model.psi_target().forward(Zn);

  Eigen::VectorXd residual(B);
  double loss = 0.0;
  for (int i = 0; i < B; ++i) {
    int k = pref_index(spec, batch.task[i], "loss_q");
    auto w = model.preferences().col(k);
    double qsa = Y.col(i).segment(static_cast<Eigen::Index>(batch.action[i]) * d, d).dot(w);
    double y = batch.reward[i];
    if (!batch.done[i]) {
      Eigen::VectorXd qn(A);
      for (int a = 0; a < A; ++a)
        qn[a] = Yn.col(i).segment(static_cast<Eigen::Index>(a) * d, d).dot(w);
      double m = qn.maxCoeff();
      double v = m + temperature * std::log(((qn.array() - m) / temperature).exp().sum());
      y += gamma * v;
    }
    residual[i] = qsa - y;
    loss += residual[i] * residual[i];
  }
  loss /= B;
  check_finite(loss, "loss_q");

  Eigen::MatrixXd cot = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d) * A, B);
  for (int i = 0; i < B; ++i) {
    int k = batch.task[i];
    double g = 2.0 * residual[i] / B;
    Eigen::Index ai = static_cast<Eigen::Index>(batch.action[i]) * d;
    cot.col(i).segment(ai, d) = g * model.preferences().col(k);
    grads.w.col(k) += g * Y.col(i).segment(ai, d);
  }
  if (model.has_trunk()) {
    Eigen::MatrixXd dZ;
    model.psi().backward(psi_tape, cot, grads.psi, &dZ);
    model.trunk().backward(trunk_tape, dZ, grads.trunk);
  } else {
    model.psi().backward(psi_tape, cot, grads.psi);
  }
  return loss;
}

double loss_reward(const BasisModel& model, const TransitionBatch& batch,
                   BasisGrads& grads) {
  const BasisSpec& spec = model.spec();
  batch.validate(spec);
  grads.zero();
  const int B = batch.size();
  const int d = spec.d;

  Eigen::MatrixXd X = model.assemble_inputs(batch.obs, batch.task);
  MlpTape trunk_tape, phi_tape;
  Eigen::MatrixXd Z =
      model.has_trunk() ? model.trunk().forward(X, trunk_tape) : std::move(X);
  Eigen::MatrixXd Y = model.phi().forward(Z, phi_tape);

  Eigen::VectorXd residual(B);
  double loss = 0.0;
  for (int i = 0; i < B; ++i) {
    int k = pref_index(spec, batch.task[i], "loss_reward");
    auto w = model.preferences().col(k);
    double rhat = Y.col(i).segment(static_cast<Eigen::Index>(batch.action[i]) * d, d).dot(w);
    residual[i] = rhat - batch.reward[i];
    loss += residual[i] * residual[i];
  }
  loss /= B;
  check_finite(loss, "loss_reward");

  Eigen::MatrixXd cot = Eigen::MatrixXd::Zero(Y.rows(), B);
  for (int i = 0; i < B; ++i) {
    int k = batch.task[i];
    double g = 2.0 * residual[i] / B;
    Eigen::Index ai = static_cast<Eigen::Index>(batch.action[i]) * d;
    cot.col(i).segment(ai, d) = g * model.preferences().col(k);
    grads.w.col(k) += g * Y.col(i).segment(ai, d);
  }
  if (model.has_trunk()) {
    Eigen::MatrixXd dZ;
    model.phi().backward(phi_tape, cot, grads.phi, &dZ);
    model.trunk().backward(trunk_tape, dZ, grads.trunk);
  } else {
    model.phi().backward(phi_tape, cot, grads.phi);
  }
  return loss;
}

double loss_itd(const BasisModel& model, const TransitionBatch& batch, double gamma,
                BasisGrads& grads, bool freeze_phi) {
  const BasisSpec& spec = model.spec();
  batch.validate(spec);
  grads.zero();
  const int B = batch.size();
  const int d = spec.d;

  Eigen::MatrixXd X = model.assemble_inputs(batch.obs, batch.task);
  Eigen::MatrixXd Xn = model.assemble_inputs(batch.next_obs, batch.task);
  MlpTape trunk_tape, psi_tape, phi_tape;
  Eigen::MatrixXd Z =
      model.has_trunk() ? model.trunk().forward(X, trunk_tape) : std::move(X);
  Eigen::MatrixXd Ypsi = model.psi().forward(Z, psi_tape);
  Eigen::MatrixXd Yphi =
      freeze_phi ? model.phi().forward(Z) : model.phi().forward(Z, phi_tape);
  Eigen::MatrixXd Zn = model.has_trunk() ? model.trunk().forward(Xn) : std::move(Xn);
  Eigen::MatrixXd Yn = model.psi_target().forward(Zn);

  Eigen::MatrixXd resid(d, B);
  double loss = 0.0;
  for (int i = 0; i < B; ++i) {
    Eigen::Index ai = static_cast<Eigen::Index>(batch.action[i]) * d;
    Eigen::Index ni = static_cast<Eigen::Index>(batch.next_action[i]) * d;
    resid.col(i) = Ypsi.col(i).segment(ai, d) - Yphi.col(i).segment(ai, d);
    if (!batch.done[i]) resid.col(i) -= gamma * Yn.col(i).segment(ni, d);
    loss += resid.col(i).squaredNorm();
  }
  loss /= B;
  check_finite(loss, "loss_itd");

  Eigen::MatrixXd cot_psi = Eigen::MatrixXd::Zero(Ypsi.rows(), B);
  for (int i = 0; i < B; ++i)
    cot_psi.col(i).segment(static_cast<Eigen::Index>(batch.action[i]) * d, d) =
        (2.0 / B) * resid.col(i);

  if (model.has_trunk()) {
    Eigen::MatrixXd dZ;
    model.psi().backward(psi_tape, cot_psi, grads.psi, &dZ);
    if (!freeze_phi) {
      Eigen::MatrixXd dZphi;
      model.phi().backward(phi_tape, -cot_psi, grads.phi, &dZphi);
      dZ += dZphi;
    }
    model.trunk().backward(trunk_tape, dZ, grads.trunk);
  } else {
    model.psi().backward(psi_tape, cot_psi, grads.psi);
    if (!freeze_phi) model.phi().backward(phi_tape, -cot_psi, grads.phi);
  }
  return loss;
}

}  // namespace basis
