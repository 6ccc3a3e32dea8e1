#include "basis/pretrain.hpp"

#include <cmath>
#include <stdexcept>

namespace basis {

void PretrainConfig::validate() const {
  if (K < 1 || d < 1) throw std::invalid_argument("pretrain: K and d must be >= 1");
  if (gamma < 0.0 || gamma >= 1.0) throw std::invalid_argument("pretrain: gamma in [0,1)");
  if (total_iterations < 1 || episode_horizon < 1 || gradient_steps_per_iteration < 1 ||
      batch_size < 1 || target_update_interval < 1)
    throw std::invalid_argument("pretrain: counts must be >= 1");
  if (lr <= 0.0) throw std::invalid_argument("pretrain: lr must be > 0");
  if (exploration_temperature <= 0.0 || exploration_temperature_final <= 0.0 ||
      backup_temperature <= 0.0)
    throw std::invalid_argument("pretrain: temperatures must be > 0");
  if (exploration_anneal_fraction < 0.0 || exploration_anneal_fraction > 1.0)
    throw std::invalid_argument("pretrain: anneal fraction in [0,1]");
  if (buffer_capacity < static_cast<size_t>(batch_size))
    throw std::invalid_argument("pretrain: buffer capacity below batch size");
}

namespace {

Eigen::VectorXd boltzmann(const Eigen::VectorXd& q, double temperature) {
  Eigen::ArrayXd z = (q.array() - q.maxCoeff()) / temperature;
  Eigen::ArrayXd e = z.exp();
  return (e / e.sum()).matrix();
}

double annealed_temperature(const PretrainConfig& config, int iter) {
  double span = config.exploration_anneal_fraction * config.total_iterations;
  double t = span > 0.0 ? std::min(1.0, iter / span) : 1.0;
  return config.exploration_temperature +
         (config.exploration_temperature_final - config.exploration_temperature) * t;
}

// Rolls one episode under softmax(Q/temperature) for task k, splitting the
// logged transitions between the replay buffer and the held-out slice.
template <typename QFn>
double collect_episode(Env& env, const QFn& q_of, double temperature, int horizon,
                       Rng& rng, ReplayBuffer& buffer, ReplayBuffer& held_out,
                       int task, long& n_seen) {
  Observation obs = env.reset(rng);
  double episode_return = 0.0;
  Transition pending;
  bool have_pending = false;
  for (int t = 0; t < horizon; ++t) {
    Eigen::VectorXd probs = boltzmann(q_of(obs), temperature);
    int a = rng.choice(std::span<const double>(probs.data(), probs.size()));
    StepOutcome out = env.step(a, rng);
    episode_return += out.reward;
    if (have_pending) {
      pending.next_action = a;
      ((++n_seen % 10 == 0) ? held_out : buffer).push(std::move(pending));
    }
    pending = Transition{obs.features, out.obs.features, a,      0,
                         task,         out.reward,       out.terminal ? uint8_t{1} : uint8_t{0}};
    have_pending = true;
    obs = std::move(out.obs);
    if (out.done) break;
  }
  if (have_pending) {
    // truncated episodes bootstrap; the next action is drawn from the policy
    if (!pending.done) {
      Eigen::VectorXd probs = boltzmann(q_of(obs), temperature);
      pending.next_action = rng.choice(std::span<const double>(probs.data(), probs.size()));
    }
    ((++n_seen % 10 == 0) ? held_out : buffer).push(std::move(pending));
  }
  return episode_return;
}

}  // namespace

PretrainResult run_pretraining(const PretrainConfig& config) {
  return run_pretraining(config, make_task_suite(config.env, config.K, config.seed));
}

PretrainResult run_pretraining(const PretrainConfig& config, TaskSuite suite) {
  config.validate();
  if (suite.tasks.empty()) throw std::invalid_argument("pretrain: empty task suite");
  const int K = static_cast<int>(suite.tasks.size());
  auto env = make_env(config.env);

  BasisSpec spec;
  spec.feature_dim = env->feature_dim();
  spec.task_channel = K;
  spec.num_prefs = K;
  spec.d = config.d;
  spec.num_actions = env->action_count();
  spec.trunk_hidden = config.trunk_hidden;
  spec.trunk_out = config.trunk_out;
  spec.head_hidden = config.head_hidden;

  Rng root(config.seed);
  BasisModel model(spec);
  {
    Rng init_rng = root.stream("init");
    model.init(init_rng);
  }

  ReplayBuffer buffer(config.buffer_capacity);
  ReplayBuffer held_out(std::max<size_t>(1, config.buffer_capacity / 10));
  Rng task_rng = root.stream("tasks");
  Rng buffer_rng = root.stream("buffer");

  PretrainResult result{std::move(model), std::move(suite), {}, {}};
  BasisModel& m = result.model;

  BasisGrads grads(m);
  AdamState q_psi(m.psi().params().size()), q_w(m.preferences().size());
  AdamState r_phi(m.phi().params().size()), r_w(m.preferences().size());
  AdamState itd_psi(m.psi().params().size());
  AdamState q_trunk(m.has_trunk() ? m.trunk().params().size() : 0);
  AdamState r_trunk(q_trunk.m.size()), itd_trunk(q_trunk.m.size());

  auto step_w = [&](AdamState& state) {
    optimizer_step(std::span<double>(m.preferences().data(), m.preferences().size()),
                   std::span<const double>(grads.w.data(), grads.w.size()), state,
                   config.lr);
  };
  long n_seen = 0;
  long grad_steps = 0;
  for (int iter = 0; iter < config.total_iterations; ++iter) {
    int k = task_rng.uniform_int(K);
    env->set_task(result.suite.tasks[k], K, k);
    Rng ep_rng = root.stream("env", static_cast<uint64_t>(iter));
    auto q_of = [&](const Observation& obs) {
      return m.q_values(obs, m.preferences().col(k));
    };
    double episode_return =
        collect_episode(*env, q_of, annealed_temperature(config, iter),
                        config.episode_horizon, ep_rng, buffer, held_out, k, n_seen);

    PretrainLogRow row{iter, k, episode_return, 0.0, 0.0, 0.0};
    if (buffer.size() >= static_cast<size_t>(config.batch_size)) {
      for (int g = 0; g < config.gradient_steps_per_iteration; ++g) {
        row.loss_q = loss_q(m, buffer.sample(config.batch_size, buffer_rng),
                            config.gamma, config.backup_temperature, grads);
        if (m.has_trunk()) optimizer_step(m.trunk().params(), grads.trunk, q_trunk, config.lr);
        optimizer_step(m.psi().params(), grads.psi, q_psi, config.lr);
        step_w(q_w);

        row.loss_reward =
            loss_reward(m, buffer.sample(config.batch_size, buffer_rng), grads);
        if (m.has_trunk()) optimizer_step(m.trunk().params(), grads.trunk, r_trunk, config.lr);
        optimizer_step(m.phi().params(), grads.phi, r_phi, config.lr);
        step_w(r_w);

        row.loss_itd = loss_itd(m, buffer.sample(config.batch_size, buffer_rng),
                                config.gamma, grads);
        if (m.has_trunk())
          optimizer_step(m.trunk().params(), grads.trunk, itd_trunk, config.lr);
        optimizer_step(m.psi().params(), grads.psi, itd_psi, config.lr);

        if (++grad_steps % config.target_update_interval == 0) m.sync_target();
      }
    }
    result.log.push_back(row);
  }
  result.held_out = held_out.size() > 0 ? held_out.as_batch() : TransitionBatch{};
  return result;
}

DqnModel::DqnModel(BasisSpec spec) : spec_(std::move(spec)) {
  spec_.d = 1;  // unused by the plain Q network
  spec_.validate();
  if (spec_.has_trunk())
    trunk_ = Mlp({spec_.input_dim(), spec_.trunk_hidden, spec_.activation, spec_.trunk_out});
  ApproximatorSpec head{spec_.head_input(), spec_.head_hidden, spec_.activation,
                        spec_.num_actions};
  q_ = Mlp(head);
  q_target_ = Mlp(head);
}

void DqnModel::init(Rng& rng) {
  if (has_trunk()) trunk_.init_uniform(rng);
  q_.init_uniform(rng);
  sync_target();
}

void DqnModel::sync_target() {
  auto src = q_.params().flat();
  std::copy(src.begin(), src.end(), q_target_.params().flat().begin());
}

Eigen::MatrixXd DqnModel::q_values_batch(const Eigen::MatrixXd& features,
                                         std::span<const int> tasks) const {
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(spec_.input_dim(), features.cols());
  X.topRows(spec_.feature_dim) = features;
  for (Eigen::Index i = 0; i < features.cols(); ++i)
    if (tasks[i] >= 0) X(spec_.feature_dim + tasks[i], i) = 1.0;
  Eigen::MatrixXd Z = has_trunk() ? trunk_.forward(X) : std::move(X);
  return q_.forward(Z);
}

DqnGrads::DqnGrads(const DqnModel& model)
    : trunk(model.has_trunk() ? GradBuffer(model.trunk().params()) : GradBuffer()),
      q(model.q_head().params()) {}

void DqnGrads::zero() {
  trunk.zero();
  q.zero();
}

double loss_q_dqn(const DqnModel& model, const TransitionBatch& batch, double gamma,
                  double temperature, DqnGrads& grads) {
  grads.zero();
  const int B = batch.size();
  const int A = model.spec().num_actions;
  const int fdim = model.spec().feature_dim;

  auto assemble = [&](const Eigen::MatrixXd& features) {
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(model.spec().input_dim(), features.cols());
    X.topRows(fdim) = features;
    for (Eigen::Index i = 0; i < features.cols(); ++i)
      if (batch.task[i] >= 0) X(fdim + batch.task[i], i) = 1.0;
    return X;
  };
  Eigen::MatrixXd X = assemble(batch.obs);
  Eigen::MatrixXd Xn = assemble(batch.next_obs);
  MlpTape trunk_tape, q_tape;
  Eigen::MatrixXd Z =
      model.has_trunk() ? model.trunk().forward(X, trunk_tape) : std::move(X);
  Eigen::MatrixXd Y = model.q_head().forward(Z, q_tape);
  Eigen::MatrixXd Zn = model.has_trunk() ? model.trunk().forward(Xn) : std::move(Xn);
  Eigen::MatrixXd Yn = model.q_target().forward(Zn);

  double loss = 0.0;
  Eigen::VectorXd residual(B);
  for (int i = 0; i < B; ++i) {
    double y = batch.reward[i];
    if (!batch.done[i]) {
      Eigen::VectorXd qn = Yn.col(i);
      double mx = qn.maxCoeff();
      y += gamma * (mx + temperature * std::log(((qn.array() - mx) / temperature).exp().sum()));
    }
    residual[i] = Y(batch.action[i], i) - y;
    loss += residual[i] * residual[i];
  }
  loss /= B;
  if (!std::isfinite(loss)) throw NonConvergence("loss_q_dqn diverged", loss);

  Eigen::MatrixXd cot = Eigen::MatrixXd::Zero(A, B);
  for (int i = 0; i < B; ++i) cot(batch.action[i], i) = 2.0 * residual[i] / B;
  if (model.has_trunk()) {
    Eigen::MatrixXd dZ;
    model.q_head().backward(q_tape, cot, grads.q, &dZ);
    model.trunk().backward(trunk_tape, dZ, grads.trunk);
  } else {
    model.q_head().backward(q_tape, cot, grads.q);
  }
  return loss;
}

double loss_bc_dqn(const DqnModel& model, const TransitionBatch& batch, DqnGrads& grads) {
  grads.zero();
  const int B = batch.size();
  const int A = model.spec().num_actions;
  const int fdim = model.spec().feature_dim;

  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(model.spec().input_dim(), B);
  X.topRows(fdim) = batch.obs;
  for (int i = 0; i < B; ++i)
    if (batch.task[i] >= 0) X(fdim + batch.task[i], i) = 1.0;
  MlpTape trunk_tape, q_tape;
  Eigen::MatrixXd Z =
      model.has_trunk() ? model.trunk().forward(X, trunk_tape) : std::move(X);
  Eigen::MatrixXd Y = model.q_head().forward(Z, q_tape);

  double loss = 0.0;
  Eigen::MatrixXd cot(A, B);
  for (int i = 0; i < B; ++i) {
    Eigen::VectorXd p = (Y.col(i).array() - Y.col(i).maxCoeff()).exp();
    p /= p.sum();
    loss -= std::log(std::max(p[batch.action[i]], 1e-300));
    cot.col(i) = p / B;
    cot(batch.action[i], i) -= 1.0 / B;
  }
  loss /= B;
  if (!std::isfinite(loss)) throw NonConvergence("loss_bc_dqn diverged", loss);

  if (model.has_trunk()) {
    Eigen::MatrixXd dZ;
    model.q_head().backward(q_tape, cot, grads.q, &dZ);
    model.trunk().backward(trunk_tape, dZ, grads.trunk);
  } else {
    model.q_head().backward(q_tape, cot, grads.q);
  }
  return loss;
}

DqnPretrainResult run_dqn_pretraining(const PretrainConfig& config) {
  config.validate();
  auto env = make_env(config.env);
  TaskSuite suite = make_task_suite(config.env, config.K, config.seed);

  BasisSpec spec;
  spec.feature_dim = env->feature_dim();
  spec.task_channel = config.K;
  spec.num_prefs = config.K;
  spec.d = 1;
  spec.num_actions = env->action_count();
  spec.trunk_hidden = config.trunk_hidden;
  spec.trunk_out = config.trunk_out;
  spec.head_hidden = config.head_hidden;

  Rng root(config.seed);
  DqnModel model(spec);
  {
    Rng init_rng = root.stream("init");
    model.init(init_rng);
  }
  ReplayBuffer buffer(config.buffer_capacity);
  ReplayBuffer held_out(std::max<size_t>(1, config.buffer_capacity / 10));
  Rng task_rng = root.stream("tasks");
  Rng buffer_rng = root.stream("buffer");

  DqnPretrainResult result{std::move(model), std::move(suite)};
  DqnModel& m = result.model;

  DqnGrads grads(m);
  AdamState opt_q(m.q_head().params().size());
  AdamState opt_trunk(m.has_trunk() ? m.trunk().params().size() : 0);
  long n_seen = 0;
  long grad_steps = 0;
  for (int iter = 0; iter < config.total_iterations; ++iter) {
    int k = task_rng.uniform_int(config.K);
    env->set_task(result.suite.tasks[k], config.K, k);
    Rng ep_rng = root.stream("env", static_cast<uint64_t>(iter));
    auto q_of = [&](const Observation& obs) -> Eigen::VectorXd {
      std::array<int, 1> task{k};
      Eigen::MatrixXd f = obs.features;
      return m.q_values_batch(f, task).col(0);
    };
    collect_episode(*env, q_of, annealed_temperature(config, iter),
                    config.episode_horizon, ep_rng, buffer, held_out, k, n_seen);
    if (buffer.size() >= static_cast<size_t>(config.batch_size)) {
      for (int g = 0; g < config.gradient_steps_per_iteration; ++g) {
        loss_q_dqn(m, buffer.sample(config.batch_size, buffer_rng), config.gamma,
                   config.backup_temperature, grads);
        if (m.has_trunk()) optimizer_step(m.trunk().params(), grads.trunk, opt_trunk, config.lr);
        optimizer_step(m.q_head().params(), grads.q, opt_q, config.lr);
        if (++grad_steps % config.target_update_interval == 0) m.sync_target();
      }
    }
  }
  return result;
}

}  // namespace basis
