#pragma once

#include <vector>

#include "basis/replay.hpp"
#include "basis/sf_model.hpp"
#include "basis/task_suite.hpp"

namespace basis {

struct PretrainConfig {
  EnvConfig env;
  int K = 3;
  int d = 8;
  double gamma = 0.95;
  int total_iterations = 750;  // episodes; steps = iterations * episode_horizon
  int episode_horizon = 40;
  int gradient_steps_per_iteration = 40;
  int batch_size = 64;
  double lr = 1e-3;
  int target_update_interval = 1000;
  // behavior softmax temperature, annealed linearly from the start value to
  // the final value over the first anneal_fraction of iterations
  double exploration_temperature = 1.0;
  double exploration_temperature_final = 1.0;
  double exploration_anneal_fraction = 0.8;
  double backup_temperature = 1.0;  // soft-backup log-sum-exp temperature
  size_t buffer_capacity = 120000;
  uint64_t seed = 0;
  std::vector<int> trunk_hidden{128};  // empty = identity trunk
  int trunk_out = 128;
  std::vector<int> head_hidden;
  void validate() const;
};

struct PretrainLogRow {
  int iteration = 0;
  int task = 0;
  double episode_return = 0.0;
  double loss_q = 0.0, loss_reward = 0.0, loss_itd = 0.0;
};

// Every tenth collected transition is routed to a held-out slice instead of
// the replay buffer, giving an unbiased same-distribution reward-loss probe.
struct PretrainResult {
  BasisModel model;
  TaskSuite suite;
  std::vector<PretrainLogRow> log;
  TransitionBatch held_out;
};

// The one-argument form derives the task suite from the config; the explicit
// form trains on the given tasks (e.g. a single-task learned expert) and
// overrides config.K with the suite size.
PretrainResult run_pretraining(const PretrainConfig& config);
PretrainResult run_pretraining(const PretrainConfig& config, TaskSuite suite);

// Plain multi-task soft-backup Q network (ablation baseline): same trunk and
// task-channel wiring, but a Q head of |A| outputs replaces the phi/psi/w
// decomposition.
class DqnModel {
 public:
  DqnModel(BasisSpec spec);  // d is ignored; head outputs num_actions values

  const BasisSpec& spec() const { return spec_; }
  bool has_trunk() const { return spec_.has_trunk(); }
  Mlp& trunk() { return trunk_; }
  const Mlp& trunk() const { return trunk_; }
  Mlp& q_head() { return q_; }
  const Mlp& q_head() const { return q_; }
  Mlp& q_target() { return q_target_; }
  const Mlp& q_target() const { return q_target_; }

  void init(Rng& rng);
  void sync_target();
  Eigen::MatrixXd q_values_batch(const Eigen::MatrixXd& features,
                                 std::span<const int> tasks) const;  // A x B

 private:
  BasisSpec spec_;
  Mlp trunk_, q_, q_target_;
};

struct DqnGrads {
  explicit DqnGrads(const DqnModel& model);
  void zero();
  GradBuffer trunk, q;
};

// Soft Bellman regression for the plain Q network (same backup as loss_q).
double loss_q_dqn(const DqnModel& model, const TransitionBatch& batch, double gamma,
                  double temperature, DqnGrads& grads);

// Behavioral cloning directly on the plain Q network (the no-successor-feature
// ablation's IRL phase); rows with task -1 get the all-zero task channel.
double loss_bc_dqn(const DqnModel& model, const TransitionBatch& batch, DqnGrads& grads);

struct DqnPretrainResult {
  DqnModel model;
  TaskSuite suite;
};

DqnPretrainResult run_dqn_pretraining(const PretrainConfig& config);

}  // namespace basis
