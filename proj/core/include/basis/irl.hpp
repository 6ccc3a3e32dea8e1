#pragma once

#include "basis/demos.hpp"

namespace basis {

struct IRLConfig {
  std::vector<int> demo_counts{10, 30, 100, 300, 1000};
  int epochs = 0;                 // 0 = derive from min_gradient_steps
  int min_gradient_steps = 3000;  // auto-epoch target across demo-set sizes
  int batch_size = 64;
  double lr = 1e-3;
  double gamma = 0.95;
  double bc_weight = 1.0;
  double itd_weight = 1.0;
  bool freeze_phi = true;
  int target_update_interval = 200;
  uint64_t seed = 0;
  void validate() const;
  int epochs_for(long demo_steps) const;
};

// Initialization from a pre-trained basis: copies trunk and both heads
// bit-exactly, sets the single preference column w_e to the mean of the
// pre-training preference vectors, and syncs the target head.
BasisModel make_irl_model(const BasisModel& basis);

// Behavioral cloning under the max-entropy action model: cross-entropy of
// softmax(psi^T w) against demonstrated actions. Gradients flow to the psi
// head, trunk, and w; never to phi. Rows with task -1 use preference column 0.
double loss_bc(const BasisModel& model, const TransitionBatch& batch, BasisGrads& grads);

// IRL-phase ITD loss: identical form to the pre-training ITD loss, with the
// phi head frozen unless the ablation unfreezes it.
inline double loss_itd_e(const BasisModel& model, const TransitionBatch& batch,
                         double gamma, BasisGrads& grads, bool freeze_phi = true) {
  return loss_itd(model, batch, gamma, grads, freeze_phi);
}

struct IRLLogRow {
  int epoch = 0;
  double bc_loss = 0.0;
  double itd_loss = 0.0;
};

struct IRLResult {
  BasisModel model;  // single preference column: w_e
  std::vector<IRLLogRow> log;
};

// Alternating BC / ITD epochs over shuffled demo batches with periodic target
// sync. The model argument carries the initialization (pre-trained via
// make_irl_model, or freshly random for the no-pre-training ablation).
IRLResult run_irl(BasisModel model, const DemoSet& demos, const IRLConfig& config);

enum class PolicyMode { greedy, softmax };

// Executable policy of an IRL model: greedy breaks ties toward the lowest
// action index; softmax uses temperature 1. Task channel is all-zero.
ObsPolicy extract_policy(const BasisModel& model, PolicyMode mode);

// Inferred reward on the enumerated states, r(s,a) = phi(s,a)^T w_e.
Eigen::MatrixXd inferred_reward_table(const BasisModel& model, const EnumeratedMdp& tab);

// Greedy/softmax policy table of a model evaluated over enumerated states.
PolicyTable tabular_policy(const BasisModel& model, const EnumeratedMdp& tab,
                           const Eigen::VectorXd& w, int task_onehot, PolicyMode mode);

}  // namespace basis
