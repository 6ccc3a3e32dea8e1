#pragma once

#include <optional>
#include <span>
#include <vector>

#include "basis/approx.hpp"
#include "basis/env.hpp"

namespace basis {

// Architecture of the cumulant/successor stack. The trunk is shared by both
// heads; an empty trunk_hidden means the identity trunk (features pass
// straight to the heads, no trunk parameters). task_channel is the width of
// the task one-hot appended to the features; num_prefs is the number of
// preference vectors (K during pre-training, 1 for the inferred demonstrator).
struct BasisSpec {
  int feature_dim = 0;
  int task_channel = 0;
  int num_prefs = 0;
  int d = 0;
  int num_actions = 0;
  std::vector<int> trunk_hidden;
  int trunk_out = 0;  // trunk output width; ignored for the identity trunk
  std::vector<int> head_hidden;
  Activation activation = Activation::relu;

  int input_dim() const { return feature_dim + task_channel; }
  int head_input() const { return trunk_hidden.empty() ? input_dim() : trunk_out; }
  bool has_trunk() const { return !trunk_hidden.empty(); }
  void validate() const;
  bool operator==(const BasisSpec&) const = default;
};

// Cumulants phi, successor features psi with a lagged target copy, and
// preference vectors, all over a shared trunk. Heads emit d * num_actions
// values per observation; rows [a*d, (a+1)*d) are the action-a vector.
class BasisModel {
 public:
  explicit BasisModel(BasisSpec spec);

  void init(Rng& rng);  // heads/trunk uniform +-1/sqrt(fan_in); preferences zero

  const BasisSpec& spec() const { return spec_; }
  bool has_trunk() const { return spec_.has_trunk(); }
  Mlp& trunk() { return trunk_; }
  const Mlp& trunk() const { return trunk_; }
  Mlp& phi() { return phi_; }
  const Mlp& phi() const { return phi_; }
  Mlp& psi() { return psi_; }
  const Mlp& psi() const { return psi_; }
  Mlp& psi_target() { return psi_target_; }
  const Mlp& psi_target() const { return psi_target_; }
  Eigen::MatrixXd& preferences() { return w_; }               // d x num_prefs
  const Eigen::MatrixXd& preferences() const { return w_; }

  // [features; task one-hot] inputs, one column per sample; task -1 -> zeros
  Eigen::MatrixXd assemble_inputs(const Eigen::MatrixXd& features,
                                  std::span<const int> tasks) const;

  // single-observation evaluation (columns indexed by action)
  Eigen::MatrixXd cumulants(const Observation& obs) const;
  Eigen::MatrixXd successor(const Observation& obs, bool use_target = false) const;
  Eigen::VectorXd q_values(const Observation& obs, const Eigen::VectorXd& w) const;
  double predict_reward(const Observation& obs, int action,
                        const Eigen::VectorXd& w) const;

  // batched evaluation over raw feature columns
  Eigen::MatrixXd q_values_batch(const Eigen::MatrixXd& features,
                                 std::span<const int> tasks, const Eigen::VectorXd& w,
                                 bool use_target = false) const;  // A x B
  Eigen::VectorXd predict_reward_batch(const Eigen::MatrixXd& features,
                                       std::span<const int> tasks,
                                       std::span<const int> actions,
                                       const Eigen::VectorXd& w) const;

  void sync_target();  // bit-exact copy of psi params into the target

 private:
  Eigen::MatrixXd head_output(const Mlp& head, const Observation& obs) const;

  BasisSpec spec_;
  Mlp trunk_, phi_, psi_, psi_target_;
  Eigen::MatrixXd w_;
};

// One replay/demo batch in struct-of-arrays form. Feature matrices hold one
// column per sample; task entries of -1 select the all-zero task channel.
struct TransitionBatch {
  Eigen::MatrixXd obs, next_obs;  // feature_dim x B
  std::vector<int> action, next_action, task;
  Eigen::VectorXd reward;
  std::vector<uint8_t> done;  // 1 = true terminal: no bootstrap

  int size() const { return static_cast<int>(action.size()); }
  void validate(const BasisSpec& spec) const;
};

// Gradients for every trainable block of a BasisModel. Losses zero the whole
// buffer on entry, so blocks a loss must not touch stay exactly zero.
struct BasisGrads {
  explicit BasisGrads(const BasisModel& model);
  void zero();
  GradBuffer trunk, phi, psi;
  Eigen::MatrixXd w;
};

// Soft Bellman regression of psi^T w toward r + gamma * temperature *
// log-sum-exp of target Q / temperature. Gradients: psi head, trunk, and the
// batch's preference vectors.
double loss_q(const BasisModel& model, const TransitionBatch& batch, double gamma,
              double temperature, BasisGrads& grads);

// (phi(s,a) . w_k - r)^2, averaged. Gradients: phi head, trunk, preferences.
double loss_reward(const BasisModel& model, const TransitionBatch& batch,
                   BasisGrads& grads);

// || psi(s,a) - stopgrad(phi(s,a)) - gamma * psi_target(s',a') ||^2, averaged
// over the batch. Gradients: psi head and trunk through it; never phi, never
// the target. With freeze_phi = false the cumulant head also receives the
// (negated) residual gradient.
double loss_itd(const BasisModel& model, const TransitionBatch& batch, double gamma,
                BasisGrads& grads, bool freeze_phi = true);

}  // namespace basis
