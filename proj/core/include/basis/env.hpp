#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "basis/rng.hpp"
#include "basis/tabular.hpp"

namespace basis {

struct TaskSpec {
  int id = 0;
  Eigen::VectorXd reward_weights;
  std::string description;
};

// Feature planes plus the task channel. task_onehot is all-zero when the
// observation is emitted for IRL consumers (demonstrations carry no task).
struct Observation {
  Eigen::VectorXd features;
  Eigen::VectorXd task_onehot;
};

struct StepOutcome {
  Observation obs;
  double reward = 0.0;
  bool done = false;      // episode over (terminal state or horizon reached)
  bool terminal = false;  // true terminal (collision); horizon alone leaves this false
  int event = -1;         // FruitGrid: collected color index, -1 otherwise
};

class Env {
 public:
  virtual ~Env() = default;
  virtual int action_count() const = 0;
  virtual int feature_dim() const = 0;
  virtual int horizon() const = 0;
  virtual int num_reward_terms() const = 0;

  // Selects the active task. num_tasks sizes the task_onehot channel; a
  // negative onehot_index emits the all-zero task vector (IRL convention).
  virtual void set_task(const TaskSpec& task, int num_tasks, int onehot_index) = 0;

  virtual Observation reset(Rng& rng) = 0;
  virtual StepOutcome step(int action, Rng& rng) = 0;
};

// Exact tabular image of an environment, plus enough side channels to
// evaluate learned models against it.
struct EnumeratedMdp {
  TabularMDP mdp;
  int feature_dim = 0;
  // writes features of the given states into X (feature_dim x n, one column each)
  std::function<void(std::span<const int>, Eigen::MatrixXd&)> fill_features;
  Eigen::MatrixXi event;        // S x A event channel (FruitGrid collect color; -1 none)
  std::vector<int> state_lane;  // LaneWorld lane per state (-1 for terminal)
};

// Environment-mode rollout: undiscounted, horizon-bounded, observation records.
// policy maps an Observation to action probabilities.
using ObsPolicy = std::function<Eigen::VectorXd(const Observation&)>;
Trajectory rollout(Env& env, const ObsPolicy& policy, int horizon, Rng& rng);

// Monte Carlo undiscounted return over seeded episodes (environment mode).
double expected_return(Env& env, const ObsPolicy& policy, int episodes, int horizon,
                       Rng& rng);

}  // namespace basis
