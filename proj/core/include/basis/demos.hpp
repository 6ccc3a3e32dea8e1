#pragma once

#include <filesystem>

#include "basis/pretrain.hpp"

namespace basis {

// Demonstrator for a held-out task, represented exactly over the enumerated
// state space together with its reference return.
struct Expert {
  PolicyTable policy;
  QTable q;
  double reference_return = 0.0;  // undiscounted finite-horizon return
};

// Maximum-entropy expert: softmax of the soft-value-iteration fixed point.
Expert make_exact_expert(const EnumeratedMdp& tab, int task, int horizon,
                         double temperature = 1.0);

// Expert obtained by running the pre-training loop on the single test task,
// then reading its softmax policy off the enumerated states. task indexes the
// test task's reward table inside tab.
Expert make_learned_expert(const EnumeratedMdp& tab, const PretrainConfig& config,
                           const TaskSpec& test_task, int task,
                           double temperature = 1.0);

// Reward-free demonstration set. Learner-facing records carry observations
// and actions only; the reward channel is sealed for evaluation.
struct DemoSet {
  std::vector<Trajectory> trajectories;
  int feature_dim = 0;
  size_t size() const { return trajectories.size(); }
  long total_steps() const;
  void validate() const;
};

DemoSet sample_demos(const EnumeratedMdp& tab, const Expert& expert, int task,
                     int count, int horizon, Rng& rng);

// Text format: per trajectory a header line `traj <id> <length>` followed by
// `obs=<comma-separated reals> action=<int>` lines (reals at 9 significant
// digits). Rewards go to a sibling `<path>.rewards` file, never to the demos.
void write_demos(const DemoSet& demos, const std::filesystem::path& path);
DemoSet read_demos(const std::filesystem::path& path, bool with_rewards = false);

// First `count` trajectories of a larger set (shared prefix across demo-count
// sweeps, mirroring "N demonstrations" comparisons).
DemoSet demo_prefix(const DemoSet& demos, int count);

// Flattens demos into a training batch: task = -1 (task identity hidden),
// done = 1 on each trajectory's final step, next_action = 0 there.
TransitionBatch demo_batch(const DemoSet& demos);

}  // namespace basis
