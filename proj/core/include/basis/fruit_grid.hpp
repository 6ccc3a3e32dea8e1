#pragma once

#include "basis/env.hpp"

namespace basis {

struct FruitGridConfig {
  int grid_size = 5;
  int colors = 3;
  int fruits_per_color = 1;
  int horizon = 40;
  bool respawn = true;

  int cells() const { return grid_size * grid_size; }
  void validate() const;
};

// Gridworld with colored fruits. Moving onto a fruit cell collects it for
// reward_weights[color]; with respawn on, a replacement appears at a random
// empty cell, so exactly fruits_per_color fruits of each color persist.
class FruitGrid : public Env {
 public:
  explicit FruitGrid(FruitGridConfig config);

  int action_count() const override { return 4; }  // up, down, left, right
  // absolute agent plane + one agent-relative occupancy plane per color
  int feature_dim() const override {
    return config_.cells() + config_.colors * relative_plane_size(config_.grid_size);
  }
  int horizon() const override { return config_.horizon; }
  int num_reward_terms() const override { return config_.colors; }

  void set_task(const TaskSpec& task, int num_tasks, int onehot_index) override;
  Observation reset(Rng& rng) override;
  StepOutcome step(int action, Rng& rng) override;

  const FruitGridConfig& config() const { return config_; }

  // exposed for the enumerator and tests
  static int move_cell(int cell, int action, int grid_size);
  // relative planes span offsets in [-(G-1), G-1] on each axis
  static int relative_plane_size(int grid_size) {
    return (2 * grid_size - 1) * (2 * grid_size - 1);
  }
  static int relative_index(int agent, int cell, int grid_size);

 private:
  Observation observe() const;

  FruitGridConfig config_;
  TaskSpec task_;
  int num_tasks_ = 0;
  int onehot_index_ = -1;
  int agent_ = 0;
  std::vector<std::vector<int>> fruits_;  // per color, positions (unordered)
  int step_count_ = 0;
};

// Exact tabular image. Supported when fruits_per_color == 1 (the desk-scale
// configuration); throws a capacity error when the state space exceeds cap.
EnumeratedMdp enumerate_fruit_grid(const FruitGridConfig& config,
                                   const std::vector<TaskSpec>& tasks, double gamma,
                                   long cap = 200000);

}  // namespace basis
