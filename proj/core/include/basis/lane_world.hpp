#pragma once

#include "basis/env.hpp"

namespace basis {

// Discrete highway abstraction: the agent holds a lane, a speed bin, and a
// headway bin to the vehicle in front. Five actions {lane-left, lane-right,
// faster, slower, idle}. Per step the headway closes or opens stochastically,
// biased by speed; closing at headway 0 is a collision, which ends the
// episode with a penalty. Reward is the negative weighted deviation from a
// task's target lane / speed / headway:
//   r = -alpha*|speed - target_speed| - beta*|lane - target_lane|
//       - kappa*|headway - target_headway| - collision_penalty*1[collision]
// reward_weights = [alpha, beta, kappa, target_lane, target_speed, target_headway].
struct LaneWorldConfig {
  int lanes = 3;
  int speed_bins = 5;
  int headway_bins = 5;
  int horizon = 40;
  double collision_penalty = 10.0;
  void validate() const;
};

class LaneWorld final : public Env {
 public:
  explicit LaneWorld(LaneWorldConfig config);

  int action_count() const override { return 5; }
  int feature_dim() const override {
    return config_.lanes + config_.speed_bins + config_.headway_bins;
  }
  int horizon() const override { return config_.horizon; }
  int num_reward_terms() const override { return 6; }

  void set_task(const TaskSpec& task, int num_tasks, int onehot_index) override;
  Observation reset(Rng& rng) override;
  StepOutcome step(int action, Rng& rng) override;

  const LaneWorldConfig& config() const { return config_; }

  // probability the headway closes by one this step, given the speed bin
  static double close_probability(int speed, int speed_bins);
  // probability it opens by one; the remaining 0.2 mass stays put
  static double open_probability(int speed, int speed_bins);

 private:
  Observation observe() const;
  double deviation(int lane, int speed, int headway) const;

  LaneWorldConfig config_;
  TaskSpec task_;
  int num_tasks_ = 0;
  int onehot_index_ = -1;
  int lane_ = 0, speed_ = 0, headway_ = 0;
  int step_count_ = 0;
  bool crashed_ = false;
};

// Exact tabular image: lanes x speed_bins x headway_bins states plus one
// absorbing crash state. Collision penalty enters the reward table in
// expectation; transitions carry the collision branch explicitly.
EnumeratedMdp enumerate_lane_world(const LaneWorldConfig& config,
                                   const std::vector<TaskSpec>& tasks, double gamma,
                                   long cap = 200000);

}  // namespace basis
