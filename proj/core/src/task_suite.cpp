#include "basis/task_suite.hpp"

#include <cmath>
#include <stdexcept>

namespace basis {

EnvKind parse_env_kind(const std::string& name) {
  if (name == "fruit_grid") return EnvKind::fruit_grid;
  if (name == "lane_world") return EnvKind::lane_world;
  throw std::invalid_argument("unknown env kind: " + name);
}

std::string env_kind_name(EnvKind kind) {
  return kind == EnvKind::fruit_grid ? "fruit_grid" : "lane_world";
}

std::unique_ptr<Env> make_env(const EnvConfig& config) {
  if (config.kind == EnvKind::fruit_grid)
    return std::make_unique<FruitGrid>(config.fruit);
  return std::make_unique<LaneWorld>(config.lane);
}

namespace {

const char* kColorNames[] = {"red", "orange", "green", "blue"};

TaskSuite fruit_grid_suite(const FruitGridConfig& config, int K) {
  if (K != config.colors)
    throw std::invalid_argument("make_task_suite: FruitGrid requires K == colors");
  TaskSuite suite;
  for (int c = 0; c < K; ++c) {
    TaskSpec t;
    t.id = c;
    t.reward_weights = Eigen::VectorXd::Zero(config.colors);
    t.reward_weights[c] = 1.0;
    t.description = c < 4 ? std::string("collect ") + kColorNames[c]
                          : "collect color " + std::to_string(c);
    suite.tasks.push_back(std::move(t));
  }
  suite.test_task.id = K;
  suite.test_task.reward_weights = Eigen::VectorXd::Zero(config.colors);
  suite.test_task.reward_weights[0] = 0.8;
  if (config.colors > 1) suite.test_task.reward_weights[1] = 0.2;
  suite.test_task.description = "mixed preference 0.8/0.2/0.0";
  return suite;
}

int nearest_bin(double value, double lo, double hi, int bins) {
  double frac = (value - lo) / (hi - lo);
  return std::min(bins - 1, std::max(0, static_cast<int>(std::lround(frac * (bins - 1)))));
}

TaskSuite lane_world_suite(const LaneWorldConfig& config, int K, uint64_t seed) {
  TaskSuite suite;
  Rng rng = Rng(seed).stream("lane-tasks");
  for (int k = 0; k < K; ++k) {
    TaskSpec t;
    t.id = k;
    double coeff = rng.uniform(0.5, 2.0);
    t.reward_weights = Eigen::VectorXd(6);
    t.reward_weights << coeff, coeff, coeff, rng.uniform_int(config.lanes),
        rng.uniform_int(config.speed_bins), rng.uniform_int(config.headway_bins);
    t.description = "driving profile " + std::to_string(k);
    suite.tasks.push_back(std::move(t));
  }
  // held-out profile: middle lane, 28 m/s over a 20..36 m/s span, 10 m headway
  // over a 5..25 m span, unit coefficients
  TaskSpec test;
  test.id = K;
  test.reward_weights = Eigen::VectorXd(6);
  test.reward_weights << 1.0, 1.0, 1.0, config.lanes / 2,
      nearest_bin(28.0, 20.0, 36.0, config.speed_bins),
      nearest_bin(10.0, 5.0, 25.0, config.headway_bins);
  test.description = "held-out driving profile";
  for (const auto& t : suite.tasks)
    if ((t.reward_weights - test.reward_weights).cwiseAbs().maxCoeff() == 0.0)
      test.reward_weights[0] = 1.5;  // unreachable in practice; keeps the guarantee exact
  suite.test_task = std::move(test);
  return suite;
}

}  // namespace

TaskSuite make_task_suite(const EnvConfig& config, int K, uint64_t seed) {
  if (K < 1) throw std::invalid_argument("make_task_suite: K must be >= 1");
  if (config.kind == EnvKind::fruit_grid) return fruit_grid_suite(config.fruit, K);
  return lane_world_suite(config.lane, K, seed);
}

EnumeratedMdp enumerate_tabular(const EnvConfig& config, const std::vector<TaskSpec>& tasks,
                                double gamma, long cap) {
  if (config.kind == EnvKind::fruit_grid)
    return enumerate_fruit_grid(config.fruit, tasks, gamma, cap);
  return enumerate_lane_world(config.lane, tasks, gamma, cap);
}

Trajectory rollout(Env& env, const ObsPolicy& policy, int horizon, Rng& rng) {
  Trajectory traj;
  Observation obs = env.reset(rng);
  for (int t = 0; t < horizon; ++t) {
    Eigen::VectorXd probs = policy(obs);
    int a = rng.choice(std::span<const double>(probs.data(), probs.size()));
    traj.observations.push_back(obs.features);
    traj.actions.push_back(a);
    StepOutcome out = env.step(a, rng);
    traj.rewards.push_back(out.reward);
    traj.episode_return += out.reward;
    obs = std::move(out.obs);
    if (out.done) break;
  }
  return traj;
}

double expected_return(Env& env, const ObsPolicy& policy, int episodes, int horizon,
                       Rng& rng) {
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    Rng er = rng.stream("episode", static_cast<uint64_t>(e));
    total += rollout(env, policy, horizon, er).episode_return;
  }
  return total / static_cast<double>(episodes);
}

}  // namespace basis
