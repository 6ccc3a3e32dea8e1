#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "basis/fruit_grid.hpp"
#include "basis/lane_world.hpp"
#include "basis/task_suite.hpp"

using namespace basis;

namespace {

TaskSpec pure_task(int color, int colors) {
  TaskSpec t;
  t.id = color;
  t.reward_weights = Eigen::VectorXd::Zero(colors);
  t.reward_weights[color] = 1.0;
  return t;
}

}  // namespace

TEST_CASE("move_cell applies the grid geometry with clamped edges") {
  // 3x3 grid, cells row-major: 0 1 2 / 3 4 5 / 6 7 8; actions up,down,left,right
  CHECK(FruitGrid::move_cell(4, 0, 3) == 1);
  CHECK(FruitGrid::move_cell(4, 1, 3) == 7);
  CHECK(FruitGrid::move_cell(4, 2, 3) == 3);
  CHECK(FruitGrid::move_cell(4, 3, 3) == 5);
  CHECK(FruitGrid::move_cell(0, 0, 3) == 0);  // walls clamp
  CHECK(FruitGrid::move_cell(0, 2, 3) == 0);
  CHECK(FruitGrid::move_cell(8, 1, 3) == 8);
  CHECK(FruitGrid::move_cell(8, 3, 3) == 8);
}

TEST_CASE("relative_index is centered and unique per offset") {
  const int G = 3;
  // same cell maps to the plane center
  int center = FruitGrid::relative_index(4, 4, G);
  CHECK(center == FruitGrid::relative_index(0, 0, G));
  CHECK(center == (2 * G - 1) * (2 * G - 1) / 2);
  // all offsets from a fixed agent are distinct
  std::set<int> seen;
  for (int cell = 0; cell < G * G; ++cell) {
    int idx = FruitGrid::relative_index(4, cell, G);
    CHECK(idx >= 0);
    CHECK(idx < FruitGrid::relative_plane_size(G));
    seen.insert(idx);
  }
  CHECK(seen.size() == 9);
}

TEST_CASE("fruit grid observations decode agent and fruit planes") {
  FruitGridConfig cfg;
  cfg.grid_size = 3;
  cfg.colors = 2;
  cfg.fruits_per_color = 1;
  FruitGrid env(cfg);
  env.set_task(pure_task(0, 2), 2, 0);

  Rng rng(4);
  Observation obs = env.reset(rng);
  REQUIRE(obs.features.size() == env.feature_dim());
  REQUIRE(obs.task_onehot.size() == 2);
  CHECK(obs.task_onehot[0] == 1.0);
  CHECK(obs.task_onehot[1] == 0.0);

  // exactly one agent bit, one fruit bit per color plane
  int cells = cfg.cells();
  int plane = FruitGrid::relative_plane_size(cfg.grid_size);
  CHECK(obs.features.head(cells).sum() == doctest::Approx(1.0));
  CHECK(obs.features.segment(cells, plane).sum() == doctest::Approx(1.0));
  CHECK(obs.features.segment(cells + plane, plane).sum() == doctest::Approx(1.0));
  // features are binary
  for (int i = 0; i < obs.features.size(); ++i)
    CHECK((obs.features[i] == 0.0 || obs.features[i] == 1.0));
}

TEST_CASE("collecting a fruit pays its color weight and fires the event") {
  FruitGridConfig cfg;
  cfg.grid_size = 3;
  cfg.colors = 2;
  cfg.fruits_per_color = 1;
  cfg.respawn = false;
  FruitGrid env(cfg);
  TaskSpec task;
  task.reward_weights = Eigen::VectorXd::Zero(2);
  task.reward_weights << 0.7, 0.3;
  env.set_task(task, 2, -1);

  Rng rng(1);
  for (int episode = 0; episode < 200; ++episode) {
    env.reset(rng);
    double collected = 0.0;
    for (int t = 0; t < 30; ++t) {
      StepOutcome out = env.step(rng.uniform_int(4), rng);
      if (out.event >= 0) {
        CHECK(out.reward == doctest::Approx(task.reward_weights[out.event]));
        collected += out.reward;
      } else {
        CHECK(out.reward == 0.0);
      }
      if (out.done) {
        // respawn off: episode terminates exactly when both fruits are gone
        CHECK((out.terminal ? collected == doctest::Approx(1.0) : true));
        break;
      }
    }
  }
  // task channel suppressed under the IRL convention
  Observation obs = env.reset(rng);
  CHECK(obs.task_onehot.sum() == 0.0);
}

TEST_CASE("respawn keeps the fruit population constant") {
  FruitGridConfig cfg;
  cfg.grid_size = 3;
  cfg.colors = 2;
  cfg.fruits_per_color = 1;
  cfg.respawn = true;
  FruitGrid env(cfg);
  env.set_task(pure_task(0, 2), 2, 0);

  int cells = cfg.cells();
  int plane = FruitGrid::relative_plane_size(cfg.grid_size);
  Rng rng(2);
  env.reset(rng);
  for (int t = 0; t < 200; ++t) {
    StepOutcome out = env.step(rng.uniform_int(4), rng);
    CHECK(out.obs.features.segment(cells, plane).sum() == doctest::Approx(1.0));
    CHECK(out.obs.features.segment(cells + plane, plane).sum() ==
          doctest::Approx(1.0));
    CHECK_FALSE(out.terminal);
    if (out.done) env.reset(rng);
  }
}

TEST_CASE("fruit grid horizon bounds the episode") {
  FruitGridConfig cfg;
  cfg.grid_size = 3;
  cfg.colors = 2;
  cfg.fruits_per_color = 1;
  cfg.horizon = 5;
  FruitGrid env(cfg);
  env.set_task(pure_task(0, 2), 2, 0);
  Rng rng(8);
  env.reset(rng);
  int steps = 0;
  bool done = false;
  while (!done) {
    StepOutcome out = env.step(0, rng);
    done = out.done;
    ++steps;
    REQUIRE(steps <= 5);
  }
  CHECK(steps == 5);
}

TEST_CASE("fruit grid enumeration covers the reachable space exactly") {
  FruitGridConfig cfg;
  cfg.grid_size = 3;
  cfg.colors = 2;
  cfg.fruits_per_color = 1;
  std::vector<TaskSpec> tasks{pure_task(0, 2), pure_task(1, 2)};
  EnumeratedMdp tab = enumerate_fruit_grid(cfg, tasks, 0.9, 200000);

  // respawn on: agent anywhere, one fruit per color on distinct other cells
  CHECK(tab.mdp.num_states == 9 * 8 * 7);
  CHECK(tab.mdp.num_actions == 4);
  CHECK(tab.mdp.num_tasks() == 2);
  CHECK_NOTHROW(tab.mdp.validate());
  CHECK(tab.feature_dim == 9 + 2 * 25);

  // every state has exactly one event per (state, action) at most, and
  // rewards agree with the event channel
  for (int s = 0; s < tab.mdp.num_states; ++s) {
    for (int a = 0; a < 4; ++a) {
      int e = tab.event(s, a);
      CHECK(e >= -1);
      CHECK(e < 2);
      for (int k = 0; k < 2; ++k) {
        double expect = e >= 0 ? tasks[k].reward_weights[e] : 0.0;
        CHECK(tab.mdp.reward[k](s, a) == doctest::Approx(expect));
      }
    }
  }

  // initial distribution is uniform over all states (every state has all
  // fruits present when respawn is on)
  CHECK(tab.mdp.initial_dist.sum() == doctest::Approx(1.0));
  CHECK(tab.mdp.initial_dist.maxCoeff() ==
        doctest::Approx(1.0 / tab.mdp.num_states));

  // features of distinct states are distinct
  std::vector<int> ids(tab.mdp.num_states);
  for (int i = 0; i < tab.mdp.num_states; ++i) ids[i] = i;
  Eigen::MatrixXd X;
  tab.fill_features(ids, X);
  std::set<std::string> keys;
  for (int s = 0; s < tab.mdp.num_states; ++s) {
    std::string k;
    for (int j = 0; j < X.rows(); ++j) k.push_back(X(j, s) > 0.5 ? '1' : '0');
    keys.insert(k);
  }
  CHECK(keys.size() == static_cast<size_t>(tab.mdp.num_states));
}

TEST_CASE("enumeration capacity guard throws before allocating") {
  FruitGridConfig cfg;
  cfg.grid_size = 5;
  cfg.colors = 3;
  cfg.fruits_per_color = 1;
  std::vector<TaskSpec> tasks{pure_task(0, 3)};
  CHECK_THROWS_AS(enumerate_fruit_grid(cfg, tasks, 0.9, 1000), std::invalid_argument);
}

TEST_CASE("multi-fruit configurations are rejected by the enumerator") {
  FruitGridConfig cfg;
  cfg.grid_size = 3;
  cfg.colors = 2;
  cfg.fruits_per_color = 2;
  std::vector<TaskSpec> tasks{pure_task(0, 2)};
  CHECK_THROWS_AS(enumerate_fruit_grid(cfg, tasks, 0.9, 200000),
                  std::invalid_argument);
}

TEST_CASE("lane world step dynamics respect the headway model") {
  LaneWorldConfig cfg;
  LaneWorld env(cfg);
  TaskSpec task;
  task.reward_weights = Eigen::VectorXd::Zero(6);
  task.reward_weights << 1.0, 1.0, 1.0, 1.0, 2.0, 3.0;  // targets lane 1, speed 2, headway 3
  env.set_task(task, 1, 0);

  Rng rng(5);
  Observation obs = env.reset(rng);
  REQUIRE(obs.features.size() == cfg.lanes + cfg.speed_bins + cfg.headway_bins);
  // one-hot per factor
  CHECK(obs.features.head(cfg.lanes).sum() == doctest::Approx(1.0));
  CHECK(obs.features.segment(cfg.lanes, cfg.speed_bins).sum() == doctest::Approx(1.0));
  CHECK(obs.features.tail(cfg.headway_bins).sum() == doctest::Approx(1.0));

  // close/open probabilities form a distribution with the documented bias
  for (int v = 0; v < cfg.speed_bins; ++v) {
    double c = LaneWorld::close_probability(v, cfg.speed_bins);
    double o = LaneWorld::open_probability(v, cfg.speed_bins);
    CHECK(c >= 0.0);
    CHECK(o >= 0.0);
    CHECK(c + o <= doctest::Approx(1.0));
  }
  CHECK(LaneWorld::close_probability(cfg.speed_bins - 1, cfg.speed_bins) >
        LaneWorld::close_probability(0, cfg.speed_bins));
}

TEST_CASE("lane world reward is the negative weighted deviation") {
  LaneWorldConfig cfg;
  LaneWorld env(cfg);
  TaskSpec task;
  task.reward_weights = Eigen::VectorXd::Zero(6);
  task.reward_weights << 0.5, 1.0, 0.25, 1.0, 2.0, 3.0;
  env.set_task(task, 1, -1);

  Rng rng(6);
  for (int episode = 0; episode < 50; ++episode) {
    Observation obs = env.reset(rng);
    for (int t = 0; t < 10; ++t) {
      // decode the factored state from the observation
      int lane = 0, speed = 0, headway = 0;
      for (int i = 0; i < cfg.lanes; ++i)
        if (obs.features[i] > 0.5) lane = i;
      for (int i = 0; i < cfg.speed_bins; ++i)
        if (obs.features[cfg.lanes + i] > 0.5) speed = i;
      for (int i = 0; i < cfg.headway_bins; ++i)
        if (obs.features[cfg.lanes + cfg.speed_bins + i] > 0.5) headway = i;

      StepOutcome out = env.step(4, rng);  // idle keeps lane and speed
      if (out.terminal) break;
      // idle: deviation is priced after the action but before the headway
      // transition, so the pre-step factored state sets the reward
      int nlane = 0, nspeed = 0;
      for (int i = 0; i < cfg.lanes; ++i)
        if (out.obs.features[i] > 0.5) nlane = i;
      for (int i = 0; i < cfg.speed_bins; ++i)
        if (out.obs.features[cfg.lanes + i] > 0.5) nspeed = i;
      CHECK(nlane == lane);
      CHECK(nspeed == speed);
      double expect = -0.5 * std::abs(speed - 2.0) - 1.0 * std::abs(lane - 1.0) -
                      0.25 * std::abs(headway - 3.0);
      CHECK(out.reward == doctest::Approx(expect));
      obs = out.obs;
      if (out.done) break;
    }
  }
}

TEST_CASE("lane world enumeration matches the factored state count") {
  LaneWorldConfig cfg;
  TaskSpec task;
  task.reward_weights = Eigen::VectorXd::Zero(6);
  task.reward_weights << 1.0, 0.0, 0.0, 0.0, 2.0, 2.0;
  EnumeratedMdp tab = enumerate_lane_world(cfg, {task}, 0.9, 200000);
  CHECK(tab.mdp.num_states == cfg.lanes * cfg.speed_bins * cfg.headway_bins + 1);
  CHECK(tab.mdp.num_actions == 5);
  CHECK_NOTHROW(tab.mdp.validate());
  CHECK(static_cast<int>(tab.state_lane.size()) == tab.mdp.num_states);
  // exactly one absorbing crash state, marked with lane -1
  int crashes = 0;
  for (int s = 0; s < tab.mdp.num_states; ++s) {
    if (tab.mdp.is_terminal(s)) {
      ++crashes;
      CHECK(tab.state_lane[s] == -1);
    } else {
      CHECK(tab.state_lane[s] >= 0);
      CHECK(tab.state_lane[s] < cfg.lanes);
    }
  }
  CHECK(crashes == 1);
}

TEST_CASE("task suites give pure pre-training tasks and the pinned test mixture") {
  EnvConfig cfg;
  cfg.kind = EnvKind::fruit_grid;
  cfg.fruit.grid_size = 5;
  cfg.fruit.colors = 3;
  cfg.fruit.fruits_per_color = 1;
  TaskSuite suite = make_task_suite(cfg, 3, 17);
  REQUIRE(suite.tasks.size() == 3);
  for (int k = 0; k < 3; ++k) {
    CHECK(suite.tasks[k].reward_weights.size() == 3);
    CHECK(suite.tasks[k].reward_weights[k] == doctest::Approx(1.0));
    CHECK(suite.tasks[k].reward_weights.sum() == doctest::Approx(1.0));
  }
  CHECK(suite.test_task.reward_weights[0] == doctest::Approx(0.8));
  CHECK(suite.test_task.reward_weights[1] == doctest::Approx(0.2));
  CHECK(suite.test_task.reward_weights[2] == doctest::Approx(0.0));
}

TEST_CASE("environment rollout helper bounds horizon and accumulates return") {
  EnvConfig cfg;
  cfg.kind = EnvKind::fruit_grid;
  cfg.fruit.grid_size = 3;
  cfg.fruit.colors = 2;
  cfg.fruit.fruits_per_color = 1;
  auto env = make_env(cfg);
  TaskSpec task = pure_task(0, 2);
  env->set_task(task, 2, 0);

  ObsPolicy uniform = [&](const Observation&) {
    return Eigen::VectorXd::Constant(4, 0.25);
  };
  Rng rng(12);
  Trajectory tr = rollout(*env, uniform, 15, rng);
  CHECK(tr.length() <= 15);
  CHECK(tr.observations.size() == tr.length());
  double total = 0.0;
  for (double r : tr.rewards) total += r;
  CHECK(tr.episode_return == doctest::Approx(total));
}
