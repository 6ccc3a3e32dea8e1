#pragma once

#include <memory>
#include <string>
#include <vector>

#include "basis/env.hpp"
#include "basis/fruit_grid.hpp"
#include "basis/lane_world.hpp"

namespace basis {

enum class EnvKind { fruit_grid, lane_world };

EnvKind parse_env_kind(const std::string& name);
std::string env_kind_name(EnvKind kind);

// One struct carries both shapes; `kind` selects which config is live.
struct EnvConfig {
  EnvKind kind = EnvKind::fruit_grid;
  FruitGridConfig fruit;
  LaneWorldConfig lane;
};

std::unique_ptr<Env> make_env(const EnvConfig& config);

// Pre-training tasks plus the held-out demonstrator task.
struct TaskSuite {
  std::vector<TaskSpec> tasks;
  TaskSpec test_task;
};

// FruitGrid: K must equal the color count; tasks are the pure single-color
// rewards and the test task prefers (0.8, 0.2, 0.0, ...). LaneWorld: K
// seeded-random (targets, coefficient) combinations; the test task pins the
// middle lane, the 28 m/s speed bin, and the 10 m headway bin.
TaskSuite make_task_suite(const EnvConfig& config, int K, uint64_t seed);

EnumeratedMdp enumerate_tabular(const EnvConfig& config, const std::vector<TaskSpec>& tasks,
                                double gamma, long cap = 200000);

}  // namespace basis
