#include "basis/fruit_grid.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>

namespace basis {

void FruitGridConfig::validate() const {
  if (grid_size < 2) throw std::invalid_argument("FruitGrid: grid_size must be >= 2");
  if (colors < 1 || fruits_per_color < 1)
    throw std::invalid_argument("FruitGrid: colors and fruits_per_color must be >= 1");
  if (cells() <= colors * fruits_per_color + 1)
    throw std::invalid_argument("FruitGrid: grid too small for fruits plus agent");
  if (horizon < 1) throw std::invalid_argument("FruitGrid: horizon must be >= 1");
}

FruitGrid::FruitGrid(FruitGridConfig config) : config_(config) {
  config_.validate();
  fruits_.assign(config_.colors, {});
}

int FruitGrid::move_cell(int cell, int action, int grid_size) {
  int row = cell / grid_size, col = cell % grid_size;
  switch (action) {
    case 0: row = std::max(0, row - 1); break;
    case 1: row = std::min(grid_size - 1, row + 1); break;
    case 2: col = std::max(0, col - 1); break;
    case 3: col = std::min(grid_size - 1, col + 1); break;
    default: throw std::invalid_argument("FruitGrid: invalid action");
  }
  return row * grid_size + col;
}

int FruitGrid::relative_index(int agent, int cell, int grid_size) {
  int span = 2 * grid_size - 1;
  int dr = cell / grid_size - agent / grid_size + grid_size - 1;
  int dc = cell % grid_size - agent % grid_size + grid_size - 1;
  return dr * span + dc;
}

void FruitGrid::set_task(const TaskSpec& task, int num_tasks, int onehot_index) {
  if (task.reward_weights.size() != config_.colors)
    throw std::invalid_argument("FruitGrid: reward_weights length must equal colors");
  if (onehot_index >= num_tasks)
    throw std::invalid_argument("FruitGrid: task one-hot index out of range");
  task_ = task;
  num_tasks_ = num_tasks;
  onehot_index_ = onehot_index;
}

Observation FruitGrid::observe() const {
  Observation obs;
  obs.features = Eigen::VectorXd::Zero(feature_dim());
  obs.features[agent_] = 1.0;
  const int plane = relative_plane_size(config_.grid_size);
  for (int c = 0; c < config_.colors; ++c)
    for (int cell : fruits_[c])
      obs.features[config_.cells() + c * plane +
                   relative_index(agent_, cell, config_.grid_size)] = 1.0;
  obs.task_onehot = Eigen::VectorXd::Zero(num_tasks_);
  if (onehot_index_ >= 0) obs.task_onehot[onehot_index_] = 1.0;
  return obs;
}

Observation FruitGrid::reset(Rng& rng) {
  if (task_.reward_weights.size() == 0)
    throw std::logic_error("FruitGrid: set_task before reset");
  // place agent and all fruits at distinct cells
  std::vector<int> cells(config_.cells());
  for (size_t i = 0; i < cells.size(); ++i) cells[i] = static_cast<int>(i);
  rng.shuffle(cells);
  int next = 0;
  agent_ = cells[next++];
  for (int c = 0; c < config_.colors; ++c) {
    fruits_[c].clear();
    for (int f = 0; f < config_.fruits_per_color; ++f) fruits_[c].push_back(cells[next++]);
  }
  step_count_ = 0;
  return observe();
}

StepOutcome FruitGrid::step(int action, Rng& rng) {
  if (action < 0 || action >= action_count())
    throw std::invalid_argument("FruitGrid: invalid action index");
  agent_ = move_cell(agent_, action, config_.grid_size);

  StepOutcome out;
  for (int c = 0; c < config_.colors && out.event < 0; ++c) {
    auto& cells = fruits_[c];
    auto it = std::find(cells.begin(), cells.end(), agent_);
    if (it == cells.end()) continue;
    out.event = c;
    out.reward = task_.reward_weights[c];
    cells.erase(it);
    if (config_.respawn) {
      // uniform over empty cells (not the agent's cell, no fruit)
      std::vector<int> empty;
      empty.reserve(config_.cells());
      std::vector<uint8_t> occupied(config_.cells(), 0);
      occupied[agent_] = 1;
      for (const auto& fc : fruits_)
        for (int cell : fc) occupied[cell] = 1;
      for (int cell = 0; cell < config_.cells(); ++cell)
        if (!occupied[cell]) empty.push_back(cell);
      cells.push_back(empty[rng.uniform_int(static_cast<int>(empty.size()))]);
    }
  }
  step_count_ += 1;
  out.done = step_count_ >= config_.horizon;
  out.obs = observe();
  return out;
}

namespace {

// State packing for the enumerator: [agent, fruit_0, ..., fruit_{C-1}] in base
// cells+1, where value == cells means "absent" (respawn off, collected).
uint64_t pack_state(int agent, std::span<const int> fruit, int cells) {
  uint64_t key = agent;
  uint64_t base = static_cast<uint64_t>(cells) + 1;
  for (int f : fruit) key = key * base + static_cast<uint64_t>(f);
  return key;
}

}  // namespace

EnumeratedMdp enumerate_fruit_grid(const FruitGridConfig& config,
                                   const std::vector<TaskSpec>& tasks, double gamma,
                                   long cap) {
  config.validate();
  if (config.fruits_per_color != 1)
    throw std::invalid_argument(
        "enumerate_fruit_grid: only fruits_per_color == 1 is enumerable");
  const int NC = config.cells();
  const int C = config.colors;
  const int ABSENT = NC;

  // enumerate all states: agent x per-color fruit position (or absent)
  std::vector<std::array<int, 5>> states;  // [agent, f0..f3], colors <= 4
  if (C > 4) throw std::invalid_argument("enumerate_fruit_grid: colors > 4 unsupported");
  std::unordered_map<uint64_t, int> index;
  std::array<int, 5> st{};
  std::vector<int> fruit(C);
  // odometer over fruit positions; respawn on -> all present and distinct
  std::function<void(int)> recurse = [&](int color) {
    if (color == C) {
      st[0] = -1;  // filled below per agent
      for (int agent = 0; agent < NC; ++agent) {
        bool clash = false;
        for (int c = 0; c < C; ++c)
          if (fruit[c] == agent) clash = true;
        if (clash) continue;
        std::array<int, 5> s{};
        s[0] = agent;
        for (int c = 0; c < C; ++c) s[c + 1] = fruit[c];
        uint64_t key = pack_state(agent, std::span<const int>(fruit), NC);
        index.emplace(key, static_cast<int>(states.size()));
        states.push_back(s);
        if (static_cast<long>(states.size()) > cap)
          throw std::invalid_argument("enumerate_fruit_grid: state-space cap exceeded");
      }
      return;
    }
    int lo = 0, hi = config.respawn ? NC - 1 : NC;  // respawn off admits ABSENT
    for (int pos = lo; pos <= hi; ++pos) {
      bool clash = false;
      for (int c = 0; c < color; ++c)
        if (fruit[c] == pos && pos != ABSENT) clash = true;
      if (clash) continue;
      fruit[color] = pos;
      recurse(color + 1);
    }
  };
  recurse(0);

  const int S = static_cast<int>(states.size());
  const int A = 4;

  EnumeratedMdp out;
  out.mdp.num_states = S;
  out.mdp.num_actions = A;
  out.mdp.gamma = gamma;
  out.event = Eigen::MatrixXi::Constant(S, A, -1);

  std::vector<int> scratch(C);
  for (int a = 0; a < A; ++a) {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<size_t>(S) * 4);
    for (int si = 0; si < S; ++si) {
      const auto& s = states[si];
      int agent2 = FruitGrid::move_cell(s[0], a, config.grid_size);
      int hit = -1;
      for (int c = 0; c < C; ++c)
        if (s[c + 1] == agent2) hit = c;
      if (hit < 0) {
        for (int c = 0; c < C; ++c) scratch[c] = s[c + 1];
        uint64_t key = pack_state(agent2, scratch, NC);
        trips.emplace_back(si, index.at(key), 1.0);
        continue;
      }
      out.event(si, a) = hit;
      if (!config.respawn) {
        for (int c = 0; c < C; ++c) scratch[c] = s[c + 1];
        scratch[hit] = ABSENT;
        uint64_t key = pack_state(agent2, scratch, NC);
        trips.emplace_back(si, index.at(key), 1.0);
        continue;
      }
      // respawn: uniform over empty cells after the move
      std::vector<int> options;
      options.reserve(NC);
      for (int cell = 0; cell < NC; ++cell) {
        if (cell == agent2) continue;
        bool occ = false;
        for (int c = 0; c < C; ++c)
          if (c != hit && s[c + 1] == cell) occ = true;
        if (!occ) options.push_back(cell);
      }
      double p = 1.0 / static_cast<double>(options.size());
      for (int cell : options) {
        for (int c = 0; c < C; ++c) scratch[c] = s[c + 1];
        scratch[hit] = cell;
        uint64_t key = pack_state(agent2, scratch, NC);
        trips.emplace_back(si, index.at(key), p);
      }
    }
    Eigen::SparseMatrix<double, Eigen::RowMajor> P(S, S);
    P.setFromTriplets(trips.begin(), trips.end());
    out.mdp.transition.push_back(std::move(P));
  }

  for (const auto& task : tasks) {
    if (task.reward_weights.size() != C)
      throw std::invalid_argument("enumerate_fruit_grid: task weight length mismatch");
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(S, A);
    for (int si = 0; si < S; ++si)
      for (int a = 0; a < A; ++a)
        if (out.event(si, a) >= 0) R(si, a) = task.reward_weights[out.event(si, a)];
    out.mdp.reward.push_back(std::move(R));
  }

  // initial distribution: uniform over all-present states (reset semantics)
  Eigen::VectorXd init = Eigen::VectorXd::Zero(S);
  int n_initial = 0;
  for (int si = 0; si < S; ++si) {
    bool all_present = true;
    for (int c = 0; c < C; ++c)
      if (states[si][c + 1] == ABSENT) all_present = false;
    if (all_present) {
      init[si] = 1.0;
      ++n_initial;
    }
  }
  init /= static_cast<double>(n_initial);
  out.mdp.initial_dist = std::move(init);
  out.mdp.terminal.assign(S, 0);

  const int plane = FruitGrid::relative_plane_size(config.grid_size);
  out.feature_dim = NC + C * plane;
  auto states_copy = std::make_shared<std::vector<std::array<int, 5>>>(std::move(states));
  int feature_dim = out.feature_dim;
  int grid_size = config.grid_size;
  out.fill_features = [states_copy, NC, C, plane, feature_dim, grid_size, ABSENT](
                          std::span<const int> ids, Eigen::MatrixXd& X) {
    X.setZero(feature_dim, static_cast<Eigen::Index>(ids.size()));
    for (size_t j = 0; j < ids.size(); ++j) {
      const auto& s = (*states_copy)[ids[j]];
      X(s[0], j) = 1.0;
      for (int c = 0; c < C; ++c)
        if (s[c + 1] != ABSENT)
          X(NC + c * plane + FruitGrid::relative_index(s[0], s[c + 1], grid_size), j) =
              1.0;
    }
  };
  return out;
}

}  // namespace basis
