#include "basis/demos.hpp"

#include <cinttypes>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace basis {

Expert make_exact_expert(const EnumeratedMdp& tab, int task, int horizon,
                         double temperature) {
  Expert expert;
  expert.q = soft_value_iteration(tab.mdp, task, 1e-8);
  expert.policy = softmax_policy(expert.q, temperature);
  expert.reference_return = finite_horizon_return(tab.mdp, expert.policy, task, horizon);
  return expert;
}

Expert make_learned_expert(const EnumeratedMdp& tab, const PretrainConfig& config,
                           const TaskSpec& test_task, int task, double temperature) {
  TaskSuite suite;
  suite.tasks = {test_task};
  suite.test_task = test_task;
  PretrainResult pre = run_pretraining(config, std::move(suite));

  const int S = tab.mdp.num_states;
  const int A = tab.mdp.num_actions;
  Expert expert;
  expert.q.values.resize(S, A);
  Eigen::MatrixXd X;
  std::vector<int> ids;
  constexpr int kChunk = 4096;
  for (int start = 0; start < S; start += kChunk) {
    int n = std::min(kChunk, S - start);
    ids.resize(n);
    for (int i = 0; i < n; ++i) ids[i] = start + i;
    tab.fill_features(ids, X);
    std::vector<int> tasks(n, 0);
    expert.q.values.middleRows(start, n) =
        pre.model.q_values_batch(X, tasks, pre.model.preferences().col(0)).transpose();
  }
  expert.policy = softmax_policy(expert.q, temperature);
  expert.reference_return =
      finite_horizon_return(tab.mdp, expert.policy, task, config.episode_horizon);
  return expert;
}

long DemoSet::total_steps() const {
  long n = 0;
  for (const auto& t : trajectories) n += static_cast<long>(t.length());
  return n;
}

void DemoSet::validate() const {
  if (trajectories.empty()) throw std::invalid_argument("demos: empty set");
  for (const auto& t : trajectories) {
    if (t.observations.size() != t.actions.size())
      throw std::invalid_argument("demos: observation/action length mismatch");
    if (!t.rewards.empty() && t.rewards.size() != t.actions.size())
      throw std::invalid_argument("demos: reward channel length mismatch");
    for (const auto& o : t.observations)
      if (o.size() != feature_dim)
        throw std::invalid_argument("demos: inconsistent feature dimension");
  }
}

DemoSet sample_demos(const EnumeratedMdp& tab, const Expert& expert, int task,
                     int count, int horizon, Rng& rng) {
  if (count < 1) throw std::invalid_argument("sample_demos: count must be >= 1");
  DemoSet demos;
  demos.feature_dim = tab.feature_dim;
  demos.trajectories.reserve(count);
  Eigen::MatrixXd X;
  for (int i = 0; i < count; ++i) {
    Rng ep_rng = rng.stream("demo", static_cast<uint64_t>(i));
    Trajectory traj = rollout(tab.mdp, expert.policy, task, horizon, ep_rng);
    tab.fill_features(traj.states, X);
    traj.observations.resize(traj.states.size());
    for (size_t t = 0; t < traj.states.size(); ++t) traj.observations[t] = X.col(t);
    demos.trajectories.push_back(std::move(traj));
  }
  return demos;
}

void write_demos(const DemoSet& demos, const std::filesystem::path& path) {
  demos.validate();
  FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f) throw std::runtime_error("write_demos: cannot open " + path.string());
  FILE* fr = std::fopen((path.string() + ".rewards").c_str(), "w");
  if (!fr) {
    std::fclose(f);
    throw std::runtime_error("write_demos: cannot open rewards sibling");
  }
  for (size_t i = 0; i < demos.trajectories.size(); ++i) {
    const auto& t = demos.trajectories[i];
    std::fprintf(f, "traj %zu %zu\n", i, t.length());
    std::fprintf(fr, "traj %zu %zu\n", i, t.length());
    for (size_t s = 0; s < t.length(); ++s) {
      std::fprintf(f, "obs=");
      const auto& o = t.observations[s];
      for (Eigen::Index j = 0; j < o.size(); ++j)
        std::fprintf(f, j ? ",%.9g" : "%.9g", o[j]);
      std::fprintf(f, " action=%d\n", t.actions[s]);
      std::fprintf(fr, "%.9g\n", s < t.rewards.size() ? t.rewards[s] : 0.0);
    }
  }
  std::fclose(f);
  std::fclose(fr);
}

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  FILE* f = std::fopen(path.string().c_str(), "r");
  if (!f) throw std::runtime_error("read_demos: cannot open " + path.string());
  std::vector<std::string> lines;
  std::string cur;
  char buf[1 << 16];
  size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) {
    for (size_t i = 0; i < n; ++i) {
      if (buf[i] == '\n') {
        lines.push_back(std::move(cur));
        cur.clear();
      } else {
        cur.push_back(buf[i]);
      }
    }
  }
  std::fclose(f);
  if (!cur.empty()) lines.push_back(std::move(cur));
  return lines;
}

}  // namespace

DemoSet read_demos(const std::filesystem::path& path, bool with_rewards) {
  auto lines = read_lines(path);
  DemoSet demos;
  size_t i = 0;
  while (i < lines.size()) {
    size_t id, len;
    if (std::sscanf(lines[i].c_str(), "traj %zu %zu", &id, &len) != 2)
      throw std::runtime_error("read_demos: malformed header at line " +
                               std::to_string(i + 1));
    ++i;
    Trajectory traj;
    for (size_t s = 0; s < len; ++s, ++i) {
      if (i >= lines.size()) throw std::runtime_error("read_demos: truncated trajectory");
      const std::string& line = lines[i];
      if (line.rfind("obs=", 0) != 0)
        throw std::runtime_error("read_demos: malformed step at line " +
                                 std::to_string(i + 1));
      size_t sp = line.find(" action=");
      if (sp == std::string::npos)
        throw std::runtime_error("read_demos: missing action at line " +
                                 std::to_string(i + 1));
      std::vector<double> vals;
      const char* p = line.c_str() + 4;
      const char* end = line.c_str() + sp;
      while (p < end) {
        char* next;
        vals.push_back(std::strtod(p, &next));
        if (next == p) throw std::runtime_error("read_demos: bad real at line " +
                                                std::to_string(i + 1));
        p = next;
        if (p < end && *p == ',') ++p;
      }
      traj.observations.emplace_back(
          Eigen::Map<const Eigen::VectorXd>(vals.data(), vals.size()));
      traj.actions.push_back(std::atoi(line.c_str() + sp + 8));
    }
    demos.trajectories.push_back(std::move(traj));
  }
  if (demos.trajectories.empty()) throw std::runtime_error("read_demos: empty file");
  demos.feature_dim = static_cast<int>(demos.trajectories[0].observations.at(0).size());

  if (with_rewards) {
    auto rlines = read_lines(path.string() + ".rewards");
    size_t j = 0;
    for (auto& traj : demos.trajectories) {
      if (j >= rlines.size() || rlines[j].rfind("traj", 0) != 0)
        throw std::runtime_error("read_demos: rewards sibling out of sync");
      ++j;
      traj.rewards.resize(traj.length());
      traj.episode_return = 0.0;
      for (size_t s = 0; s < traj.length(); ++s, ++j) {
        traj.rewards[s] = std::strtod(rlines.at(j).c_str(), nullptr);
        traj.episode_return += traj.rewards[s];
      }
    }
  }
  demos.validate();
  return demos;
}

DemoSet demo_prefix(const DemoSet& demos, int count) {
  if (count < 1 || count > static_cast<int>(demos.size()))
    throw std::invalid_argument("demo_prefix: count out of range");
  DemoSet out;
  out.feature_dim = demos.feature_dim;
  out.trajectories.assign(demos.trajectories.begin(), demos.trajectories.begin() + count);
  return out;
}

TransitionBatch demo_batch(const DemoSet& demos) {
  demos.validate();
  const long n = demos.total_steps();
  TransitionBatch batch;
  batch.obs.resize(demos.feature_dim, n);
  batch.next_obs.resize(demos.feature_dim, n);
  batch.action.resize(n);
  batch.next_action.resize(n);
  batch.task.assign(n, -1);
  batch.reward = Eigen::VectorXd::Zero(n);
  batch.done.assign(n, 0);
  long col = 0;
  for (const auto& t : demos.trajectories) {
    const long len = static_cast<long>(t.length());
    for (long s = 0; s < len; ++s, ++col) {
      batch.obs.col(col) = t.observations[s];
      batch.action[col] = t.actions[s];
      if (s + 1 < len) {
        batch.next_obs.col(col) = t.observations[s + 1];
        batch.next_action[col] = t.actions[s + 1];
      } else {
        batch.next_obs.col(col) = t.observations[s];  // unused: done masks it
        batch.next_action[col] = 0;
        batch.done[col] = 1;
      }
      if (!t.rewards.empty()) batch.reward[col] = t.rewards[s];
    }
  }
  return batch;
}

}  // namespace basis
