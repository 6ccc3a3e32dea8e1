#include "basis/lane_world.hpp"

#include <cmath>
#include <stdexcept>

namespace basis {

void LaneWorldConfig::validate() const {
  if (lanes < 2) throw std::invalid_argument("LaneWorld: lanes must be >= 2");
  if (speed_bins < 2 || headway_bins < 2)
    throw std::invalid_argument("LaneWorld: speed_bins and headway_bins must be >= 2");
  if (horizon < 1) throw std::invalid_argument("LaneWorld: horizon must be >= 1");
  if (collision_penalty < 0.0)
    throw std::invalid_argument("LaneWorld: collision_penalty must be >= 0");
}

LaneWorld::LaneWorld(LaneWorldConfig config) : config_(config) { config_.validate(); }

double LaneWorld::close_probability(int speed, int speed_bins) {
  double frac = static_cast<double>(speed) / static_cast<double>(speed_bins - 1);
  return 0.15 + 0.5 * frac;
}

double LaneWorld::open_probability(int speed, int speed_bins) {
  double frac = static_cast<double>(speed) / static_cast<double>(speed_bins - 1);
  return 0.65 - 0.5 * frac;
}

void LaneWorld::set_task(const TaskSpec& task, int num_tasks, int onehot_index) {
  if (task.reward_weights.size() != num_reward_terms())
    throw std::invalid_argument("LaneWorld: reward_weights must have 6 terms");
  if (onehot_index >= num_tasks)
    throw std::invalid_argument("LaneWorld: task one-hot index out of range");
  task_ = task;
  num_tasks_ = num_tasks;
  onehot_index_ = onehot_index;
}

double LaneWorld::deviation(int lane, int speed, int headway) const {
  const auto& w = task_.reward_weights;
  return w[0] * std::abs(speed - w[4]) + w[1] * std::abs(lane - w[3]) +
         w[2] * std::abs(headway - w[5]);
}

Observation LaneWorld::observe() const {
  Observation obs;
  obs.features = Eigen::VectorXd::Zero(feature_dim());
  if (!crashed_) {
    obs.features[lane_] = 1.0;
    obs.features[config_.lanes + speed_] = 1.0;
    obs.features[config_.lanes + config_.speed_bins + headway_] = 1.0;
  }
  obs.task_onehot = Eigen::VectorXd::Zero(num_tasks_);
  if (onehot_index_ >= 0) obs.task_onehot[onehot_index_] = 1.0;
  return obs;
}

Observation LaneWorld::reset(Rng& rng) {
  if (task_.reward_weights.size() == 0)
    throw std::logic_error("LaneWorld: set_task before reset");
  lane_ = rng.uniform_int(config_.lanes);
  speed_ = rng.uniform_int(config_.speed_bins);
  headway_ = rng.uniform_int(config_.headway_bins);
  step_count_ = 0;
  crashed_ = false;
  return observe();
}

StepOutcome LaneWorld::step(int action, Rng& rng) {
  if (action < 0 || action >= action_count())
    throw std::invalid_argument("LaneWorld: invalid action index");
  if (crashed_) throw std::logic_error("LaneWorld: step after terminal state");
  switch (action) {
    case 0: lane_ = std::max(0, lane_ - 1); break;
    case 1: lane_ = std::min(config_.lanes - 1, lane_ + 1); break;
    case 2: speed_ = std::min(config_.speed_bins - 1, speed_ + 1); break;
    case 3: speed_ = std::max(0, speed_ - 1); break;
    case 4: break;
  }
  StepOutcome out;
  out.reward = -deviation(lane_, speed_, headway_);

  double p_close = close_probability(speed_, config_.speed_bins);
  double p_open = open_probability(speed_, config_.speed_bins);
  double u = rng.uniform();
  if (u < p_close) {
    if (headway_ == 0) {
      crashed_ = true;
      out.reward -= config_.collision_penalty;
    } else {
      headway_ -= 1;
    }
  } else if (u < p_close + p_open) {
    headway_ = std::min(config_.headway_bins - 1, headway_ + 1);
  }
  step_count_ += 1;
  out.terminal = crashed_;
  out.done = crashed_ || step_count_ >= config_.horizon;
  out.obs = observe();
  return out;
}

EnumeratedMdp enumerate_lane_world(const LaneWorldConfig& config,
                                   const std::vector<TaskSpec>& tasks, double gamma,
                                   long cap) {
  config.validate();
  const int L = config.lanes, V = config.speed_bins, H = config.headway_bins;
  const int S = L * V * H + 1;  // plus absorbing crash state
  const int A = 5;
  const int CRASH = S - 1;
  if (static_cast<long>(S) > cap)
    throw std::invalid_argument("enumerate_lane_world: state-space cap exceeded");
  auto id_of = [&](int lane, int speed, int headway) {
    return (lane * V + speed) * H + headway;
  };

  EnumeratedMdp out;
  out.mdp.num_states = S;
  out.mdp.num_actions = A;
  out.mdp.gamma = gamma;
  out.event = Eigen::MatrixXi::Constant(S, A, -1);
  out.state_lane.assign(S, -1);

  for (int a = 0; a < A; ++a) {
    std::vector<Eigen::Triplet<double>> trips;
    for (int lane = 0; lane < L; ++lane)
      for (int speed = 0; speed < V; ++speed)
        for (int headway = 0; headway < H; ++headway) {
          int si = id_of(lane, speed, headway);
          int lane2 = lane, speed2 = speed;
          switch (a) {
            case 0: lane2 = std::max(0, lane - 1); break;
            case 1: lane2 = std::min(L - 1, lane + 1); break;
            case 2: speed2 = std::min(V - 1, speed + 1); break;
            case 3: speed2 = std::max(0, speed - 1); break;
            case 4: break;
          }
          double p_close = LaneWorld::close_probability(speed2, V);
          double p_open = LaneWorld::open_probability(speed2, V);
          double p_stay = 1.0 - p_close - p_open;
          if (headway == 0) {
            trips.emplace_back(si, CRASH, p_close);
            trips.emplace_back(si, id_of(lane2, speed2, 1), p_open);
            trips.emplace_back(si, id_of(lane2, speed2, 0), p_stay);
          } else {
            trips.emplace_back(si, id_of(lane2, speed2, headway - 1), p_close);
            int up = std::min(H - 1, headway + 1);
            if (up == headway) {
              trips.emplace_back(si, id_of(lane2, speed2, headway), p_open + p_stay);
            } else {
              trips.emplace_back(si, id_of(lane2, speed2, up), p_open);
              trips.emplace_back(si, id_of(lane2, speed2, headway), p_stay);
            }
          }
        }
    trips.emplace_back(CRASH, CRASH, 1.0);
    Eigen::SparseMatrix<double, Eigen::RowMajor> P(S, S);
    P.setFromTriplets(trips.begin(), trips.end());
    out.mdp.transition.push_back(std::move(P));
  }

  for (const auto& task : tasks) {
    if (task.reward_weights.size() != 6)
      throw std::invalid_argument("enumerate_lane_world: reward_weights must have 6 terms");
    const auto& w = task.reward_weights;
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(S, A);
    for (int lane = 0; lane < L; ++lane)
      for (int speed = 0; speed < V; ++speed)
        for (int headway = 0; headway < H; ++headway) {
          int si = id_of(lane, speed, headway);
          for (int a = 0; a < A; ++a) {
            int lane2 = lane, speed2 = speed;
            switch (a) {
              case 0: lane2 = std::max(0, lane - 1); break;
              case 1: lane2 = std::min(L - 1, lane + 1); break;
              case 2: speed2 = std::min(V - 1, speed + 1); break;
              case 3: speed2 = std::max(0, speed - 1); break;
              case 4: break;
            }
            double dev = w[0] * std::abs(speed2 - w[4]) + w[1] * std::abs(lane2 - w[3]) +
                         w[2] * std::abs(headway - w[5]);
            double r = -dev;
            if (headway == 0)
              r -= config.collision_penalty * LaneWorld::close_probability(speed2, V);
            R(si, a) = r;
          }
        }
    out.mdp.reward.push_back(std::move(R));
  }

  Eigen::VectorXd init = Eigen::VectorXd::Zero(S);
  for (int si = 0; si < S - 1; ++si) init[si] = 1.0 / static_cast<double>(S - 1);
  out.mdp.initial_dist = std::move(init);
  out.mdp.terminal.assign(S, 0);
  out.mdp.terminal[CRASH] = 1;

  for (int lane = 0; lane < L; ++lane)
    for (int speed = 0; speed < V; ++speed)
      for (int headway = 0; headway < H; ++headway)
        out.state_lane[id_of(lane, speed, headway)] = lane;

  out.feature_dim = L + V + H;
  int feature_dim = out.feature_dim;
  out.fill_features = [L, V, H, feature_dim, CRASH](std::span<const int> ids,
                                                    Eigen::MatrixXd& X) {
    X.setZero(feature_dim, static_cast<Eigen::Index>(ids.size()));
    for (size_t j = 0; j < ids.size(); ++j) {
      int si = ids[j];
      if (si == CRASH) continue;  // crash observation is all-zero
      int headway = si % H, speed = (si / H) % V, lane = si / (V * H);
      X(lane, j) = 1.0;
      X(L + speed, j) = 1.0;
      X(L + V + headway, j) = 1.0;
    }
  };
  return out;
}

}  // namespace basis
