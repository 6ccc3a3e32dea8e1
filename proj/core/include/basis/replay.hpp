#pragma once

#include <vector>

#include "basis/sf_model.hpp"

namespace basis {

// One logged environment transition. done marks a true terminal (the next
// state has no value); horizon truncation is logged with done = 0 so targets
// keep bootstrapping.
struct Transition {
  Eigen::VectorXd obs, next_obs;
  int action = 0;
  int next_action = 0;
  int task = -1;
  double reward = 0.0;
  uint8_t done = 0;
};

// FIFO ring with uniform sampling (without replacement within a batch).
class ReplayBuffer {
 public:
  explicit ReplayBuffer(size_t capacity);

  void push(Transition t);
  size_t size() const { return ring_.size(); }
  size_t capacity() const { return capacity_; }
  const Transition& record(size_t i) const { return ring_[i]; }

  TransitionBatch sample(int batch_size, Rng& rng) const;
  TransitionBatch as_batch() const;  // entire contents, oldest first

 private:
  TransitionBatch gather(const std::vector<size_t>& idx) const;
  size_t capacity_;
  size_t next_ = 0;  // ring write position once full
  std::vector<Transition> ring_;
};

}  // namespace basis
