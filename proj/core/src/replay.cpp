#include "basis/replay.hpp"

#include <algorithm>
#include <stdexcept>

namespace basis {

ReplayBuffer::ReplayBuffer(size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw std::invalid_argument("ReplayBuffer: capacity must be > 0");
  ring_.reserve(std::min<size_t>(capacity_, 1 << 16));
}

void ReplayBuffer::push(Transition t) {
  if (ring_.size() < capacity_) {
    ring_.push_back(std::move(t));
    return;
  }
  ring_[next_] = std::move(t);  // overwrite oldest
  next_ = (next_ + 1) % capacity_;
}

TransitionBatch ReplayBuffer::gather(const std::vector<size_t>& idx) const {
  TransitionBatch batch;
  const int B = static_cast<int>(idx.size());
  const Eigen::Index dim = ring_.front().obs.size();
  batch.obs.resize(dim, B);
  batch.next_obs.resize(dim, B);
  batch.reward.resize(B);
  batch.action.resize(B);
  batch.next_action.resize(B);
  batch.task.resize(B);
  batch.done.resize(B);
  for (int i = 0; i < B; ++i) {
    const Transition& t = ring_[idx[i]];
    batch.obs.col(i) = t.obs;
    batch.next_obs.col(i) = t.next_obs;
    batch.reward[i] = t.reward;
    batch.action[i] = t.action;
    batch.next_action[i] = t.next_action;
    batch.task[i] = t.task;
    batch.done[i] = t.done;
  }
  return batch;
}

TransitionBatch ReplayBuffer::sample(int batch_size, Rng& rng) const {
  if (ring_.empty()) throw std::logic_error("ReplayBuffer: sample from empty buffer");
  if (batch_size < 1 || static_cast<size_t>(batch_size) > ring_.size())
    throw std::invalid_argument("ReplayBuffer: batch size exceeds buffer contents");
  std::vector<size_t> idx;
  idx.reserve(batch_size);
  while (static_cast<int>(idx.size()) < batch_size) {
    size_t candidate = static_cast<size_t>(rng.uniform_int(static_cast<int>(ring_.size())));
    if (std::find(idx.begin(), idx.end(), candidate) == idx.end())
      idx.push_back(candidate);
  }
  return gather(idx);
}

TransitionBatch ReplayBuffer::as_batch() const {
  if (ring_.empty()) throw std::logic_error("ReplayBuffer: empty buffer");
  std::vector<size_t> idx(ring_.size());
  // oldest first: ring grows in place until capacity, then next_ marks the oldest
  size_t start = ring_.size() < capacity_ ? 0 : next_;
  for (size_t i = 0; i < ring_.size(); ++i) idx[i] = (start + i) % ring_.size();
  return gather(idx);
}

}  // namespace basis
