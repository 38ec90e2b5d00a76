#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "platoon_marl/rng.hpp"

namespace platoon_marl {

/// One joint step. Layout for P agents with observation size D and action
/// size A: state/next_state = P*D values (agent-major), action = P*A clamped
/// raw actor outputs, reward vectors = P values.
struct Transition {
  std::vector<double> state;
  std::vector<double> action;
  std::vector<double> local_reward;
  std::vector<double> task1_reward;
  std::vector<double> task2_reward;
  double global_reward = 0.0;
  std::vector<double> next_state;
  bool terminal = false;

  bool operator==(const Transition&) const = default;
};

/// Fixed-capacity ring; the oldest transition is evicted first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
    data_.reserve(std::min<std::size_t>(capacity, 4096));
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  void push(Transition t) {
    if (data_.size() < capacity_) {
      data_.push_back(std::move(t));
    } else {
      data_[head_] = std::move(t);
      head_ = (head_ + 1) % capacity_;
    }
  }

  /// i-th stored transition, oldest first.
  const Transition& at(std::size_t i) const {
    if (i >= data_.size()) throw std::out_of_range("ReplayBuffer::at");
    return data_[(head_ + i) % data_.size()];
  }

  /// `count` distinct logical indices drawn uniformly (partial Fisher-Yates).
  std::vector<std::size_t> sample_indices(std::size_t count, Rng& rng) const {
    if (count == 0 || count > data_.size()) throw std::invalid_argument("ReplayBuffer: not enough transitions to sample");
    std::vector<std::size_t> idx(data_.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < count; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(count);
    return idx;
  }

  std::vector<const Transition*> sample(std::size_t count, Rng& rng) const {
    std::vector<const Transition*> out;
    for (std::size_t i : sample_indices(count, rng)) out.push_back(&at(i));
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<Transition> data_;
};

inline void buffer_push(ReplayBuffer& buf, Transition t) { buf.push(std::move(t)); }

inline std::vector<const Transition*> buffer_sample(const ReplayBuffer& buf, std::size_t count, Rng& rng) {
  return buf.sample(count, rng);
}

}  // namespace platoon_marl
