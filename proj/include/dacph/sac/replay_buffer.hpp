#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "dacph/sac/mlp.hpp"

namespace dacph::sac {

struct Transition {
  Vector obs;
  Vector action;
  double reward = 0.0;
  Vector next_obs;
  bool done = false;
};

// Column-major batch: one transition per column.
struct TransitionBatch {
  Matrix obs;
  Matrix action;
  Vector reward;
  Matrix next_obs;
  Vector done;

  Eigen::Index size() const { return obs.cols(); }
};

// Fixed-capacity ring of transitions. Pushing into a full buffer overwrites
// the oldest entry; sampling is uniform with replacement over the filled part.
class ReplayBuffer {
 public:
  ReplayBuffer() = default;
  ReplayBuffer(std::size_t capacity, int obs_dim, int act_dim);

  void push(const Transition& t);
  TransitionBatch sample(std::size_t batch_size, std::mt19937_64& rng) const;
  TransitionBatch gather(const std::vector<std::size_t>& indices) const;
  std::vector<std::size_t> sample_indices(std::size_t batch_size, std::mt19937_64& rng) const;

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t cursor() const { return cursor_; }
  int obs_dim() const { return static_cast<int>(obs_.rows()); }
  int act_dim() const { return static_cast<int>(act_.rows()); }

  Transition at(std::size_t index) const;
  void clear();

  // Raw storage for checkpointing.
  Matrix& obs_storage() { return obs_; }
  Matrix& action_storage() { return act_; }
  Vector& reward_storage() { return rew_; }
  Matrix& next_obs_storage() { return next_; }
  Vector& done_storage() { return done_; }
  const Matrix& obs_storage() const { return obs_; }
  const Matrix& action_storage() const { return act_; }
  const Vector& reward_storage() const { return rew_; }
  const Matrix& next_obs_storage() const { return next_; }
  const Vector& done_storage() const { return done_; }
  void restore_cursor(std::size_t size, std::size_t cursor) {
    size_ = size;
    cursor_ = cursor;
  }

 private:
  std::size_t capacity_ = 0;
  std::size_t size_ = 0;
  std::size_t cursor_ = 0;
  Matrix obs_;
  Matrix act_;
  Vector rew_;
  Matrix next_;
  Vector done_;
};

}  // namespace dacph::sac
