#include "dacph/sac/replay_buffer.hpp"

#include <stdexcept>
#include <string>

#include "dacph/ph/errors.hpp"

namespace dacph::sac {

ReplayBuffer::ReplayBuffer(std::size_t capacity, int obs_dim, int act_dim)
    : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
  const auto cap = static_cast<Eigen::Index>(capacity);
  obs_ = Matrix::Zero(obs_dim, cap);
  act_ = Matrix::Zero(act_dim, cap);
  rew_ = Vector::Zero(cap);
  next_ = Matrix::Zero(obs_dim, cap);
  done_ = Vector::Zero(cap);
}

void ReplayBuffer::push(const Transition& t) {
  if (capacity_ == 0) throw std::logic_error("ReplayBuffer: push into zero-capacity buffer");
  if (t.obs.size() != obs_.rows() || t.next_obs.size() != next_.rows() ||
      t.action.size() != act_.rows()) {
    throw DimensionError("ReplayBuffer: transition shape does not match buffer");
  }
  const auto c = static_cast<Eigen::Index>(cursor_);
  obs_.col(c) = t.obs;
  act_.col(c) = t.action;
  rew_(c) = t.reward;
  next_.col(c) = t.next_obs;
  done_(c) = t.done ? 1.0 : 0.0;
  cursor_ = (cursor_ + 1) % capacity_;
  if (size_ < capacity_) ++size_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch_size,
                                                      std::mt19937_64& rng) const {
  if (size_ < batch_size || size_ == 0) {
    throw std::logic_error("ReplayBuffer: cannot sample " + std::to_string(batch_size) +
                           " transitions from a buffer holding " + std::to_string(size_));
  }
  std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
  std::vector<std::size_t> idx(batch_size);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

TransitionBatch ReplayBuffer::gather(const std::vector<std::size_t>& indices) const {
  const auto n = static_cast<Eigen::Index>(indices.size());
  TransitionBatch b{Matrix(obs_.rows(), n), Matrix(act_.rows(), n), Vector(n),
                    Matrix(next_.rows(), n), Vector(n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto i = static_cast<Eigen::Index>(indices[static_cast<std::size_t>(k)]);
    b.obs.col(k) = obs_.col(i);
    b.action.col(k) = act_.col(i);
    b.reward(k) = rew_(i);
    b.next_obs.col(k) = next_.col(i);
    b.done(k) = done_(i);
  }
  return b;
}

TransitionBatch ReplayBuffer::sample(std::size_t batch_size, std::mt19937_64& rng) const {
  return gather(sample_indices(batch_size, rng));
}

Transition ReplayBuffer::at(std::size_t index) const {
  if (index >= size_) throw std::out_of_range("ReplayBuffer::at");
  const auto i = static_cast<Eigen::Index>(index);
  return Transition{obs_.col(i), act_.col(i), rew_(i), next_.col(i), done_(i) != 0.0};
}

void ReplayBuffer::clear() {
  size_ = 0;
  cursor_ = 0;
}

}  // namespace dacph::sac
