#pragma once

// Central-difference oracle for the SAC losses, shared by unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <random>

#include "dacph/sac/agent.hpp"

namespace dacph::testing {

using namespace dacph::sac;

inline SacHyper small_hyper() {
  SacHyper h;
  h.hidden = 16;
  h.batch_size = 8;
  h.buffer_capacity = 64;
  h.action_scale = 2.0;
  h.initial_alpha = 0.7;
  return h;
}

inline TransitionBatch random_batch(int n, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> act(-0.95 * scale, 0.95 * scale);
  TransitionBatch b{Matrix(3, n), Matrix(1, n), Vector(n), Matrix(3, n), Vector(n)};
  for (int c = 0; c < n; ++c) {
    for (int r = 0; r < 3; ++r) {
      b.obs(r, c) = normal(rng);
      b.next_obs(r, c) = normal(rng);
    }
    b.action(0, c) = act(rng);
    b.reward(c) = normal(rng);
    b.done(c) = c % 5 == 0 ? 1.0 : 0.0;
  }
  return b;
}

// Central differences of `loss` over every parameter of `net`.
template <typename Loss>
inline Vector numeric_gradient(Mlp& net, Loss loss, double h = 1e-5) {
  Vector theta = net.flatten();
  Vector g(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double keep = theta(i);
    theta(i) = keep + h;
    net.unflatten(theta);
    const double up = loss();
    theta(i) = keep - h;
    net.unflatten(theta);
    const double down = loss();
    theta(i) = keep;
    g(i) = (up - down) / (2.0 * h);
  }
  net.unflatten(theta);
  return g;
}

inline double worst_relative_error(const Vector& analytic, const Vector& numeric) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({std::abs(analytic(i)), std::abs(numeric(i)), 1e-3});
    worst = std::max(worst, std::abs(analytic(i) - numeric(i)) / denom);
  }
  return worst;
}

}  // namespace dacph::testing
