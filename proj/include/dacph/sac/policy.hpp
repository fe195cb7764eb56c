#pragma once

#include <random>

#include "dacph/sac/mlp.hpp"

namespace dacph::sac {

struct PolicySample {
  Vector action;
  double log_prob = 0.0;
};

// Reparameterised squashed Gaussian: a = scale * tanh(mu + sigma * xi),
// xi ~ N(0, I). The trunk emits [mu; raw_log_std]; log_std is clamped to
// [kLogStdMin, kLogStdMax] with zero gradient outside the range.
class TanhGaussianPolicy {
 public:
  static constexpr double kLogStdMin = -20.0;
  static constexpr double kLogStdMax = 2.0;

  TanhGaussianPolicy() = default;
  TanhGaussianPolicy(int obs_dim, int act_dim, int hidden, double action_scale,
                     std::mt19937_64& rng);
  TanhGaussianPolicy(Mlp trunk, double action_scale);

  int obs_dim() const { return trunk_.input_size(); }
  int act_dim() const { return trunk_.output_size() / 2; }
  double action_scale() const { return scale_; }

  Mlp& trunk() { return trunk_; }
  const Mlp& trunk() const { return trunk_; }

  // Stochastic action with its log-density (tanh Jacobian included).
  PolicySample sample(const Vector& obs, std::mt19937_64& rng) const;
  PolicySample sample_with_noise(const Vector& obs, const Vector& xi) const;

  // scale * tanh(mu)
  Vector deterministic(const Vector& obs) const;

  // Log-density of an action strictly inside (-scale, scale).
  double log_prob(const Vector& obs, const Vector& action) const;

  // mu and clamped log_std for one observation.
  std::pair<Vector, Vector> distribution(const Vector& obs) const;

  // Batched reparameterised pass; columns are samples.
  struct Batch {
    MlpCache cache;
    Matrix mean;
    Matrix raw_log_std;
    Matrix log_std;
    Matrix std;
    Matrix noise;
    Matrix pre_squash;  // mu + sigma * xi
    Matrix squashed;    // tanh(pre_squash)
    Matrix action;      // scale * squashed
    Vector log_prob;    // one entry per sample
  };
  Batch forward(const Matrix& obs, const Matrix& noise) const;

  // Accumulates trunk gradients for a scalar loss with partials
  // d_action = dL/daction (act x batch) and d_log_prob = dL/dlog_prob (batch).
  void backward(const Batch& batch, const Matrix& d_action, const Vector& d_log_prob,
                MlpGradients* grads) const;

 private:
  Mlp trunk_;
  double scale_ = 1.0;
};

// log(1 - tanh(u)^2) evaluated without cancellation.
double log_one_minus_tanh_sq(double u);

}  // namespace dacph::sac
