#include "dacph/sac/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "dacph/ph/errors.hpp"

namespace dacph::sac {

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

double softplus(double v) { return v > 30.0 ? v : std::log1p(std::exp(v)); }

}  // namespace

double log_one_minus_tanh_sq(double u) {
  return 2.0 * (std::numbers::ln2 - u - softplus(-2.0 * u));
}

TanhGaussianPolicy::TanhGaussianPolicy(int obs_dim, int act_dim, int hidden, double action_scale,
                                       std::mt19937_64& rng)
    : trunk_({obs_dim, hidden, hidden, 2 * act_dim}, rng), scale_(action_scale) {
  if (!(action_scale > 0.0)) throw std::invalid_argument("policy: action scale must be positive");
}

TanhGaussianPolicy::TanhGaussianPolicy(Mlp trunk, double action_scale)
    : trunk_(std::move(trunk)), scale_(action_scale) {
  if (trunk_.output_size() % 2 != 0) throw DimensionError("policy: trunk output must be 2*act_dim");
  if (!(action_scale > 0.0)) throw std::invalid_argument("policy: action scale must be positive");
}

std::pair<Vector, Vector> TanhGaussianPolicy::distribution(const Vector& obs) const {
  const Vector out = trunk_.forward(obs);
  const int a = act_dim();
  Vector mu = out.head(a);
  Vector log_std = out.tail(a).cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
  return {mu, log_std};
}

PolicySample TanhGaussianPolicy::sample_with_noise(const Vector& obs, const Vector& xi) const {
  const auto [mu, log_std] = distribution(obs);
  PolicySample s;
  s.action.resize(mu.size());
  s.log_prob = 0.0;
  for (Eigen::Index j = 0; j < mu.size(); ++j) {
    const double u = mu(j) + std::exp(log_std(j)) * xi(j);
    s.action(j) = scale_ * std::tanh(u);
    s.log_prob += -0.5 * xi(j) * xi(j) - log_std(j) - kHalfLog2Pi - std::log(scale_) -
                  log_one_minus_tanh_sq(u);
  }
  return s;
}

PolicySample TanhGaussianPolicy::sample(const Vector& obs, std::mt19937_64& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector xi(act_dim());
  for (Eigen::Index j = 0; j < xi.size(); ++j) xi(j) = normal(rng);
  return sample_with_noise(obs, xi);
}

Vector TanhGaussianPolicy::deterministic(const Vector& obs) const {
  const auto [mu, log_std] = distribution(obs);
  return scale_ * mu.array().tanh().matrix();
}

double TanhGaussianPolicy::log_prob(const Vector& obs, const Vector& action) const {
  const auto [mu, log_std] = distribution(obs);
  double lp = 0.0;
  for (Eigen::Index j = 0; j < mu.size(); ++j) {
    const double t = action(j) / scale_;
    if (!(std::abs(t) < 1.0)) return -std::numeric_limits<double>::infinity();
    const double u = std::atanh(t);
    const double z = (u - mu(j)) / std::exp(log_std(j));
    lp += -0.5 * z * z - log_std(j) - kHalfLog2Pi - std::log(scale_) - log_one_minus_tanh_sq(u);
  }
  return lp;
}

TanhGaussianPolicy::Batch TanhGaussianPolicy::forward(const Matrix& obs, const Matrix& noise) const {
  const int a = act_dim();
  if (noise.rows() != a || noise.cols() != obs.cols()) {
    throw DimensionError("policy forward: noise must be act_dim x batch");
  }
  Batch b;
  const Matrix out = trunk_.forward(obs, &b.cache);
  b.mean = out.topRows(a);
  b.raw_log_std = out.bottomRows(a);
  b.log_std = b.raw_log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
  b.std = b.log_std.array().exp().matrix();
  b.noise = noise;
  b.pre_squash = b.mean + b.std.cwiseProduct(noise);
  b.squashed = b.pre_squash.array().tanh().matrix();
  b.action = scale_ * b.squashed;
  b.log_prob = Vector::Zero(obs.cols());
  const double log_scale = std::log(scale_);
  for (Eigen::Index c = 0; c < obs.cols(); ++c) {
    double lp = 0.0;
    for (int j = 0; j < a; ++j) {
      const double xi = noise(j, c);
      lp += -0.5 * xi * xi - b.log_std(j, c) - kHalfLog2Pi - log_scale -
            log_one_minus_tanh_sq(b.pre_squash(j, c));
    }
    b.log_prob(c) = lp;
  }
  return b;
}

void TanhGaussianPolicy::backward(const Batch& batch, const Matrix& d_action,
                                  const Vector& d_log_prob, MlpGradients* grads) const {
  const int a = act_dim();
  const auto n = batch.mean.cols();
  Matrix upstream(2 * a, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    for (int j = 0; j < a; ++j) {
      const double t = batch.squashed(j, c);
      // dL/du through the action and through the -log(1 - tanh^2) term.
      const double d_u = d_action(j, c) * scale_ * (1.0 - t * t) + d_log_prob(c) * 2.0 * t;
      const double sigma_xi = batch.std(j, c) * batch.noise(j, c);
      double d_log_std = d_u * sigma_xi - d_log_prob(c);
      const double raw = batch.raw_log_std(j, c);
      if (raw < kLogStdMin || raw > kLogStdMax) d_log_std = 0.0;
      upstream(j, c) = d_u;
      upstream(a + j, c) = d_log_std;
    }
  }
  trunk_.backward(batch.cache, upstream, grads);
}

}  // namespace dacph::sac
