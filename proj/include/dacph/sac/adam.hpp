#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dacph/sac/mlp.hpp"

namespace dacph::sac {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam step on a flat parameter block. `step` is the 1-based
// index of this update. Moments are updated in place.
void adam_update(std::span<double> params, std::span<const double> grads,
                 std::span<double> first_moment, std::span<double> second_moment,
                 std::int64_t step, const AdamConfig& cfg);

// Moment buffers for every tensor of one network, plus the shared step count.
class AdamOptimizer {
 public:
  AdamOptimizer() = default;
  AdamOptimizer(const Mlp& net, AdamConfig cfg);

  void step(Mlp& net, const MlpGradients& grads);

  std::int64_t steps() const { return step_; }
  const AdamConfig& config() const { return cfg_; }

  // Raw access for checkpointing.
  std::vector<Matrix>& first_weights() { return m_w_; }
  std::vector<Matrix>& second_weights() { return v_w_; }
  std::vector<Vector>& first_biases() { return m_b_; }
  std::vector<Vector>& second_biases() { return v_b_; }
  const std::vector<Matrix>& first_weights() const { return m_w_; }
  const std::vector<Matrix>& second_weights() const { return v_w_; }
  const std::vector<Vector>& first_biases() const { return m_b_; }
  const std::vector<Vector>& second_biases() const { return v_b_; }
  void set_steps(std::int64_t s) { step_ = s; }

 private:
  AdamConfig cfg_;
  std::int64_t step_ = 0;
  std::vector<Matrix> m_w_, v_w_;
  std::vector<Vector> m_b_, v_b_;
};

// Adam for a single scalar parameter (entropy temperature).
struct ScalarAdam {
  AdamConfig cfg;
  double m = 0.0;
  double v = 0.0;
  std::int64_t step = 0;

  void update(double& param, double grad);
};

}  // namespace dacph::sac
