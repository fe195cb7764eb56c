#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <stdexcept>
#include <string>

#include "dacph/sac/adam.hpp"
#include "dacph/sac/mlp.hpp"
#include "dacph/sac/policy.hpp"
#include "dacph/sac/replay_buffer.hpp"

namespace dacph::sac {

struct SacHyper {
  double discount = 0.99;
  double target_smoothing = 0.005;
  double lr_actor = 3e-4;
  double lr_critic = 3e-4;
  double lr_alpha = 3e-4;
  int batch_size = 256;
  std::size_t buffer_capacity = 100000;
  double target_entropy = -1.0;
  int updates_per_step = 1;
  int warmup_steps = 1000;
  int hidden = 256;
  double initial_alpha = 1.0;
  double action_scale = 1.0;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

struct LossReport {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double alpha_loss = 0.0;
  double alpha = 0.0;
  double mean_q = 0.0;
  double mean_log_prob = 0.0;
};

struct CriticLoss {
  double value = 0.0;  // sum of both critics' mean squared errors
  double mean_q = 0.0;
  MlpGradients grad_q1;
  MlpGradients grad_q2;
};

struct ActorLoss {
  double value = 0.0;
  double mean_log_prob = 0.0;
  MlpGradients grad;
};

class SacDivergence : public std::runtime_error {
 public:
  explicit SacDivergence(const std::string& what) : std::runtime_error(what) {}
};

// Soft actor-critic with twin critics, Polyak-averaged targets, a
// tanh-Gaussian actor and a learned entropy temperature.
class SacAgent {
 public:
  SacAgent() = default;
  SacAgent(int obs_dim, int act_dim, SacHyper hyper, std::uint64_t seed);

  PolicySample act(const Vector& obs);                // stochastic, advances rng
  Vector act_deterministic(const Vector& obs) const;  // scale * tanh(mu)
  Vector random_action();                              // uniform over the action box

  // Critic targets y = r + discount (1 - done) (min Q'(s', a') - alpha log pi(a'|s'))
  // with a' drawn using `next_noise`.
  Vector critic_targets(const TransitionBatch& batch, const Matrix& next_noise) const;
  CriticLoss critic_loss(const TransitionBatch& batch, const Matrix& next_noise,
                         bool with_gradients) const;
  ActorLoss actor_loss(const TransitionBatch& batch, const Matrix& noise, bool with_gradients) const;
  // d/dlog_alpha of -mean(log_alpha (log pi + target_entropy)).
  double alpha_loss(double mean_log_prob) const;
  double alpha_gradient(double mean_log_prob) const;

  // One full update: critics, actor, temperature, then target smoothing.
  LossReport sac_step(const TransitionBatch& batch);

  Matrix draw_noise(Eigen::Index batch);

  void save(std::ostream& os) const;
  void load(std::istream& is);
  void save(const std::filesystem::path& path) const;
  static SacAgent load_file(const std::filesystem::path& path);

  const SacHyper& hyper() const { return hyper_; }
  SacHyper& mutable_hyper() { return hyper_; }
  int obs_dim() const { return obs_dim_; }
  int act_dim() const { return act_dim_; }
  double alpha() const;
  double log_alpha() const { return log_alpha_; }
  void set_log_alpha(double v) { log_alpha_ = v; }

  TanhGaussianPolicy& policy() { return policy_; }
  const TanhGaussianPolicy& policy() const { return policy_; }
  Mlp& critic(int i) { return i == 0 ? q1_ : q2_; }
  const Mlp& critic(int i) const { return i == 0 ? q1_ : q2_; }
  Mlp& target_critic(int i) { return i == 0 ? q1_target_ : q2_target_; }
  const Mlp& target_critic(int i) const { return i == 0 ? q1_target_ : q2_target_; }
  ReplayBuffer& buffer() { return buffer_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  std::mt19937_64& rng() { return rng_; }
  std::int64_t updates() const { return updates_; }
  std::int64_t env_steps() const { return env_steps_; }
  void count_env_step() { ++env_steps_; }

  // Bitwise comparison of every persistent field, used by checkpoint tests.
  bool identical_to(const SacAgent& other) const;

 private:
  Matrix critic_input(const Matrix& obs, const Matrix& action) const;

  int obs_dim_ = 0;
  int act_dim_ = 0;
  SacHyper hyper_;
  TanhGaussianPolicy policy_;
  Mlp q1_, q2_, q1_target_, q2_target_;
  AdamOptimizer actor_opt_, q1_opt_, q2_opt_;
  double log_alpha_ = 0.0;
  ScalarAdam alpha_opt_;
  ReplayBuffer buffer_;
  std::mt19937_64 rng_;
  std::int64_t updates_ = 0;
  std::int64_t env_steps_ = 0;
};

}  // namespace dacph::sac
