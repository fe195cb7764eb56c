#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "dacph/excitation/excitation.hpp"
#include "dacph/pendulum/pendulum.hpp"
#include "dacph/sac/agent.hpp"

namespace dacph::harness {

using pendulum::Matrix;
using pendulum::Vector;

enum class ConstraintMode { Soft, Hard };
enum class PolicyKind { Oracle, Agent, Zero };

std::string to_string(ConstraintMode m);
std::string to_string(PolicyKind p);
PolicyKind parse_policy(const std::string& s);

struct LhsSettings {
  double k21 = -0.5;
  double k2 = -1.5;
  bool integrator = false;
  Matrix KI;  // defaults to [[-2, -1.5], [-1.5, -2]]
  bool adaptive = false;
  Vector adapt_gain;      // diagonal of Gamma
  Vector initial_scale;   // theta_hat(0) = initial_scale .* theta_true

  LhsSettings();
};

struct SafetySettings {
  ConstraintMode mode = ConstraintMode::Soft;
  double gamma_cbf = 0.5;
  double beta = 1.0;
  double delta = 0.05;
  double torque_lo = -12.0;
  double torque_hi = 12.0;
  double brake_fraction = 0.5;
};

struct PeSettings {
  bool enabled = false;
  excitation::PESignalConfig signal;
  double beta_pe = 0.0;
  double window = 2.0;  // s
  double threshold = 1e-6;
};

struct EpisodeSettings {
  int train_episodes = 45;
  int horizon_steps = 200;       // 10 s at the default dt
  int eval_horizon_steps = 400;  // 20 s, used with the integrator
  int eval_runs = 10;
  int checkpoint_every = 15;
  int ma_window = 20;
};

struct RunConfig {
  std::uint64_t seed = 7;
  std::string output_dir = "runs/default";
  PolicyKind policy = PolicyKind::Oracle;
  pendulum::PendulumParams physics;
  int substeps = 10;
  bool wrap_angle = true;
  LhsSettings lhs;
  pendulum::RewardWeights reward;
  SafetySettings safety;
  sac::SacHyper sac;
  bool on_policy = false;
  Vector obs_scale;
  PeSettings pe;
  EpisodeSettings episode;

  // Keys that were absent from the source file and took their default.
  std::vector<std::string> defaults_applied;

  RunConfig();
  void validate() const;
};

// Strict parsing: unknown keys and out-of-range values raise ConfigError
// naming the key path (e.g. "safety.gamma_cbf").
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);

// Fully expanded configuration; feeding it back to parse_config yields the
// same effective configuration and hash.
nlohmann::json to_json(const RunConfig& cfg);
std::string config_hash(const RunConfig& cfg);

// splitmix64(master + 0x9E3779B97F4A7C15 * (stream + 1))
std::uint64_t split_seed(std::uint64_t master, std::uint64_t stream);

// Seed streams reserved for the harness.
inline constexpr std::uint64_t kTrainEnvStream = 1000;
inline constexpr std::uint64_t kAgentStream = 1001;

// Environment pieces assembled from the configuration.
lhs::GainConfig make_gains(const RunConfig& cfg);
lhs::LhsController make_controller(const RunConfig& cfg);
pendulum::EnvConfig make_env_config(const RunConfig& cfg, int horizon_steps);
safety::SafetySpec make_safety_spec(const RunConfig& cfg);

}  // namespace dacph::harness
