#pragma once

#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "dacph/lhs/controllers.hpp"
#include "dacph/ph/integrator.hpp"
#include "dacph/ph/ph_model.hpp"
#include "dacph/safety/shield.hpp"

namespace dacph::pendulum {

using ph::Matrix;
using ph::Vector;

struct PendulumParams {
  double mass = 1.0;      // kg
  double length = 1.0;    // m
  double gravity = 9.81;  // m/s^2
  double damping = 0.1;   // N m s
  double dt = 0.05;       // control sampling period, s

  void validate() const;
  double inertia() const { return mass * length * length; }
  double mgl() const { return mass * gravity * length; }
};

// Parameter vector layout consumed by the model callbacks: (m, l, grav, c).
ph::PhParams pendulum_theta(const PendulumParams& p);

// Inverted pendulum in port-Hamiltonian form, x = (angle from upright, momentum).
ph::PhModel make_pendulum();

struct RewardWeights {
  double w1 = 1.0;
  double w2 = 0.1;
  double w3 = 0.1;
  double w4 = 1.0;
  double q_max = std::numbers::pi / 4.0;

  void validate() const;
};

// Symmetric angle-limit penalty: (|x1| - q_max)^2 outside the limit, else 0.
double angle_penalty(double x1, double q_max);
double reward(const Vector& x, double tau, const RewardWeights& w);

// Structured Ks = [[0, 1/(m l^2)], [k21, k2]] with the Lyapunov certificate for W = I.
lhs::GainConfig structured_gains(const PendulumParams& p, double k21, double k2,
                                 const Matrix& KI = Matrix());

// Torque that realises the commanded port exactly: tau = Pi_c(2) + c x2 / (m l^2).
double oracle_torque(const Vector& x, const Vector& pi_c, const PendulumParams& p);

// Regressor form of J gradH with theta_a = (1/(m l^2), m g l).
lhs::ParametricFlow adaptive_flow();
Vector adaptive_theta(const PendulumParams& p);

// Barriers for |x1| <= q_max under a torque bound tau_max: the angle limit
// itself plus one braking-distance barrier per side,
//   q_max -/+ x1 - max(0, +/-p)^2 / (2 a m l^2),  a = brake_fraction (tau_max - m g l sin q_max),
// which gives the torque first-order influence on h within one step.
std::vector<safety::Barrier> angle_barriers(const PendulumParams& p, double q_max,
                                            double tau_max, double brake_fraction = 0.5);

struct LogRow {
  double t = 0.0;
  Vector x;
  Vector z;
  Vector pi_c;
  Vector pi;  // realised port
  double tau = 0.0;
  double H = 0.0;
  double reward = 0.0;
  double cumulative_return = 0.0;
};

struct EpisodeLog {
  std::vector<LogRow> rows;
  Vector final_x;
  Vector final_z;
  std::uint64_t seed = 0;
  std::string config_hash;
  bool aborted = false;
  std::string abort_reason;

  double total_return() const { return rows.empty() ? 0.0 : rows.back().cumulative_return; }
};

struct EnvConfig {
  PendulumParams params;
  RewardWeights weights;
  int horizon_steps = 200;
  int substeps = 10;  // RK4 steps per control period
  bool wrap_angle = true;  // map x1 into (-pi, pi] after every control period
  Vector obs_scale = Vector::Constant(3, 1.0);

  EnvConfig();
  void validate() const;
};

struct StepResult {
  Vector observation;
  double reward = 0.0;
  bool done = false;
  bool aborted = false;
};

// Torque evaluated as state feedback inside every integrator stage.
using TorqueLaw = std::function<double(const Vector& x, const Vector& pi_c)>;

class PendulumEnv {
 public:
  PendulumEnv(EnvConfig cfg, lhs::LhsController controller);

  // x1 ~ U[-q_max, q_max], x2 = 0, controller state cleared.
  Vector reset(std::mt19937_64& rng);
  Vector reset_to(const Vector& x0);

  // Holds tau over one control period.
  StepResult step(double tau);
  // Re-evaluates `law` at every RK4 stage; the logged torque is law at the step start.
  StepResult step_feedback(const TorqueLaw& law);

  // State after one held-torque period from x, leaving the environment untouched.
  Vector predict(const Vector& x, double tau) const;

  Vector observation() const;
  Vector normalize(const Vector& x, const Vector& pi_c) const;
  ph::PortValue port_command() const { return controller_.command(x_); }

  // Reference x_d seen by the parameter update (zero by default). With a known
  // excitation injected, this is the nominal closed-loop response to it.
  void set_adaptation_reference(const Vector& x_d) { x_ref_ = x_d; }

  const Vector& state() const { return x_; }
  double time() const { return steps_ * cfg_.params.dt; }
  int steps() const { return steps_; }
  bool done() const { return done_; }
  const EnvConfig& config() const { return cfg_; }
  const ph::PhModel& model() const { return model_; }
  const ph::PhParams& theta() const { return theta_; }
  lhs::LhsController& controller() { return controller_; }
  const lhs::LhsController& controller() const { return controller_; }
  const EpisodeLog& log() const { return log_; }
  EpisodeLog& log() { return log_; }

 private:
  StepResult advance(const ph::VectorField& field, double tau_logged);

  EnvConfig cfg_;
  ph::PhModel model_;
  ph::PhParams theta_;
  lhs::LhsController controller_;
  Vector x_;
  Vector x_ref_;
  int steps_ = 0;
  bool done_ = true;
  EpisodeLog log_;
};

}  // namespace dacph::pendulum
