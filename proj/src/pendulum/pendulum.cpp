#include "dacph/pendulum/pendulum.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dacph/ph/errors.hpp"

namespace dacph::pendulum {

void PendulumParams::validate() const {
  if (!(mass > 0.0)) throw ConfigError("physics.mass", "must be positive");
  if (!(length > 0.0)) throw ConfigError("physics.length", "must be positive");
  if (!(gravity >= 0.0)) throw ConfigError("physics.gravity", "must be non-negative");
  if (!(damping >= 0.0)) throw ConfigError("physics.damping", "must be non-negative");
  if (!(dt > 0.0)) throw ConfigError("physics.dt", "must be positive");
}

ph::PhParams pendulum_theta(const PendulumParams& p) {
  Vector theta(4);
  theta << p.mass, p.length, p.gravity, p.damping;
  return ph::PhParams{theta};
}

ph::PhModel make_pendulum() {
  ph::PhModel m;
  m.name = "pendulum";
  m.dim_state = 2;
  m.dim_input = 1;
  m.J = [](const Vector&, const Vector&) {
    Matrix J(2, 2);
    J << 0.0, 1.0, -1.0, 0.0;
    return J;
  };
  m.R = [](const Vector&, const Vector& th) {
    Matrix R = Matrix::Zero(2, 2);
    R(1, 1) = th(3);
    return R;
  };
  m.g = [](const Vector&, const Vector&) {
    Matrix g(2, 1);
    g << 0.0, 1.0;
    return g;
  };
  m.H = [](const Vector& x, const Vector& th) {
    const double ml2 = th(0) * th(1) * th(1);
    const double mgl = th(0) * th(2) * th(1);
    return x(1) * x(1) / (2.0 * ml2) + mgl * std::cos(x(0));
  };
  m.grad_H = [](const Vector& x, const Vector& th) {
    const double ml2 = th(0) * th(1) * th(1);
    const double mgl = th(0) * th(2) * th(1);
    Vector g(2);
    g << -mgl * std::sin(x(0)), x(1) / ml2;
    return g;
  };
  return m;
}

void RewardWeights::validate() const {
  if (!(w1 >= 0.0)) throw ConfigError("reward.w1", "must be non-negative");
  if (!(w2 >= 0.0)) throw ConfigError("reward.w2", "must be non-negative");
  if (!(w3 >= 0.0)) throw ConfigError("reward.w3", "must be non-negative");
  if (!(w4 >= 0.0)) throw ConfigError("reward.w4", "must be non-negative");
  if (!(q_max > 0.0)) throw ConfigError("reward.q_max", "must be positive");
}

double angle_penalty(double x1, double q_max) {
  const double over = std::abs(x1) - q_max;
  return over >= 0.0 ? over * over : 0.0;
}

double reward(const Vector& x, double tau, const RewardWeights& w) {
  return -w.w1 * x(0) * x(0) - w.w2 * x(1) * x(1) - w.w3 * tau * tau -
         w.w4 * angle_penalty(x(0), w.q_max);
}

lhs::GainConfig structured_gains(const PendulumParams& p, double k21, double k2,
                                 const Matrix& KI) {
  const auto model = make_pendulum();
  lhs::GainRequest req;
  req.free_rows = Matrix::Zero(2, 2);
  req.free_rows(1, 0) = k21;
  req.free_rows(1, 1) = k2;
  req.pinned = {true, false};
  req.KI = KI;
  return lhs::design_structured_gain(model, pendulum_theta(p), req);
}

double oracle_torque(const Vector& x, const Vector& pi_c, const PendulumParams& p) {
  return pi_c(1) + p.damping * x(1) / p.inertia();
}

lhs::ParametricFlow adaptive_flow() {
  lhs::ParametricFlow f;
  f.regressor = [](const Vector& x) {
    Matrix phi = Matrix::Zero(2, 2);
    phi(0, 0) = x(1);
    phi(1, 1) = std::sin(x(0));
    return phi;
  };
  f.conservative_flow = [reg = f.regressor](const Vector& x, const Vector& theta_a) {
    return Vector(reg(x) * theta_a);
  };
  return f;
}

Vector adaptive_theta(const PendulumParams& p) {
  Vector t(2);
  t << 1.0 / p.inertia(), p.mgl();
  return t;
}

std::vector<safety::Barrier> angle_barriers(const PendulumParams& p, double q_max,
                                            double tau_max, double brake_fraction) {
  if (!(brake_fraction > 0.0 && brake_fraction <= 1.0)) {
    throw ConfigError("safety.brake_fraction", "must lie in (0, 1]");
  }
  const double authority = tau_max - p.mgl() * std::sin(q_max);
  if (!(authority > 0.0)) {
    throw ConfigError("safety.torque_box", "cannot hold the pendulum at the angle limit");
  }
  const double k = 1.0 / (2.0 * brake_fraction * authority * p.inertia());
  std::vector<safety::Barrier> out;
  out.push_back({"angle", safety::BarrierDomain::State,
                 [q_max](const Vector& x) { return q_max * q_max - x(0) * x(0); }, 0.0});
  out.push_back({"brake_pos", safety::BarrierDomain::State,
                 [q_max, k](const Vector& x) {
                   const double v = std::max(0.0, x(1));
                   return q_max - x(0) - k * v * v;
                 },
                 0.0});
  out.push_back({"brake_neg", safety::BarrierDomain::State,
                 [q_max, k](const Vector& x) {
                   const double v = std::min(0.0, x(1));
                   return q_max + x(0) - k * v * v;
                 },
                 0.0});
  return out;
}

EnvConfig::EnvConfig() {
  obs_scale = Vector(3);
  obs_scale << std::numbers::pi / 4.0, 2.0, 10.0;
}

void EnvConfig::validate() const {
  params.validate();
  weights.validate();
  if (horizon_steps <= 0) throw ConfigError("episode.horizon_steps", "must be positive");
  if (substeps <= 0) throw ConfigError("physics.substeps", "must be positive");
  if (obs_scale.size() != 3 || !(obs_scale.array() > 0.0).all()) {
    throw ConfigError("sac.obs_scale", "needs three positive entries");
  }
}

PendulumEnv::PendulumEnv(EnvConfig cfg, lhs::LhsController controller)
    : cfg_(std::move(cfg)),
      model_(make_pendulum()),
      theta_(pendulum_theta(cfg_.params)),
      controller_(std::move(controller)),
      x_(Vector::Zero(2)),
      x_ref_(Vector::Zero(2)) {
  cfg_.validate();
}

Vector PendulumEnv::reset(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(-cfg_.weights.q_max, cfg_.weights.q_max);
  Vector x0(2);
  x0 << unif(rng), 0.0;
  return reset_to(x0);
}

Vector PendulumEnv::reset_to(const Vector& x0) {
  ph::validate_state(model_, ph::PhState{x0});
  x_ = x0;
  x_ref_ = Vector::Zero(2);
  steps_ = 0;
  done_ = false;
  controller_.reset();
  const auto seed = log_.seed;
  const auto hash = log_.config_hash;
  log_ = EpisodeLog{};
  log_.seed = seed;
  log_.config_hash = hash;
  log_.rows.reserve(static_cast<std::size_t>(cfg_.horizon_steps));
  log_.final_x = x_;
  log_.final_z = controller_.integrator().z;
  return observation();
}

Vector PendulumEnv::normalize(const Vector& x, const Vector& pi_c) const {
  Vector obs(3);
  obs << x(0), x(1), pi_c(1);
  return obs.cwiseQuotient(cfg_.obs_scale);
}

Vector PendulumEnv::observation() const { return normalize(x_, port_command().pi); }

Vector PendulumEnv::predict(const Vector& x, double tau) const {
  const ph::ControlInput u{Vector::Constant(1, tau)};
  auto field = [&](const Vector& s) {
    return ph::eval_full_dynamics(model_, ph::PhState{s}, theta_, u);
  };
  Vector next = ph::rk4_advance(field, x, cfg_.params.dt, cfg_.substeps);
  if (cfg_.wrap_angle) next(0) = std::remainder(next(0), 2.0 * std::numbers::pi);
  return next;
}

StepResult PendulumEnv::step(double tau) {
  const ph::ControlInput u{Vector::Constant(1, tau)};
  auto field = [this, u](const Vector& s) {
    return ph::eval_full_dynamics(model_, ph::PhState{s}, theta_, u);
  };
  return advance(field, tau);
}

StepResult PendulumEnv::step_feedback(const TorqueLaw& law) {
  auto field = [this, &law](const Vector& s) {
    const double tau = law(s, controller_.command(s).pi);
    return ph::eval_full_dynamics(model_, ph::PhState{s}, theta_,
                                  ph::ControlInput{Vector::Constant(1, tau)});
  };
  return advance(field, law(x_, port_command().pi));
}

StepResult PendulumEnv::advance(const ph::VectorField& field, double tau_logged) {
  if (done_) throw std::logic_error("PendulumEnv: step called on a finished episode");
  LogRow row;
  row.t = time();
  row.x = x_;
  row.z = controller_.integrator().z;
  row.pi_c = port_command().pi;
  row.tau = tau_logged;
  row.H = model_.H(x_, theta_.theta);

  StepResult out;
  Vector next;
  try {
    if (!std::isfinite(tau_logged)) throw NumericError("env_step", "non-finite torque");
    row.pi = ph::port_map(model_, ph::PhState{x_}, theta_,
                          ph::ControlInput{Vector::Constant(1, tau_logged)})
                 .pi;
    next = ph::rk4_advance(field, x_, cfg_.params.dt, cfg_.substeps);
    if (!next.allFinite()) throw NumericError("env_step", "non-finite state");
    if (cfg_.wrap_angle) next(0) = std::remainder(next(0), 2.0 * std::numbers::pi);
  } catch (const NumericError& e) {
    log_.aborted = true;
    log_.abort_reason = e.what();
    done_ = true;
    out.done = true;
    out.aborted = true;
    out.observation = Vector::Zero(3);
    return out;
  }

  controller_.advance(x_, x_ref_, cfg_.params.dt);
  x_ = next;
  ++steps_;
  row.reward = reward(x_, tau_logged, cfg_.weights);
  row.cumulative_return = log_.total_return() + row.reward;
  log_.rows.push_back(std::move(row));
  log_.final_x = x_;
  log_.final_z = controller_.integrator().z;

  done_ = steps_ >= cfg_.horizon_steps;
  out.observation = observation();
  out.reward = log_.rows.back().reward;
  out.done = done_;
  return out;
}

}  // namespace dacph::pendulum
