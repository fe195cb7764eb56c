#pragma once

#include <functional>
#include <optional>

#include "dacph/lhs/gain_design.hpp"
#include "dacph/ph/ph_model.hpp"

namespace dacph::lhs {

using ph::PortValue;

// Conservative flow written in an adapted parameterisation theta_a, with a
// regressor phi(x) such that flow(x, a) - flow(x, b) = phi(x) (a - b).
struct ParametricFlow {
  std::function<Vector(const Vector& x, const Vector& theta_a)> conservative_flow;
  std::function<Matrix(const Vector& x)> regressor;
};

struct AdaptiveState {
  Vector theta_hat;
  Matrix Gamma;
  ParametricFlow flow;
};

struct IntegratorState {
  Vector z;
};

// Case I: Pi_c = -J gradH + Ks (x - x_d) + xd_dot. Ideal closed loop is
// edot = Ks e for e = x - x_d.
PortValue control_port_case1(const ph::PhModel& model, const ph::PhParams& theta,
                             const Vector& x, const Vector& x_d, const Vector& xd_dot,
                             const GainConfig& gains);

// Case II: same law with the conservative flow evaluated at theta_hat.
PortValue control_port_adaptive(const Vector& x, const Vector& x_d, const Vector& xd_dot,
                                const AdaptiveState& state, const GainConfig& gains);

// One explicit Euler step of theta_hat_dot = Gamma phi(x)^T P (x - x_d).
Vector adapt_params(const AdaptiveState& state, const Vector& x, const Vector& x_d,
                    const Matrix& P, double dt);

// Pi_c + KI z.
PortValue augment_with_integrator(const PortValue& pi_c, const IntegratorState& z,
                                  const Matrix& KI);

// Stateful controller owned by a single episode runner: gains plus the
// optional integrator (zdot = x) and parameter adaptation states.
class LhsController {
 public:
  LhsController(ph::PhModel model, ph::PhParams theta, GainConfig gains);

  void enable_integrator(bool on) { integrator_on_ = on; }
  bool integrator_enabled() const { return integrator_on_; }

  void enable_adaptation(AdaptiveState state);
  void disable_adaptation() { adaptive_.reset(); }
  const std::optional<AdaptiveState>& adaptation() const { return adaptive_; }

  // Commanded port at state x for the reference (x_d, xd_dot); uses the
  // current integrator and parameter estimates, does not mutate them.
  PortValue command(const Vector& x, const Vector& x_d, const Vector& xd_dot) const;
  PortValue command(const Vector& x) const;

  // Explicit Euler update of z and theta_hat from the sampled state.
  void advance(const Vector& x, const Vector& x_d, double dt);
  void advance(const Vector& x, double dt);

  void reset();

  const GainConfig& gains() const { return gains_; }
  void set_gains(GainConfig gains) { gains_ = std::move(gains); }
  const IntegratorState& integrator() const { return z_; }
  const ph::PhModel& model() const { return model_; }
  const ph::PhParams& params() const { return theta_; }

 private:
  ph::PhModel model_;
  ph::PhParams theta_;
  GainConfig gains_;
  bool integrator_on_ = false;
  IntegratorState z_;
  std::optional<AdaptiveState> adaptive_;
  Vector theta_hat0_;
};

}  // namespace dacph::lhs
