#include "dacph/lhs/controllers.hpp"

#include "dacph/ph/errors.hpp"

namespace dacph::lhs {

namespace {

void check_len(const Vector& v, Eigen::Index n, const char* what) {
  if (v.size() != n) {
    throw DimensionError(std::string(what) + " has length " + std::to_string(v.size()) +
                         ", expected " + std::to_string(n));
  }
}

}  // namespace

PortValue control_port_case1(const ph::PhModel& model, const ph::PhParams& theta,
                             const Vector& x, const Vector& x_d, const Vector& xd_dot,
                             const GainConfig& gains) {
  const auto n = model.dim_state;
  check_len(x, n, "x");
  check_len(x_d, n, "x_d");
  check_len(xd_dot, n, "xd_dot");
  if (gains.Ks.rows() != n || gains.Ks.cols() != n) throw DimensionError("Ks must be n x n");
  const Vector flow = model.J(x, theta.theta) * model.grad_H(x, theta.theta);
  PortValue out{-flow + gains.Ks * (x - x_d) + xd_dot};
  if (!out.pi.allFinite()) throw NumericError("control_port_case1", "non-finite command");
  return out;
}

PortValue control_port_adaptive(const Vector& x, const Vector& x_d, const Vector& xd_dot,
                                const AdaptiveState& state, const GainConfig& gains) {
  const auto n = gains.Ks.rows();
  check_len(x, n, "x");
  check_len(x_d, n, "x_d");
  check_len(xd_dot, n, "xd_dot");
  const Vector flow = state.flow.conservative_flow(x, state.theta_hat);
  check_len(flow, n, "adaptive flow");
  PortValue out{-flow + gains.Ks * (x - x_d) + xd_dot};
  if (!out.pi.allFinite()) throw NumericError("control_port_adaptive", "non-finite command");
  return out;
}

Vector adapt_params(const AdaptiveState& state, const Vector& x, const Vector& x_d,
                    const Matrix& P, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("adapt_params: dt must be positive");
  const Matrix phi = state.flow.regressor(x);
  if (!phi.allFinite()) throw NumericError("adapt_params", "non-finite regressor");
  if (phi.rows() != x.size() || phi.cols() != state.theta_hat.size()) {
    throw DimensionError("adapt_params: regressor must be n x p");
  }
  Vector next = state.theta_hat + dt * (state.Gamma * (phi.transpose() * (P * (x - x_d))));
  if (!next.allFinite()) throw NumericError("adapt_params", "non-finite estimate");
  return next;
}

PortValue augment_with_integrator(const PortValue& pi_c, const IntegratorState& z,
                                  const Matrix& KI) {
  check_len(z.z, pi_c.pi.size(), "z");
  if (KI.rows() != pi_c.pi.size() || KI.cols() != z.z.size()) {
    throw DimensionError("KI must be n x n");
  }
  return PortValue{pi_c.pi + KI * z.z};
}

LhsController::LhsController(ph::PhModel model, ph::PhParams theta, GainConfig gains)
    : model_(std::move(model)), theta_(std::move(theta)), gains_(std::move(gains)) {
  z_.z = Vector::Zero(model_.dim_state);
}

void LhsController::enable_adaptation(AdaptiveState state) {
  theta_hat0_ = state.theta_hat;
  adaptive_ = std::move(state);
}

PortValue LhsController::command(const Vector& x, const Vector& x_d,
                                 const Vector& xd_dot) const {
  PortValue pi_c = adaptive_ ? control_port_adaptive(x, x_d, xd_dot, *adaptive_, gains_)
                             : control_port_case1(model_, theta_, x, x_d, xd_dot, gains_);
  if (integrator_on_) pi_c = augment_with_integrator(pi_c, z_, gains_.KI);
  return pi_c;
}

PortValue LhsController::command(const Vector& x) const {
  const Vector zero = Vector::Zero(model_.dim_state);
  return command(x, zero, zero);
}

void LhsController::advance(const Vector& x, const Vector& x_d, double dt) {
  if (adaptive_) adaptive_->theta_hat = adapt_params(*adaptive_, x, x_d, gains_.P, dt);
  if (integrator_on_) z_.z += x * dt;
}

void LhsController::advance(const Vector& x, double dt) {
  advance(x, Vector::Zero(model_.dim_state), dt);
}

void LhsController::reset() {
  z_.z.setZero();
  if (adaptive_) adaptive_->theta_hat = theta_hat0_;
}

}  // namespace dacph::lhs
