#include "dacph/ph/ph_model.hpp"

#include <Eigen/Eigenvalues>
#include <string>

#include "dacph/ph/errors.hpp"

namespace dacph::ph {

namespace {

void check_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw DimensionError(std::string(what) + " has shape " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  }
}

void check_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw NumericError(what, "non-finite value");
}

struct Evaluated {
  Matrix J, R, g;
  Vector grad;
};

Evaluated evaluate(const PhModel& model, const PhState& x, const PhParams& theta,
                   bool need_J, bool need_R, bool need_g) {
  validate_state(model, x);
  if (!theta.theta.allFinite()) throw NumericError("theta", "non-finite parameter");
  Evaluated e;
  const auto n = model.dim_state;
  e.grad = model.grad_H(x.x, theta.theta);
  check_shape(e.grad, n, 1, "gradH");
  check_finite(e.grad, "gradH");
  if (need_J) {
    e.J = model.J(x.x, theta.theta);
    check_shape(e.J, n, n, "J");
    check_finite(e.J, "J");
  }
  if (need_R) {
    e.R = model.R(x.x, theta.theta);
    check_shape(e.R, n, n, "R");
    check_finite(e.R, "R");
  }
  if (need_g) {
    e.g = model.g(x.x, theta.theta);
    check_shape(e.g, n, model.dim_input, "g");
    check_finite(e.g, "g");
  }
  return e;
}

}  // namespace

void validate_state(const PhModel& model, const PhState& x) {
  if (x.x.size() != model.dim_state) {
    throw DimensionError("state has length " + std::to_string(x.x.size()) + ", model " +
                         model.name + " expects " + std::to_string(model.dim_state));
  }
  if (!x.x.allFinite()) throw NumericError("state", "non-finite entry");
}

void validate_input(const PhModel& model, const ControlInput& u) {
  if (u.u.size() != model.dim_input) {
    throw DimensionError("input has length " + std::to_string(u.u.size()) + ", model " +
                         model.name + " expects " + std::to_string(model.dim_input));
  }
  if (!u.u.allFinite()) throw NumericError("input", "non-finite entry");
}

void validate_port(const PhModel& model, const PortValue& pi) {
  if (pi.pi.size() != model.dim_state) {
    throw DimensionError("port has length " + std::to_string(pi.pi.size()) + ", model " +
                         model.name + " expects " + std::to_string(model.dim_state));
  }
  if (!pi.pi.allFinite()) throw NumericError("port", "non-finite entry");
}

Vector eval_full_dynamics(const PhModel& model, const PhState& x, const PhParams& theta,
                          const ControlInput& u) {
  validate_input(model, u);
  const auto e = evaluate(model, x, theta, true, true, true);
  Vector xdot = (e.J - e.R) * e.grad + e.g * u.u;
  check_finite(xdot, "eval_full_dynamics");
  return xdot;
}

Vector intrinsic_flow(const PhModel& model, const PhState& x, const PhParams& theta,
                      const PortValue& pi) {
  validate_port(model, pi);
  const auto e = evaluate(model, x, theta, true, false, false);
  Vector xdot = e.J * e.grad + pi.pi;
  check_finite(xdot, "intrinsic_flow");
  return xdot;
}

PortValue port_map(const PhModel& model, const PhState& x, const PhParams& theta,
                   const ControlInput& u) {
  validate_input(model, u);
  const auto e = evaluate(model, x, theta, false, true, true);
  PortValue out{-e.R * e.grad + e.g * u.u};
  check_finite(out.pi, "port_map");
  return out;
}

Vector power_output(const PhModel& model, const PhState& x, const PhParams& theta) {
  const auto e = evaluate(model, x, theta, false, false, true);
  return e.g.transpose() * e.grad;
}

double energy_rate(const PhModel& model, const PhState& x, const PhParams& theta,
                   const ControlInput& u) {
  validate_input(model, u);
  const auto e = evaluate(model, x, theta, false, true, true);
  const Vector y = e.g.transpose() * e.grad;
  const double dissipated = e.grad.dot(e.R * e.grad);
  return -dissipated + y.dot(u.u);
}

bool is_skew(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  return ((m + m.transpose()).cwiseAbs().maxCoeff()) <= tol;
}

bool is_symmetric_psd(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > tol) return false;
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -tol;
}

}  // namespace dacph::ph
