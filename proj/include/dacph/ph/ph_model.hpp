#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>

namespace dacph::ph {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// State x of a port-Hamiltonian system.
struct PhState {
  Vector x;
};

// Physical parameter vector theta. Its layout is model specific.
struct PhParams {
  Vector theta;
};

// Virtual port value Pi. Lives in state space (length n).
struct PortValue {
  Vector pi;
};

// Physical input u (length m).
struct ControlInput {
  Vector u;
};

// Input-state-output port-Hamiltonian model
//
//   xdot = [J(x,theta) - R(x,theta)] gradH(x,theta) + g(x,theta) u
//
// Every structure function is pure; a model can be shared between threads.
struct PhModel {
  using MatrixFn = std::function<Matrix(const Vector& x, const Vector& theta)>;
  using ScalarFn = std::function<double(const Vector& x, const Vector& theta)>;
  using VectorFn = std::function<Vector(const Vector& x, const Vector& theta)>;

  std::string name;
  int dim_state = 0;
  int dim_input = 0;

  MatrixFn J;
  MatrixFn R;
  MatrixFn g;
  ScalarFn H;
  VectorFn grad_H;
};

// Throws DimensionError / NumericError when (x, theta, u) do not fit the model.
void validate_state(const PhModel& model, const PhState& x);
void validate_input(const PhModel& model, const ControlInput& u);
void validate_port(const PhModel& model, const PortValue& pi);

// [J - R] gradH + g u
Vector eval_full_dynamics(const PhModel& model, const PhState& x, const PhParams& theta,
                          const ControlInput& u);

// Conservative (left-hand side) flow driven by the virtual port: J gradH + Pi.
Vector intrinsic_flow(const PhModel& model, const PhState& x, const PhParams& theta,
                      const PortValue& pi);

// Dissipative/input (right-hand side) map: Pi = -R gradH + g u.
PortValue port_map(const PhModel& model, const PhState& x, const PhParams& theta,
                   const ControlInput& u);

// Power balance Hdot = -gradH^T R gradH + y^T u with the collocated output
// y = g^T gradH. Never exceeds y^T u when R is positive semidefinite.
double energy_rate(const PhModel& model, const PhState& x, const PhParams& theta,
                   const ControlInput& u);

// Collocated output y = g^T gradH.
Vector power_output(const PhModel& model, const PhState& x, const PhParams& theta);

// Structural checks used by tests and the check-invariants command.
bool is_skew(const Matrix& m, double tol = 1e-12);
bool is_symmetric_psd(const Matrix& m, double tol = 1e-12);

}  // namespace dacph::ph
