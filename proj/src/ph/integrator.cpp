#include "dacph/ph/integrator.hpp"

#include <stdexcept>
#include <string>

#include "dacph/ph/errors.hpp"

namespace dacph::ph {

namespace {

Eigen::VectorXd stage(const VectorField& field, const Eigen::VectorXd& x, int index) {
  Eigen::VectorXd k = field(x);
  if (k.size() != x.size()) {
    throw DimensionError("vector field returned length " + std::to_string(k.size()) +
                         " for state of length " + std::to_string(x.size()));
  }
  if (!k.allFinite()) {
    throw NumericError("rk4_step", "non-finite field at stage " + std::to_string(index));
  }
  return k;
}

}  // namespace

Eigen::VectorXd rk4_step(const VectorField& field, const Eigen::VectorXd& x, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be positive");
  if (!x.allFinite()) throw NumericError("rk4_step", "non-finite state");
  const Eigen::VectorXd k1 = stage(field, x, 1);
  const Eigen::VectorXd k2 = stage(field, x + 0.5 * dt * k1, 2);
  const Eigen::VectorXd k3 = stage(field, x + 0.5 * dt * k2, 3);
  const Eigen::VectorXd k4 = stage(field, x + dt * k3, 4);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Eigen::VectorXd rk4_advance(const VectorField& field, const Eigen::VectorXd& x, double dt,
                            int substeps) {
  if (substeps < 1) throw std::invalid_argument("rk4_advance: substeps must be >= 1");
  const double h = dt / substeps;
  Eigen::VectorXd state = x;
  for (int i = 0; i < substeps; ++i) state = rk4_step(field, state, h);
  return state;
}

}  // namespace dacph::ph
