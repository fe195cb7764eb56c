#pragma once

#include <Eigen/Dense>
#include <functional>

namespace dacph::ph {

using VectorField = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// One classical 4th-order Runge-Kutta step of xdot = field(x).
// Throws NumericError when any stage evaluation is non-finite and
// std::invalid_argument when dt <= 0.
Eigen::VectorXd rk4_step(const VectorField& field, const Eigen::VectorXd& x, double dt);

// `substeps` RK4 steps of size dt / substeps.
Eigen::VectorXd rk4_advance(const VectorField& field, const Eigen::VectorXd& x, double dt,
                            int substeps);

}  // namespace dacph::ph
