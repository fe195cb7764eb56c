#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "dacph/pendulum/pendulum.hpp"
#include "dacph/ph/errors.hpp"
#include "dacph/ph/integrator.hpp"
#include "dacph/ph/ph_model.hpp"

using namespace dacph;
using ph::Matrix;
using ph::Vector;

namespace {

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

ph::ControlInput torque(double t) { return ph::ControlInput{Vector::Constant(1, t)}; }

ph::PhParams table1() { return pendulum::pendulum_theta(pendulum::PendulumParams{}); }

}  // namespace

TEST_CASE("pendulum dynamics at hand-evaluated points") {
  const auto model = pendulum::make_pendulum();
  const auto theta = table1();

  const Vector a = ph::eval_full_dynamics(model, {vec2(0.0, 1.0)}, theta, torque(0.0));
  CHECK(a(0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(a(1) == doctest::Approx(-0.1).epsilon(1e-15));

  // x1' = x2 / (m l^2), x2' = m g l sin x1 - c x2 / (m l^2) + tau
  const double x1 = std::numbers::pi / 6.0, x2 = 0.5, tau = 0.2;
  const Vector b = ph::eval_full_dynamics(model, {vec2(x1, x2)}, theta, torque(tau));
  CHECK(b(0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(b(1) == doctest::Approx(9.81 * 0.5 - 0.1 * 0.5 + 0.2).epsilon(1e-14));
}

TEST_CASE("port decomposition reassembles the full dynamics") {
  const auto model = pendulum::make_pendulum();
  const auto theta = table1();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 50; ++i) {
    const ph::PhState s{vec2(u(rng), u(rng))};
    const auto in = torque(u(rng));
    const auto pi = ph::port_map(model, s, theta, in);
    CHECK(pi.pi(0) == 0.0);
    const Vector lhs = ph::intrinsic_flow(model, s, theta, pi);
    const Vector full = ph::eval_full_dynamics(model, s, theta, in);
    CHECK((lhs - full).norm() < 1e-12);
  }

  const auto pi = ph::port_map(model, {vec2(0.0, 1.0)}, theta, torque(0.5));
  CHECK(pi.pi(1) == doctest::Approx(0.4));

  const Vector flow = ph::intrinsic_flow(model, {vec2(0.0, 1.0)}, theta, {Vector::Zero(2)});
  CHECK(flow(0) == doctest::Approx(1.0));
  CHECK(flow(1) == 0.0);

  // Upright equilibrium: gradH = 0 at the origin.
  const Vector rest = ph::intrinsic_flow(model, {Vector::Zero(2)}, theta, {Vector::Zero(2)});
  CHECK(rest.norm() == 0.0);
}

TEST_CASE("undamped pendulum with no input is purely conservative") {
  auto p = pendulum::PendulumParams{};
  p.damping = 0.0;
  const auto theta = pendulum::pendulum_theta(p);
  const auto model = pendulum::make_pendulum();
  const ph::PhState s{vec2(0.3, -0.7)};
  const auto pi = ph::port_map(model, s, theta, torque(0.0));
  CHECK(pi.pi.norm() == 0.0);
  CHECK((ph::eval_full_dynamics(model, s, theta, torque(0.0)) -
         ph::intrinsic_flow(model, s, theta, {Vector::Zero(2)}))
            .norm() == 0.0);
}

TEST_CASE("structure matrices are skew and positive semidefinite") {
  const auto model = pendulum::make_pendulum();
  const auto theta = table1();
  const Vector x = vec2(0.4, 1.2);
  CHECK(ph::is_skew(model.J(x, theta.theta)));
  CHECK(ph::is_symmetric_psd(model.R(x, theta.theta)));
  Matrix bad(2, 2);
  bad << 0.0, 1.0, 1.0, 0.0;
  CHECK_FALSE(ph::is_skew(bad));
  CHECK_FALSE(ph::is_symmetric_psd(-Matrix::Identity(2, 2)));
}

TEST_CASE("Hamiltonian values and gradient") {
  const auto model = pendulum::make_pendulum();
  const auto theta = table1();
  CHECK(model.H(Vector::Zero(2), theta.theta) == doctest::Approx(9.81));
  const Vector g = model.grad_H(vec2(std::numbers::pi / 2.0, 0.0), theta.theta);
  CHECK(g(0) == doctest::Approx(-9.81));
  CHECK(std::abs(g(1)) < 1e-15);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const double h = 1e-6;
  for (int i = 0; i < 100; ++i) {
    const Vector x = vec2(u(rng), u(rng));
    const Vector analytic = model.grad_H(x, theta.theta);
    for (int k = 0; k < 2; ++k) {
      Vector up = x, down = x;
      up(k) += h;
      down(k) -= h;
      const double fd = (model.H(up, theta.theta) - model.H(down, theta.theta)) / (2.0 * h);
      const double denom = std::max(1.0, std::abs(fd));
      CHECK(std::abs(analytic(k) - fd) / denom < 1e-6);
    }
  }
}

TEST_CASE("energy rate") {
  const auto model = pendulum::make_pendulum();
  const auto theta = table1();
  CHECK(ph::energy_rate(model, {vec2(0.0, 1.0)}, theta, torque(0.0)) == doctest::Approx(-0.1));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 50; ++i) {
    const ph::PhState s{vec2(u(rng), u(rng))};
    CHECK(ph::energy_rate(model, s, theta, torque(0.0)) <= 0.0);
    const auto in = torque(u(rng));
    const Vector y = ph::power_output(model, s, theta);
    CHECK(ph::energy_rate(model, s, theta, in) <= y.dot(in.u) + 1e-12);
  }
}

TEST_CASE("energy rate matches a finite difference of H along a trajectory") {
  const auto model = pendulum::make_pendulum();
  const auto theta = table1();
  const auto in = torque(0.3);
  auto field = [&](const Vector& s) { return ph::eval_full_dynamics(model, {s}, theta, in); };
  const double dt = 1e-3;
  Vector x = vec2(0.5, -0.2);
  for (int k = 0; k < 500; ++k) {
    const Vector next = ph::rk4_step(field, x, dt);
    const double fd = (model.H(next, theta.theta) - model.H(x, theta.theta)) / dt;
    const double mid = 0.5 * (ph::energy_rate(model, {x}, theta, in) +
                              ph::energy_rate(model, {next}, theta, in));
    CHECK(std::abs(fd - mid) < 1e-4);
    x = next;
  }
}

TEST_CASE("RK4 against the exponential") {
  ph::VectorField decay = [](const Vector& x) -> Vector { return -x; };
  const Vector one = Vector::Constant(1, 1.0);
  CHECK(ph::rk4_step(decay, one, 0.1)(0) == doctest::Approx(std::exp(-0.1)).epsilon(1e-7));

  ph::VectorField still = [](const Vector& x) -> Vector { return Vector::Zero(x.size()); };
  const Vector x = vec2(1.5, -2.0);
  CHECK(ph::rk4_step(still, x, 0.3) == x);

  auto global_error = [&](int n) {
    Vector s = one;
    for (int k = 0; k < n; ++k) s = ph::rk4_step(decay, s, 1.0 / n);
    return std::abs(s(0) - std::exp(-1.0));
  };
  const double ratio = global_error(10) / global_error(20);
  CHECK(ratio > 14.0);
  CHECK(ratio < 18.0);

  CHECK_THROWS_AS(ph::rk4_step(decay, one, 0.0), std::invalid_argument);
  ph::VectorField blow = [](const Vector& x) -> Vector {
    return Vector::Constant(x.size(), std::numeric_limits<double>::quiet_NaN());
  };
  CHECK_THROWS_AS(ph::rk4_step(blow, one, 0.1), NumericError);
}

TEST_CASE("shape validation") {
  const auto model = pendulum::make_pendulum();
  CHECK_THROWS_AS(ph::validate_state(model, {Vector::Zero(3)}), DimensionError);
  CHECK_THROWS_AS(ph::validate_input(model, {Vector::Zero(2)}), DimensionError);
  CHECK_THROWS_AS(ph::validate_port(model, {Vector::Zero(1)}), DimensionError);
  Vector bad = Vector::Zero(2);
  bad(1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(ph::validate_state(model, {bad}), NumericError);
}
