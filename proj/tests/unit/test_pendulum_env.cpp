#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "dacph/pendulum/pendulum.hpp"

using namespace dacph;
using pendulum::Matrix;
using pendulum::Vector;

namespace {

constexpr double kQ = std::numbers::pi / 4.0;

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

pendulum::PendulumEnv make_env(pendulum::PendulumParams p = {}, int horizon = 200) {
  pendulum::EnvConfig cfg;
  cfg.params = p;
  cfg.horizon_steps = horizon;
  lhs::LhsController ctl(pendulum::make_pendulum(), pendulum::pendulum_theta(p),
                         pendulum::structured_gains(p, -0.5, -1.5));
  return pendulum::PendulumEnv(cfg, ctl);
}

double energy(const Vector& x, const pendulum::PendulumParams& p) {
  return x(1) * x(1) / (2.0 * p.inertia()) + p.mgl() * std::cos(x(0));
}

}  // namespace

TEST_CASE("reward by direct substitution") {
  const pendulum::RewardWeights w;
  CHECK(pendulum::reward(vec2(0.0, 0.0), 0.0, w) == 0.0);
  CHECK(pendulum::reward(vec2(0.1, 0.0), 0.0, w) == doctest::Approx(-0.01));
  const double x1 = kQ + 0.1;
  CHECK(pendulum::reward(vec2(x1, 0.0), 0.0, w) == doctest::Approx(-(x1 * x1) - 0.01));
  CHECK(pendulum::reward(vec2(-x1, 0.0), 0.0, w) == doctest::Approx(-(x1 * x1) - 0.01));
  CHECK(pendulum::reward(vec2(0.2, -1.0), 2.0, w) == doctest::Approx(-0.04 - 0.1 - 0.4));
  CHECK(pendulum::angle_penalty(0.5, kQ) == 0.0);
}

TEST_CASE("reset distribution") {
  auto env = make_env();
  std::mt19937_64 a(17), b(17);
  CHECK(env.reset(a) == env.reset(b));

  std::mt19937_64 rng(18);
  double sum = 0.0, lo = 1.0, hi = -1.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    env.reset(rng);
    const double x1 = env.state()(0);
    CHECK(env.state()(1) == 0.0);
    sum += x1;
    lo = std::min(lo, x1);
    hi = std::max(hi, x1);
  }
  CHECK(lo >= -kQ);
  CHECK(hi <= kQ);
  CHECK(std::abs(sum / n) < 0.02);
}

TEST_CASE("observation carries the commanded port") {
  const pendulum::PendulumParams p;
  auto env = make_env(p);
  std::mt19937_64 rng(19);
  const Vector obs = env.reset(rng);
  const Vector x = env.state();
  const Vector zero = Vector::Zero(2);
  const Vector pi = lhs::control_port_case1(pendulum::make_pendulum(), pendulum::pendulum_theta(p), x,
                                            zero, zero, pendulum::structured_gains(p, -0.5, -1.5))
                        .pi;
  CHECK(obs(2) * 10.0 == doctest::Approx(pi(1)));
  CHECK(obs(0) * kQ == doctest::Approx(x(0)));
}

TEST_CASE("oracle torque realises the commanded port") {
  const pendulum::PendulumParams p;
  const auto model = pendulum::make_pendulum();
  const auto theta = pendulum::pendulum_theta(p);
  CHECK(pendulum::oracle_torque(vec2(0.3, 0.0), vec2(0.0, -2.0), p) == -2.0);
  std::mt19937_64 rng(20);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 50; ++i) {
    const Vector x = vec2(u(rng), u(rng));
    const Vector pi_c = vec2(0.0, u(rng) * 5.0);
    const double tau = pendulum::oracle_torque(x, pi_c, p);
    const Vector pi = ph::port_map(model, {x}, theta, {Vector::Constant(1, tau)}).pi;
    CHECK(std::abs(pi(1) - pi_c(1)) < 1e-12);
  }
}

TEST_CASE("equilibrium holds under the oracle") {
  const pendulum::PendulumParams p;
  auto env = make_env(p, 50);
  env.reset_to(Vector::Zero(2));
  const double tau = pendulum::oracle_torque(env.state(), env.port_command().pi, p);
  while (!env.done()) env.step(tau);
  CHECK(env.state().norm() == 0.0);
}

TEST_CASE("free pendulum conserves energy, damped one dissipates") {
  pendulum::PendulumParams p;
  p.damping = 0.0;
  auto env = make_env(p);
  env.reset_to(vec2(kQ, 0.0));
  const double h0 = energy(env.state(), p);
  double drift = 0.0;
  while (!env.done()) {
    env.step(0.0);
    drift = std::max(drift, std::abs(energy(env.state(), p) - h0));
  }
  CHECK(drift < 1e-6);

  p.damping = 0.1;
  auto damped = make_env(p);
  damped.reset_to(vec2(kQ, 0.0));
  double prev = energy(damped.state(), p);
  while (!damped.done()) {
    damped.step(0.0);
    const double h = energy(damped.state(), p);
    CHECK(h < prev);
    prev = h;
  }
}

TEST_CASE("log rows pair x_k with the reward of x_k+1") {
  const pendulum::PendulumParams p;
  auto env = make_env(p, 3);
  env.reset_to(vec2(0.2, 0.0));
  const Vector x0 = env.state();
  const auto r = env.step(1.5);
  const auto& row = env.log().rows.front();
  CHECK(row.x == x0);
  CHECK(row.tau == 1.5);
  CHECK(row.t == 0.0);
  CHECK(row.H == doctest::Approx(energy(x0, p)));
  CHECK(row.reward == doctest::Approx(pendulum::reward(env.state(), 1.5, pendulum::RewardWeights{})));
  CHECK(r.reward == row.reward);
  CHECK(env.log().final_x == env.state());
  CHECK(env.predict(x0, 1.5) == env.state());
}

TEST_CASE("fast rotation keeps the angle wrapped") {
  pendulum::PendulumParams p;
  p.damping = 0.0;
  auto env = make_env(p, 200);
  env.reset_to(vec2(0.0, 10.0));
  const double h0 = energy(env.state(), p);
  bool wrapped = false;
  double prev = env.state()(0);
  while (!env.done()) {
    env.step(0.0);
    const double x1 = env.state()(0);
    CHECK(x1 > -std::numbers::pi - 1e-12);
    CHECK(x1 <= std::numbers::pi + 1e-12);
    wrapped = wrapped || x1 < prev - std::numbers::pi;
    prev = x1;
    CHECK(std::abs(energy(env.state(), p) - h0) < 1e-4);
  }
  CHECK(wrapped);
}

TEST_CASE("non-finite torque aborts the episode") {
  auto env = make_env();
  env.reset_to(vec2(0.1, 0.0));
  env.step(0.5);
  const auto r = env.step(std::numeric_limits<double>::quiet_NaN());
  CHECK(r.aborted);
  CHECK(env.done());
  CHECK(env.log().aborted);
  CHECK(env.log().rows.size() == 1);
  CHECK(env.state().allFinite());
  CHECK_THROWS(env.step(0.0));
}
