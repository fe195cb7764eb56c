#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "dacph/pendulum/pendulum.hpp"
#include "dacph/ph/errors.hpp"
#include "dacph/safety/shield.hpp"
#include "shield_oracle.hpp"

using namespace dacph;
using safety::Vector;
using namespace dacph::testing;

TEST_CASE("discrete CBF residual") {
  safety::Barrier angle{"angle", safety::BarrierDomain::State,
                        [](const Vector& x) { return kQ * kQ - x(0) * x(0); }};
  const safety::SafetySignal s0{vec2(0.2, 0.0), Vector::Zero(2)};
  const double h0 = kQ * kQ - 0.04;
  CHECK(safety::cbf_residual(angle, s0, s0, 0.5) == doctest::Approx(0.5 * h0));
  CHECK(safety::cbf_residual(angle, s0, s0, 0.5) >= 0.0);

  const safety::SafetySignal origin{vec2(0.0, 0.0), Vector::Zero(2)};
  const safety::SafetySignal edge{vec2(kQ, 0.0), Vector::Zero(2)};
  // h(edge) = 0, h(origin) = q^2: residual = 0 - (1 - gamma) q^2.
  for (double gamma : {0.1, 0.5, 0.9}) {
    const double r = safety::cbf_residual(angle, origin, edge, gamma);
    CHECK(r == doctest::Approx(-(1.0 - gamma) * kQ * kQ));
    CHECK(r < 0.0);
  }
}

TEST_CASE("angle barriers by direct substitution") {
  const auto bars = pendulum::angle_barriers(pendulum::PendulumParams{}, kQ, 12.0, 0.5);
  REQUIRE(bars.size() == 3);
  const Vector x = vec2(0.3, 0.8);
  const double a = 0.5 * (12.0 - 9.81 * std::sin(kQ));
  const safety::SafetySignal s{x, Vector::Zero(2)};
  CHECK(bars[0](s) == doctest::Approx(kQ * kQ - 0.09));
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = 1; i < bars.size(); ++i) {
    lo = std::min(lo, bars[i](s));
    hi = std::max(hi, bars[i](s));
  }
  CHECK(lo == doctest::Approx(kQ - 0.3 - 0.64 / (2.0 * a)));
  // Momentum away from an edge does not tighten that edge's barrier.
  CHECK(hi == doctest::Approx(kQ + 0.3));

  const safety::SafetySignal back{vec2(0.3, -0.8), Vector::Zero(2)};
  CHECK(std::min(bars[1](back), bars[2](back)) == doctest::Approx(kQ - 0.3));
  CHECK(std::max(bars[1](back), bars[2](back)) == doctest::Approx(kQ + 0.3 - 0.64 / (2.0 * a)));
}

TEST_CASE("shield box projection and pass-through") {
  safety::SafetySpec spec;
  spec.box_lo = Vector::Constant(1, -1.0);
  spec.box_hi = Vector::Constant(1, 1.0);
  const safety::SafetySignal s{vec2(0.0, 0.0), Vector::Zero(2)};
  auto pred = [&](const Vector&) { return s; };

  const auto clipped = safety::shield_qp({Vector::Constant(1, 1.5)}, Vector::Constant(1, 0.5), s, pred, spec);
  CHECK(clipped.u_applied.u(0) == doctest::Approx(1.0));
  CHECK(clipped.feasible);

  auto wide = pendulum_spec();
  const Vector x = vec2(0.1, 0.0);
  const auto free = safety::shield_qp({Vector::Constant(1, 0.3)}, Vector::Constant(1, 0.2),
                                      {x, Vector::Zero(2)}, predictor_at(x), wide);
  CHECK(free.u_applied.u(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_FALSE(free.active);
}

TEST_CASE("shield matches a brute-force grid oracle near the boundary") {
  const auto cases = grid_scenarios(2024, 100);
  int shielded = 0;
  double worst = 0.0;
  for (const auto& c : cases) {
    worst = std::max(worst, c.error());
    CHECK_MESSAGE(c.error() < 2e-3, "x=(" << c.x(0) << ", " << c.x(1) << ") u_nom=" << c.u_nom
                                          << " shield=" << c.shield << " oracle=" << c.oracle);
    if (c.active) ++shielded;
  }
  MESSAGE("worst deviation from grid oracle " << worst << ", shield active in " << shielded << "/100");
  CHECK(shielded > 20);
}

TEST_CASE("shielded pendulum stays inside the angle limit") {
  const auto spec = pendulum_spec();
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> angle(-kQ, kQ);
  std::uniform_real_distribution<double> torque(-12.0, 12.0);
  double worst_abs = 0.0;
  double worst_res = std::numeric_limits<double>::infinity();
  for (int run = 0; run < 10; ++run) {
    Vector x = vec2(angle(rng), 0.0);
    for (int k = 0; k < 200; ++k) {
      // Adversarial nominal input: random torque, biased outward.
      const double u_nom = torque(rng) + (x(0) >= 0.0 ? 6.0 : -6.0);
      const auto r = safety::shield_qp({Vector::Constant(1, u_nom)}, Vector::Zero(1),
                                       {x, Vector::Zero(2)}, predictor_at(x), spec);
      CHECK(r.u_applied.u(0) >= -12.0);
      CHECK(r.u_applied.u(0) <= 12.0);
      for (double v : r.cbf_residuals) worst_res = std::min(worst_res, v);
      x = true_step(x, r.u_applied.u(0));
      worst_abs = std::max(worst_abs, std::abs(x(0)));
    }
  }
  CHECK(worst_abs <= kQ + 0.01);
  CHECK(worst_res >= -1e-9);
}

TEST_CASE("soft penalty") {
  safety::Barrier b{"b", safety::BarrierDomain::State, [](const Vector& x) { return x(0); }, 0.05};
  CHECK(safety::soft_penalty(b, {vec2(0.05, 0.0), Vector::Zero(2)}, 1.0) == 0.0);
  CHECK(safety::soft_penalty(b, {vec2(0.0, 0.0), Vector::Zero(2)}, 1.0) == doctest::Approx(-0.05));
  CHECK(safety::soft_penalty(b, {vec2(1.0, 0.0), Vector::Zero(2)}, 1.0) == 0.0);
  CHECK(safety::soft_penalty(b, {vec2(-0.1, 0.0), Vector::Zero(2)}, 2.0) == doctest::Approx(-0.3));
}

TEST_CASE("spec validation") {
  auto spec = pendulum_spec();
  CHECK_NOTHROW(spec.validate());
  spec.gamma = 1.5;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = pendulum_spec();
  spec.box_lo = Vector::Constant(1, 13.0);
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}
