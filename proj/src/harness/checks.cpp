#include "dacph/harness/checks.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "dacph/excitation/excitation.hpp"
#include "dacph/harness/experiment.hpp"

namespace dacph::harness {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

// Oracle, soft mode, no integrator or adaptation: the ideal LHS closed loop.
RunConfig ideal(const RunConfig& cfg) {
  RunConfig c = cfg;
  c.lhs.integrator = false;
  c.lhs.adaptive = false;
  c.safety.mode = ConstraintMode::Soft;
  c.pe.enabled = false;
  return c;
}

CheckResult port_attainability(const RunConfig& cfg) {
  const auto ev = evaluate(ideal(cfg), PolicyKind::Oracle, nullptr, cfg.episode.eval_runs,
                           cfg.episode.horizon_steps);
  double worst_pi1 = 0.0;
  double worst_epi2 = 0.0;
  for (const auto& ep : ev.episodes) {
    for (const auto& r : ep.log.rows) {
      worst_pi1 = std::max(worst_pi1, std::abs(r.pi(0)));
      worst_epi2 = std::max(worst_epi2, std::abs(r.pi(1) - r.pi_c(1)));
    }
  }
  return {"port-attainability", worst_pi1 == 0.0 && worst_epi2 < 1e-12,
          "max|Pi1|=" + fmt(worst_pi1) + " max|Pi2-Pic2|=" + fmt(worst_epi2)};
}

double max_drift(const RunConfig& cfg, double dt) {
  RunConfig c = cfg;
  c.physics.damping = 0.0;
  c.physics.dt = dt;
  const int steps = static_cast<int>(std::lround(10.0 / dt));
  Vector x0(2);
  x0 << cfg.reward.q_max, 0.0;
  const auto res = simulate_episode(c, PolicyKind::Zero, nullptr, steps, 0, x0);
  const auto model = pendulum::make_pendulum();
  const auto theta = pendulum::pendulum_theta(c.physics);
  const double h0 = model.H(x0, theta.theta);
  double drift = std::abs(model.H(res.log.final_x, theta.theta) - h0);
  for (const auto& r : res.log.rows) drift = std::max(drift, std::abs(r.H - h0));
  return drift;
}

CheckResult energy_conservation(const RunConfig& cfg) {
  const double d1 = max_drift(cfg, cfg.physics.dt);
  const double d2 = max_drift(cfg, cfg.physics.dt / 2.0);
  // Fourth-order integration: halving dt divides the drift by about 2^4.
  const double order = d2 > 0.0 ? std::log2(d1 / d2) : std::numeric_limits<double>::infinity();
  return {"energy-conservation", d1 < 1e-6 && std::abs(order - 4.0) <= 0.5,
          "drift=" + fmt(d1) + " observed order=" + fmt(order)};
}

CheckResult passivity(const RunConfig& cfg) {
  RunConfig c = cfg;
  if (c.physics.damping == 0.0) c.physics.damping = 0.1;
  Vector x0(2);
  x0 << cfg.reward.q_max, 0.0;
  const auto res = simulate_episode(c, PolicyKind::Zero, nullptr, c.episode.horizon_steps, 0, x0);
  const auto model = pendulum::make_pendulum();
  const auto theta = pendulum::pendulum_theta(c.physics);
  std::vector<double> H;
  for (const auto& r : res.log.rows) H.push_back(r.H);
  H.push_back(model.H(res.log.final_x, theta.theta));
  double worst_rise = 0.0;
  for (std::size_t k = 1; k < H.size(); ++k) worst_rise = std::max(worst_rise, H[k] - H[k - 1]);
  return {"passivity", worst_rise <= 0.0, "largest stepwise increase of H=" + fmt(worst_rise)};
}

CheckResult ideal_closed_loop(const RunConfig& cfg) {
  const auto c = ideal(cfg);
  const Matrix Ks = make_gains(c).Ks;
  const auto ev = evaluate(c, PolicyKind::Oracle, nullptr, cfg.episode.eval_runs,
                           cfg.episode.horizon_steps);
  double dev = 0.0;
  double worst_final = 0.0;
  for (const auto& ep : ev.episodes) {
    const Vector x0 = ep.log.rows.front().x;
    for (const auto& r : ep.log.rows) {
      const Vector ref = (Ks * r.t).exp() * x0;
      dev = std::max(dev, (r.x - ref).cwiseAbs().maxCoeff());
    }
    worst_final = std::max(worst_final, ep.log.final_x.norm());
  }
  return {"ideal-closed-loop", dev < 1e-4,
          "sup|x - expm(Ks t) x0|=" + fmt(dev) + " worst final |x|=" + fmt(worst_final)};
}

CheckResult lyapunov_decrease(const RunConfig& cfg) {
  const auto c = ideal(cfg);
  const Matrix P = make_gains(c).P;
  const auto ev = evaluate(c, PolicyKind::Oracle, nullptr, cfg.episode.eval_runs,
                           cfg.episode.horizon_steps);
  bool ok = true;
  for (const auto& ep : ev.episodes) {
    const auto v = vdac_monitor(ep.log, P);
    for (std::size_t k = 1; k < v.V1.size(); ++k) ok = ok && v.V1[k] < v.V1[k - 1];
  }
  return {"lyapunov-decrease", ok, ok ? "V1 strictly decreasing on every run" : "V1 increased"};
}

CheckResult shield_invariance(const RunConfig& cfg) {
  RunConfig c = ideal(cfg);
  c.safety.mode = ConstraintMode::Hard;
  const auto spec = make_safety_spec(c);
  double worst = 0.0;
  int infeasible = 0;
  bool in_box = true;
  // Zero torque lets gravity pull the pendulum out of the set.
  const auto ev = evaluate(c, PolicyKind::Zero, nullptr, cfg.episode.eval_runs,
                           cfg.episode.horizon_steps);
  for (const auto& ep : ev.episodes) {
    worst = std::max(worst, ep.max_abs_x1);
    infeasible += ep.shield_infeasible_steps;
    for (const auto& r : ep.log.rows) {
      in_box = in_box && r.tau >= spec.box_lo(0) && r.tau <= spec.box_hi(0);
    }
  }
  return {"shield-invariance", in_box && worst <= c.reward.q_max + 0.01,
          "max|x1|=" + fmt(worst) + " infeasible steps=" + std::to_string(infeasible) +
              (in_box ? "" : " torque left the box")};
}

CheckResult pe_gram_metric() {
  const double dt = 0.01;
  std::vector<Matrix> samples;
  const int n = static_cast<int>(std::lround(2.0 * std::numbers::pi / dt));
  for (int k = 0; k <= n; ++k) {
    const double t = 2.0 * std::numbers::pi * k / n;
    Matrix phi(1, 2);
    phi << std::sin(t), std::cos(t);
    samples.push_back(phi);
  }
  const auto m = excitation::pe_gram(samples, 2.0 * std::numbers::pi / n);
  const double err = (m.gram - std::numbers::pi * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff();
  return {"pe-gram", err < 0.01 * std::numbers::pi, "max|G - pi I|=" + fmt(err)};
}

}  // namespace

std::vector<CheckResult> check_invariants(const RunConfig& cfg) {
  std::vector<CheckResult> out;
  try {
    const auto report = lhs::verify_hurwitz(make_gains(cfg).Ks);
    out.push_back({"gain-hurwitz", report.hurwitz, report.describe()});
  } catch (const lhs::GainDesignError& e) {
    out.push_back({"gain-hurwitz", false, e.what()});
    return out;
  }
  out.push_back(port_attainability(cfg));
  out.push_back(energy_conservation(cfg));
  out.push_back(passivity(cfg));
  out.push_back(ideal_closed_loop(cfg));
  out.push_back(lyapunov_decrease(cfg));
  out.push_back(shield_invariance(cfg));
  out.push_back(pe_gram_metric());
  return out;
}

}  // namespace dacph::harness
