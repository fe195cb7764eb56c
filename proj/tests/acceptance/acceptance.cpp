// Acceptance suite: one PASS/FAIL line per criterion.
//
// Reference values come from closed forms or brute force written here, not
// from the library under test. Criteria listed with --expect-fail are still
// evaluated and reported; the exit status is 0 only when the observed failure
// set equals the expected one (2 otherwise, 1 on a runtime error).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dacph/excitation/excitation.hpp"
#include "dacph/harness/config.hpp"
#include "dacph/harness/experiment.hpp"
#include "dacph/harness/io.hpp"
#include "dacph/lhs/gain_design.hpp"
#include "fd_gradient.hpp"
#include "shield_oracle.hpp"

namespace fs = std::filesystem;
using namespace dacph;
using namespace dacph::harness;
using dacph::testing::kQ;
using dacph::testing::vec2;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

// Roots of the characteristic polynomial of [[0, a], [k21, k2]]:
// s^2 - k2 s - a k21 = 0.
std::vector<double> structured_roots(double a, double k21, double k2) {
  const double disc = k2 * k2 + 4.0 * a * k21;
  const double r = std::sqrt(disc);
  return {(k2 - r) / 2.0, (k2 + r) / 2.0};
}

std::vector<double> sorted_real(const std::vector<std::complex<double>>& ev, double& max_imag) {
  std::vector<double> re;
  max_imag = 0.0;
  for (const auto& l : ev) {
    re.push_back(l.real());
    max_imag = std::max(max_imag, std::abs(l.imag()));
  }
  std::sort(re.begin(), re.end());
  return re;
}

Outcome eigenvalues(const RunConfig& cfg) {
  const double a = 1.0 / cfg.physics.inertia();
  double worst_oracle = 0.0, worst_table = 0.0, imag = 0.0;
  struct Case {
    double k21, k2;
    std::vector<double> table;
    double tol;
  };
  const std::vector<Case> cases{{-0.5, -1.5, {-1.0, -0.5}, 1e-9}, {-2.0, -5.0, {-4.5616, -0.4384}, 1e-3}};
  bool pass = true;
  for (const auto& c : cases) {
    const auto Ks = pendulum::structured_gains(cfg.physics, c.k21, c.k2).Ks;
    double im = 0.0;
    const auto got = sorted_real(lhs::verify_hurwitz(Ks).eigenvalues, im);
    const auto oracle = structured_roots(a, c.k21, c.k2);
    imag = std::max(imag, im);
    for (int i = 0; i < 2; ++i) {
      const double e_oracle = std::abs(got[i] - oracle[i]);
      const double e_table = std::abs(got[i] - c.table[i]);
      worst_oracle = std::max(worst_oracle, e_oracle);
      worst_table = std::max(worst_table, e_table);
      pass = pass && e_oracle < 1e-9 && e_table < c.tol;
    }
  }
  pass = pass && imag < 1e-12;
  return {pass, "max |lambda - quadratic root| " + fmt("%.1e", worst_oracle) +
                    ", max |lambda - tabulated| " + fmt("%.1e", worst_table)};
}

// exp(K t) for a 2x2 K with distinct real eigenvalues l1, l2 (Sylvester):
// (l2 e^{l1 t} - l1 e^{l2 t}) / (l2 - l1) I + (e^{l1 t} - e^{l2 t}) / (l1 - l2) K.
Matrix expm_2x2(const Matrix& K, double l1, double l2, double t) {
  const double e1 = std::exp(l1 * t), e2 = std::exp(l2 * t);
  return (l2 * e1 - l1 * e2) / (l2 - l1) * Matrix::Identity(2, 2) + (e1 - e2) / (l1 - l2) * K;
}

Outcome oracle_convergence(const RunConfig& base) {
  RunConfig cfg = base;
  cfg.lhs.integrator = false;
  cfg.lhs.adaptive = false;
  cfg.pe.enabled = false;
  cfg.safety.mode = ConstraintMode::Soft;
  Matrix K(2, 2);
  K << 0.0, 1.0 / cfg.physics.inertia(), cfg.lhs.k21, cfg.lhs.k2;
  const auto roots = structured_roots(1.0 / cfg.physics.inertia(), cfg.lhs.k21, cfg.lhs.k2);
  const int steps = static_cast<int>(std::lround(10.0 / cfg.physics.dt));
  const auto ev = evaluate(cfg, PolicyKind::Oracle, nullptr, 10, steps);
  int converged = 0;
  double worst_norm = 0.0, worst_dev = 0.0;
  for (const auto& e : ev.episodes) {
    const Vector x0 = e.log.rows.front().x;
    auto deviation = [&](const Vector& x, double t) {
      return (x - expm_2x2(K, roots[0], roots[1], t) * x0).cwiseAbs().maxCoeff();
    };
    for (const auto& r : e.log.rows) worst_dev = std::max(worst_dev, deviation(r.x, r.t));
    worst_dev = std::max(worst_dev, deviation(e.log.final_x, steps * cfg.physics.dt));
    const double n = e.log.final_x.norm();
    worst_norm = std::max(worst_norm, n);
    converged += n < 1e-2;
  }
  return {converged == 10 && worst_dev < 1e-4,
          std::to_string(converged) + "/10 runs with ||x(10 s)|| < 1e-2 (worst " +
              fmt("%.4f", worst_norm) + "), sup deviation from exp(Ks t) x0 " + fmt("%.1e", worst_dev)};
}

// Energy from the closed-form Hamiltonian, not the model object.
double energy(const Vector& x, const pendulum::PendulumParams& p) {
  return x(1) * x(1) / (2.0 * p.inertia()) + p.mgl() * std::cos(x(0));
}

double free_drift(const RunConfig& base, double dt) {
  RunConfig cfg = base;
  cfg.physics.damping = 0.0;
  cfg.physics.dt = dt;
  const int steps = static_cast<int>(std::lround(10.0 / dt));
  const Vector x0 = vec2(kQ, 0.0);
  const auto res = simulate_episode(cfg, PolicyKind::Zero, nullptr, steps, 0, x0);
  const double h0 = energy(x0, cfg.physics);
  double drift = std::abs(energy(res.log.final_x, cfg.physics) - h0);
  for (const auto& r : res.log.rows) drift = std::max(drift, std::abs(energy(r.x, cfg.physics) - h0));
  return drift;
}

Outcome energy_invariants(const RunConfig& base) {
  const double d1 = free_drift(base, 0.05);
  const double d2 = free_drift(base, 0.025);
  const double ratio = d1 / d2;
  const double order = std::log2(ratio);

  RunConfig damped = base;
  damped.physics.damping = base.physics.damping > 0.0 ? base.physics.damping : 0.1;
  const auto res = simulate_episode(damped, PolicyKind::Zero, nullptr, 200, 0, vec2(kQ, 0.0));
  std::vector<double> H;
  for (const auto& r : res.log.rows) H.push_back(energy(r.x, damped.physics));
  H.push_back(energy(res.log.final_x, damped.physics));
  int increases = 0;
  for (std::size_t k = 1; k < H.size(); ++k) increases += H[k] > H[k - 1];

  return {d1 < 1e-6 && std::abs(order - 4.0) <= 0.5 && increases == 0,
          "drift " + fmt("%.2e", d1) + " at dt=0.05, " + fmt("%.2e", d2) + " at dt=0.025 (ratio " +
              fmt("%.1f", ratio) + ", order " + fmt("%.2f", order) + "), damped H increases " +
              std::to_string(increases)};
}

struct Trained {
  std::vector<double> returns;
  std::vector<double> moving_average;
  fs::path checkpoint;
  double seconds = 0.0;
};

Outcome training(const RunConfig& cfg, const Trained& t) {
  const std::size_t ref = static_cast<std::size_t>(cfg.episode.ma_window) - 1;
  const auto& ma = t.moving_average;
  const bool improved = ma.size() >= 45 && ma.size() > ref + 1 && ma.back() > ma[ref];

  const auto agent = sac::SacAgent::load_file(t.checkpoint);
  RunConfig ev_cfg = cfg;
  ev_cfg.lhs.integrator = false;
  const int steps = static_cast<int>(std::lround(10.0 / cfg.physics.dt));
  const auto ev = evaluate(ev_cfg, PolicyKind::Agent, &agent, 10, steps);
  int ok = 0;
  for (const auto& r : ev.runs) ok += r.final_abs_x2 < 0.05 && r.final_abs_x1 <= 0.15 && !r.aborted;
  return {improved && ok >= 8,
          "MA(" + std::to_string(cfg.episode.ma_window) + ") " + fmt("%.1f", ma[ref]) + " at episode " +
              std::to_string(ref + 1) + " -> " + fmt("%.1f", ma.back()) + " at episode " +
              std::to_string(ma.size()) + "; " + std::to_string(ok) +
              "/10 runs with |x2(10 s)| < 0.05 and |x1| <= 0.15; trained in " +
              fmt("%.0f", t.seconds) + " s"};
}

Outcome integrator_effect(const RunConfig& cfg, const Trained& t) {
  const auto agent = sac::SacAgent::load_file(t.checkpoint);
  const int steps = static_cast<int>(std::lround(20.0 / cfg.physics.dt));
  RunConfig off = cfg, on = cfg;
  off.lhs.integrator = false;
  on.lhs.integrator = true;
  const auto ev_off = evaluate(off, PolicyKind::Agent, &agent, 10, steps);
  const auto ev_on = evaluate(on, PolicyKind::Agent, &agent, 10, steps);
  int converged = 0, improved = 0;
  double worst_on = 0.0, worst_off = 0.0;
  for (int i = 0; i < 10; ++i) {
    const double a = ev_on.runs[i].final_abs_x1, b = ev_off.runs[i].final_abs_x1;
    converged += a < 0.02 && !ev_on.runs[i].aborted;
    improved += a < b;
    worst_on = std::max(worst_on, a);
    worst_off = std::max(worst_off, b);
  }
  return {converged >= 8 && improved == 10,
          std::to_string(converged) + "/10 runs with |x1(20 s)| < 0.02, " + std::to_string(improved) +
              "/10 improved; worst |x1(20 s)| " + fmt("%.2e", worst_on) + " with vs " +
              fmt("%.2e", worst_off) + " without"};
}

Outcome gain_reuse(const RunConfig& cfg, const Trained& t) {
  const auto agent = sac::SacAgent::load_file(t.checkpoint);
  RunConfig c = cfg;
  c.lhs.integrator = false;
  const int steps = static_cast<int>(std::lround(10.0 / cfg.physics.dt));
  const auto sweep = sweep_gains(c, {{-0.5, -1.5}, {-2.0, -5.0}}, PolicyKind::Agent, &agent, 10, steps);
  std::string detail;
  bool pass = true;
  for (const auto& e : sweep) {
    int ok = 0;
    double worst = 0.0;
    for (const auto& r : e.evaluation.runs) {
      ok += r.final_abs_x2 < 0.1 && !r.aborted;
      worst = std::max(worst, r.final_abs_x2);
    }
    pass = pass && ok == 10;
    if (!detail.empty()) detail += "; ";
    detail += "gains (" + fmt("%g", e.gains.k21) + ", " + fmt("%g", e.gains.k2) + "): " +
              std::to_string(ok) + "/10 with |x2(10 s)| < 0.1 (worst " + fmt("%.2e", worst) + ")";
  }
  return {pass, detail};
}

Outcome gradients() {
  using namespace dacph::testing;
  double critic = 0.0, actor = 0.0, temperature = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    sac::SacAgent agent(3, 1, small_hyper(), 500 + trial);
    std::mt19937_64 rng(900 + trial);
    const auto batch = random_batch(8, rng, agent.hyper().action_scale);
    const Matrix next_noise = agent.draw_noise(8);
    const auto qa = agent.critic_loss(batch, next_noise, true);
    for (int i = 0; i < 2; ++i) {
      const Vector numeric = numeric_gradient(agent.critic(i), [&] {
        return agent.critic_loss(batch, next_noise, false).value;
      });
      critic = std::max(critic, worst_relative_error(flatten(i == 0 ? qa.grad_q1 : qa.grad_q2), numeric));
    }
    const Matrix noise = agent.draw_noise(8);
    const auto pa = agent.actor_loss(batch, noise, true);
    const Vector numeric = numeric_gradient(agent.policy().trunk(), [&] {
      return agent.actor_loss(batch, noise, false).value;
    });
    actor = std::max(actor, worst_relative_error(flatten(pa.grad), numeric));

    std::normal_distribution<double> normal(0.0, 1.0);
    const double log_alpha = normal(rng), mean_log_prob = normal(rng);
    const double h = 1e-6;
    agent.set_log_alpha(log_alpha + h);
    const double up = agent.alpha_loss(mean_log_prob);
    agent.set_log_alpha(log_alpha - h);
    const double down = agent.alpha_loss(mean_log_prob);
    agent.set_log_alpha(log_alpha);
    const double fd = (up - down) / (2.0 * h);
    const double an = agent.alpha_gradient(mean_log_prob);
    temperature = std::max(temperature, std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-3}));
  }
  return {critic < 1e-4 && actor < 1e-4 && temperature < 1e-4,
          "worst relative error over 10 nets: critic " + fmt("%.1e", critic) + ", actor " +
              fmt("%.1e", actor) + ", temperature " + fmt("%.1e", temperature)};
}

Outcome shield(const RunConfig& base, const Trained& t) {
  const auto cases = dacph::testing::grid_scenarios(77, 100);
  double worst = 0.0;
  int active = 0;
  for (const auto& c : cases) {
    worst = std::max(worst, c.error());
    active += c.active;
  }

  RunConfig cfg = base;
  cfg.safety.mode = ConstraintMode::Hard;
  const auto agent = sac::SacAgent::load_file(t.checkpoint);
  double max_x1 = 0.0;
  for (auto policy : {PolicyKind::Zero, PolicyKind::Agent}) {
    const auto ev = evaluate(cfg, policy, &agent, 10, cfg.episode.horizon_steps);
    for (const auto& e : ev.episodes) max_x1 = std::max(max_x1, e.max_abs_x1);
  }
  return {worst < 2e-3 && max_x1 <= kQ + 0.01,
          "worst |u - grid| " + fmt("%.1e", worst) + " (shield active in " + std::to_string(active) +
              "/100); hard-mode max |x1| " + fmt("%.4f", max_x1) + " over 20 runs (limit " +
              fmt("%.4f", kQ + 0.01) + ")"};
}

Outcome excitation_machinery(const RunConfig& base) {
  const double dt = 0.01;
  const int n = static_cast<int>(std::lround(2.0 * std::numbers::pi / dt));
  const double h = 2.0 * std::numbers::pi / n;
  std::vector<Matrix> samples;
  for (int k = 0; k <= n; ++k) {
    Matrix row(1, 2);
    row << std::sin(k * h), std::cos(k * h);
    samples.push_back(row);
  }
  const Matrix G = excitation::pe_gram(samples, h).gram;
  const double gram_err = (G - std::numbers::pi * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() / std::numbers::pi;

  RunConfig cfg = base;
  cfg.lhs.adaptive = true;
  cfg.lhs.integrator = false;
  cfg.pe.enabled = true;
  const double truth = cfg.physics.mgl();
  cfg.lhs.initial_scale = vec2(1.0, 7.0 / truth);
  const int steps = static_cast<int>(std::lround(40.0 / cfg.physics.dt));
  const auto excited = simulate_episode(cfg, PolicyKind::Oracle, nullptr, steps, 0, Vector::Zero(2));
  const double est_err = std::abs(excited.theta_hat(1) - truth) / truth;

  RunConfig still = cfg;
  still.pe.enabled = false;
  const auto idle = simulate_episode(still, PolicyKind::Oracle, nullptr, steps, 0, Vector::Zero(2));
  const double moved = std::abs(idle.theta_hat(1) - 7.0);

  return {gram_err < 0.01 && est_err < 0.05 && moved < 1e-4,
          "Gram error " + fmt("%.1e", gram_err) + " of pi; theta_hat " + fmt("%.3f", excited.theta_hat(1)) +
              " vs mgl " + fmt("%.3f", truth) + " (" + fmt("%.2f", 100.0 * est_err) +
              "%) after 40 s from 7.0; unexcited change " + fmt("%.1e", moved)};
}

Outcome determinism(const RunConfig& cfg, const Trained& first) {
  const auto again = train(cfg, false);
  const bool same_returns = again.returns == first.returns;
  const auto agent = sac::SacAgent::load_file(first.checkpoint);
  const bool same_agent = again.agent.identical_to(agent);

  int identical = 0, total = 0;
  for (auto policy : {PolicyKind::Oracle, PolicyKind::Agent}) {
    const auto a = evaluate(cfg, policy, &agent, 3, cfg.episode.horizon_steps);
    const auto b = evaluate(cfg, policy, &again.agent, 3, cfg.episode.horizon_steps);
    for (std::size_t i = 0; i < a.episodes.size(); ++i) {
      ++total;
      identical += episode_csv(a.episodes[i].log) == episode_csv(b.episodes[i].log);
    }
  }
  return {same_returns && same_agent && identical == total,
          std::string("return history ") + (same_returns ? "identical" : "differs") + " across two " +
              std::to_string(first.returns.size()) + "-episode trainings, agent " +
              (same_agent ? "bitwise identical" : "differs") + ", " + std::to_string(identical) + "/" +
              std::to_string(total) + " CSV logs byte-identical"};
}

const char* kNames[] = {"",
                        "eigenvalue reproduction",
                        "oracle-policy convergence",
                        "energy invariants",
                        "SAC training",
                        "integrator effect",
                        "policy reuse across gains",
                        "gradient correctness",
                        "shield correctness",
                        "excitation machinery",
                        "determinism"};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria for the pendulum workbench"};
  std::string config = std::string(DACPH_SOURCE_DIR) + "/configs/table1.json";
  std::string workdir = (fs::temp_directory_path() / "dacph_acceptance").string();
  std::vector<int> expect_fail;
  app.add_option("-c,--config", config, "run configuration")->check(CLI::ExistingFile);
  app.add_option("--workdir", workdir, "scratch directory for the trained checkpoint");
  app.add_option("--expect-fail", expect_fail, "criteria known to fail")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg = load_config(config);
    cfg.output_dir = workdir;
    cfg.validate();
    fs::create_directories(workdir);

    std::vector<Outcome> out(11);
    std::vector<double> seconds(11, 0.0);
    auto run = [&](int id, const std::function<Outcome()>& f) {
      const auto t0 = std::chrono::steady_clock::now();
      out[id] = f();
      seconds[id] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    Trained trained;
    {
      const auto t0 = std::chrono::steady_clock::now();
      auto result = train(cfg, false);
      trained.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      trained.returns = result.returns;
      trained.moving_average = result.moving_average;
      trained.checkpoint = fs::path(workdir) / "trained_agent.bin";
      result.agent.save(trained.checkpoint);
    }

    run(1, [&] { return eigenvalues(cfg); });
    run(2, [&] { return oracle_convergence(cfg); });
    run(3, [&] { return energy_invariants(cfg); });
    run(4, [&] { return training(cfg, trained); });
    run(5, [&] { return integrator_effect(cfg, trained); });
    run(6, [&] { return gain_reuse(cfg, trained); });
    run(7, [&] { return gradients(); });
    run(8, [&] { return shield(cfg, trained); });
    run(9, [&] { return excitation_machinery(cfg); });
    run(10, [&] { return determinism(cfg, trained); });
    seconds[4] += trained.seconds;

    std::set<int> failed;
    const std::set<int> expected(expect_fail.begin(), expect_fail.end());
    for (int id = 1; id <= 10; ++id) {
      if (!out[id].pass) failed.insert(id);
      std::printf("criterion %2d %s  %-26s %s [%.1f s]%s\n", id, out[id].pass ? "PASS" : "FAIL",
                  kNames[id], out[id].detail.c_str(), seconds[id],
                  !out[id].pass && expected.count(id) ? " (known failure)" : "");
    }
    std::printf("%zu/10 criteria passed\n", 10 - failed.size());
    if (failed != expected) {
      std::printf("failure set differs from the expected set\n");
      return 2;
    }
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
