// Command-line front end for the pendulum experiments.
//
// Exit status: 0 success, 1 runtime failure, 2 an acceptance check failed.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dacph/harness/checks.hpp"
#include "dacph/harness/config.hpp"
#include "dacph/harness/experiment.hpp"
#include "dacph/harness/io.hpp"
#include "dacph/ph/errors.hpp"

namespace fs = std::filesystem;
using namespace dacph;
using namespace dacph::harness;

namespace {

constexpr int kPass = 0;
constexpr int kRuntimeFailure = 1;
constexpr int kCheckFailure = 2;

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("-o,--out", c.out, "output directory (overrides output_dir)");
  cmd->add_option("--seed", c.seed, "master seed (overrides seed)");
}

RunConfig load(const Common& c) {
  RunConfig cfg = load_config(c.config);
  if (!c.out.empty()) cfg.output_dir = c.out;
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  return cfg;
}

std::optional<sac::SacAgent> load_agent(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return sac::SacAgent::load_file(path);
}

PolicyKind resolve_policy(const RunConfig& cfg, const std::string& policy,
                          const std::optional<sac::SacAgent>& agent) {
  PolicyKind p = policy.empty() ? cfg.policy : parse_policy(policy);
  if (agent && policy.empty()) p = PolicyKind::Agent;
  if (p == PolicyKind::Agent && !agent) {
    throw ConfigError("policy", "agent policy needs --checkpoint");
  }
  return p;
}

std::string run_csv_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "run_%03d.csv", i);
  return buf;
}

std::vector<std::string> write_runs(const fs::path& dir, const Evaluation& ev) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < ev.episodes.size(); ++i) {
    const auto name = run_csv_name(static_cast<int>(i));
    write_text(dir / name, episode_csv(ev.episodes[i].log));
    names.push_back(name);
  }
  return names;
}

std::string summary_csv(const Evaluation& ev) {
  std::vector<double> seed, x0, fx1, fx2, mx1, epi, ret, ab;
  for (const auto& r : ev.runs) {
    seed.push_back(static_cast<double>(r.seed % (1ULL << 53)));
    x0.push_back(r.x1_initial);
    fx1.push_back(r.final_abs_x1);
    fx2.push_back(r.final_abs_x2);
    mx1.push_back(r.max_abs_x1);
    epi.push_back(r.mean_abs_epi2);
    ret.push_back(r.total_return);
    ab.push_back(r.aborted ? 1.0 : 0.0);
  }
  return table_csv({"seed_low53", "x1_initial", "final_abs_x1", "final_abs_x2", "max_abs_x1",
                    "mean_abs_epi2", "return", "aborted"},
                   {seed, x0, fx1, fx2, mx1, epi, ret, ab});
}

void finish_outputs(const RunConfig& cfg, const std::string& command,
                    std::vector<std::string> outputs) {
  const fs::path dir(cfg.output_dir);
  write_plot_script(dir);
  outputs.push_back("plot_runs.py");
  write_manifest(dir / "manifest.json", make_manifest(cfg, command, outputs));
}

void print_runs(const Evaluation& ev) {
  std::printf("%4s %10s %12s %12s %12s %12s\n", "run", "x1(0)", "|x1(T)|", "|x2(T)|", "max|x1|",
              "return");
  for (std::size_t i = 0; i < ev.runs.size(); ++i) {
    const auto& r = ev.runs[i];
    std::printf("%4zu %10.4f %12.3e %12.3e %12.4f %12.3f%s\n", i, r.x1_initial, r.final_abs_x1,
                r.final_abs_x2, r.max_abs_x1, r.total_return, r.aborted ? " ABORTED" : "");
  }
}

int cmd_simulate(const Common& common, const std::string& policy, const std::string& checkpoint,
                 int runs, int horizon, std::optional<double> x0) {
  const auto cfg = load(common);
  const auto agent = load_agent(checkpoint);
  const auto p = resolve_policy(cfg, policy, agent);
  const int steps = horizon > 0 ? horizon : cfg.episode.horizon_steps;
  Evaluation ev;
  if (x0) {
    Vector start(2);
    start << *x0, 0.0;
    auto res = simulate_episode(cfg, p, agent ? &*agent : nullptr, steps, cfg.seed, start);
    RunSummary s;
    s.seed = cfg.seed;
    s.x1_initial = *x0;
    s.final_abs_x1 = std::abs(res.log.final_x(0));
    s.final_abs_x2 = std::abs(res.log.final_x(1));
    s.max_abs_x1 = res.max_abs_x1;
    s.total_return = res.log.total_return();
    s.aborted = res.log.aborted;
    ev.runs.push_back(s);
    ev.episodes.push_back(std::move(res));
  } else {
    ev = evaluate(cfg, p, agent ? &*agent : nullptr, runs > 0 ? runs : 1, steps);
  }
  auto outputs = write_runs(cfg.output_dir, ev);
  print_runs(ev);
  finish_outputs(cfg, "simulate --policy " + to_string(p), outputs);
  bool aborted = false;
  for (const auto& r : ev.runs) aborted = aborted || r.aborted;
  return aborted ? kRuntimeFailure : kPass;
}

int cmd_train(const Common& common, int episodes) {
  auto cfg = load(common);
  if (episodes > 0) cfg.episode.train_episodes = episodes;
  std::printf("training %d episodes, config %s\n", cfg.episode.train_episodes,
              config_hash(cfg).c_str());
  const auto result = train(cfg, true, [](int ep, double ret, double ma) {
    std::printf("episode %4d  return %12.3f  moving-average %12.3f\n", ep, ret, ma);
    std::fflush(stdout);
  });
  std::vector<double> idx;
  for (std::size_t i = 0; i < result.returns.size(); ++i) idx.push_back(static_cast<double>(i + 1));
  write_text(fs::path(cfg.output_dir) / "returns.csv",
             table_csv({"episode", "return", "moving_average"},
                       {idx, result.returns, result.moving_average}));
  std::vector<std::string> outputs{"returns.csv"};
  for (const auto& c : result.checkpoints) outputs.push_back(fs::relative(c, cfg.output_dir).string());
  finish_outputs(cfg, "train", outputs);

  const auto& ma = result.moving_average;
  const std::size_t ref = static_cast<std::size_t>(cfg.episode.ma_window) - 1;
  if (ma.size() <= ref + 1) {
    std::printf("too few episodes for the moving-average improvement check\n");
    return kPass;
  }
  const bool improved = ma.back() > ma[ref];
  std::printf("moving average: episode %zu %.3f -> episode %zu %.3f  %s\n", ref + 1, ma[ref],
              ma.size(), ma.back(), improved ? "PASS" : "FAIL");
  return improved ? kPass : kCheckFailure;
}

int cmd_evaluate(const Common& common, const std::string& policy, const std::string& checkpoint,
                 bool integrator, int runs) {
  auto cfg = load(common);
  const auto agent = load_agent(checkpoint);
  const auto p = resolve_policy(cfg, policy, agent);
  const int n = runs > 0 ? runs : cfg.episode.eval_runs;
  const auto* ag = agent ? &*agent : nullptr;
  const fs::path dir(cfg.output_dir);
  std::vector<std::string> outputs;

  if (!integrator) {
    cfg.lhs.integrator = false;
    const auto ev = evaluate(cfg, p, ag, n, cfg.episode.horizon_steps);
    outputs = write_runs(dir, ev);
    write_text(dir / "summary.csv", summary_csv(ev));
    outputs.push_back("summary.csv");
    print_runs(ev);
    finish_outputs(cfg, "evaluate --policy " + to_string(p), outputs);
    int ok = 0;
    if (p == PolicyKind::Oracle) {
      for (const auto& r : ev.runs) ok += std::hypot(r.final_abs_x1, r.final_abs_x2) < 1e-2;
      std::printf("oracle: %d/%d runs with |x(T)| < 1e-2\n", ok, n);
      return ok == n ? kPass : kCheckFailure;
    }
    for (const auto& r : ev.runs) ok += r.final_abs_x2 < 0.05 && r.final_abs_x1 <= 0.15;
    const int need = (4 * n + 4) / 5;
    std::printf("%d/%d runs with |x2(T)| < 0.05 and |x1(T)| <= 0.15 (need %d)\n", ok, n, need);
    return ok >= need ? kPass : kCheckFailure;
  }

  // Integrator on, compared with the same runs and horizon without it.
  RunConfig off = cfg;
  off.lhs.integrator = false;
  cfg.lhs.integrator = true;
  const int steps = cfg.episode.eval_horizon_steps;
  const auto ev_off = evaluate(off, p, ag, n, steps);
  const auto ev_on = evaluate(cfg, p, ag, n, steps);
  outputs = write_runs(dir, ev_on);
  write_text(dir / "summary.csv", summary_csv(ev_on));
  write_text(dir / "summary_no_integrator.csv", summary_csv(ev_off));
  outputs.push_back("summary.csv");
  outputs.push_back("summary_no_integrator.csv");
  print_runs(ev_on);
  finish_outputs(cfg, "evaluate --integrator --policy " + to_string(p), outputs);
  int converged = 0;
  int improved = 0;
  for (int i = 0; i < n; ++i) {
    converged += ev_on.runs[i].final_abs_x1 < 0.02;
    improved += ev_on.runs[i].final_abs_x1 < ev_off.runs[i].final_abs_x1;
  }
  const int need = (4 * n + 4) / 5;
  std::printf("integrator: %d/%d runs with |x1(T)| < 0.02 (need %d), %d/%d improved\n", converged,
              n, need, improved, n);
  return converged >= need && improved == n ? kPass : kCheckFailure;
}

int cmd_sweep(const Common& common, const std::string& policy, const std::string& checkpoint,
              int runs) {
  const auto cfg = load(common);
  const auto agent = load_agent(checkpoint);
  const auto p = resolve_policy(cfg, policy, agent);
  const int n = runs > 0 ? runs : cfg.episode.eval_runs;
  const std::vector<GainSet> sets{{-0.5, -1.5}, {-2.0, -5.0}};
  const auto sweep = sweep_gains(cfg, sets, p, agent ? &*agent : nullptr, n,
                                 cfg.episode.horizon_steps);
  std::vector<double> k21, k2, run, fx1, fx2, conv;
  int failures = 0;
  for (const auto& e : sweep) {
    std::printf("gains k21=%g k2=%g eigenvalues:", e.gains.k21, e.gains.k2);
    for (const auto& l : e.eigenvalues) std::printf(" %.4f%+.4fi", l.real(), l.imag());
    std::printf("\n");
    for (std::size_t i = 0; i < e.evaluation.runs.size(); ++i) {
      const auto& r = e.evaluation.runs[i];
      const bool ok = r.final_abs_x2 < 0.1 && !r.aborted;
      failures += !ok;
      k21.push_back(e.gains.k21);
      k2.push_back(e.gains.k2);
      run.push_back(static_cast<double>(i));
      fx1.push_back(r.final_abs_x1);
      fx2.push_back(r.final_abs_x2);
      conv.push_back(ok ? 1.0 : 0.0);
    }
    print_runs(e.evaluation);
  }
  write_text(fs::path(cfg.output_dir) / "sweep.csv",
             table_csv({"k21", "k2", "run", "final_abs_x1", "final_abs_x2", "convergent"},
                       {k21, k2, run, fx1, fx2, conv}));
  finish_outputs(cfg, "sweep-gains --policy " + to_string(p), {"sweep.csv"});
  std::printf("%d non-convergent runs (|x2(T)| >= 0.1)\n", failures);
  return failures == 0 ? kPass : kCheckFailure;
}

int cmd_diagnose(const Common& common, const std::string& policy, const std::string& checkpoint,
                 int runs) {
  const auto cfg = load(common);
  const auto agent = load_agent(checkpoint);
  const auto p = resolve_policy(cfg, policy, agent);
  const int n = runs > 0 ? runs : cfg.episode.eval_runs;
  const auto ev = evaluate(cfg, p, agent ? &*agent : nullptr, n, cfg.episode.horizon_steps);
  std::vector<pendulum::EpisodeLog> logs;
  for (const auto& e : ev.episodes) logs.push_back(e.log);
  const auto gain = small_gain_diagnostic(logs);
  const Matrix P = make_gains(cfg).P;
  const fs::path dir(cfg.output_dir);
  std::vector<std::string> outputs;

  double mean_frac = 0.0;
  for (std::size_t i = 0; i < ev.episodes.size(); ++i) {
    const auto v = vdac_monitor(ev.episodes[i].log, P);
    mean_frac += v.fraction_decreasing / static_cast<double>(ev.episodes.size());
    std::vector<double> t;
    for (const auto& r : ev.episodes[i].log.rows) t.push_back(r.t);
    char name[40];
    std::snprintf(name, sizeof(name), "vdac_%03zu.csv", i);
    write_text(dir / name, table_csv({"t", "V1", "Vdac"}, {t, v.V1, v.Vdac}));
    outputs.push_back(name);
  }
  const int window = std::max(2, static_cast<int>(std::lround(cfg.pe.window / cfg.physics.dt)));
  const auto pe = pe_windows(ev.episodes.front().regressors, cfg.physics.dt, window);
  std::vector<double> te, a1, a2;
  for (const auto& w : pe) {
    te.push_back(w.t_end);
    a1.push_back(w.eig_min);
    a2.push_back(w.eig_max);
  }
  write_text(dir / "pe_windows.csv", table_csv({"t_end", "alpha1", "alpha2"}, {te, a1, a2}));
  outputs.push_back("pe_windows.csv");
  finish_outputs(cfg, "diagnose --policy " + to_string(p), outputs);

  auto show = [](const std::optional<double>& v) {
    return v ? std::to_string(*v) : std::string("undefined");
  };
  std::printf("k_L = %s  k_R = %s  k_L*k_R = %s  (%s)\n", show(gain.k_L).c_str(),
              show(gain.k_R).c_str(), show(gain.product).c_str(), gain.verdict.c_str());
  std::printf("mean fraction of steps with decreasing V_DAC: %.3f\n", mean_frac);
  return gain.product && *gain.product < 1.0 ? kPass : kCheckFailure;
}

int cmd_check(const Common& common) {
  const auto cfg = load(common);
  const auto results = check_invariants(cfg);
  bool all = true;
  for (const auto& r : results) {
    std::printf("[%s] %-22s %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    all = all && r.passed;
  }
  return all ? kPass : kCheckFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pendulum experiments with model-based LHS control and a learned RHS"};
  app.require_subcommand(1);
  app.set_version_flag("--version", tool_version());

  Common common;
  std::string policy, checkpoint;
  int runs = 0, horizon = 0, episodes = 0;
  bool integrator = false;
  std::optional<double> x0;

  auto* sim = app.add_subcommand("simulate", "roll out episodes and write CSV logs");
  add_common(sim, common);
  sim->add_option("--policy", policy, "oracle, agent or zero");
  sim->add_option("--checkpoint", checkpoint, "trained agent")->check(CLI::ExistingFile);
  sim->add_option("--runs", runs, "number of seeded random starts");
  sim->add_option("--horizon-steps", horizon, "steps per episode");
  sim->add_option("--x0", x0, "initial angle instead of a random start");

  auto* tr = app.add_subcommand("train", "train the SAC agent and checkpoint it");
  add_common(tr, common);
  tr->add_option("--episodes", episodes, "override episode.train_episodes");

  auto* ev = app.add_subcommand("evaluate", "deterministic evaluation from seeded starts");
  add_common(ev, common);
  ev->add_option("--policy", policy, "oracle, agent or zero");
  ev->add_option("--checkpoint", checkpoint, "trained agent")->check(CLI::ExistingFile);
  ev->add_flag("--integrator", integrator, "enable the integrator and compare with it off");
  ev->add_option("--runs", runs, "override episode.eval_runs");

  auto* sw = app.add_subcommand("sweep-gains", "compare gain sets under a fixed policy");
  add_common(sw, common);
  sw->add_option("--policy", policy, "oracle, agent or zero");
  sw->add_option("--checkpoint", checkpoint, "trained agent")->check(CLI::ExistingFile);
  sw->add_option("--runs", runs, "override episode.eval_runs");

  auto* dg = app.add_subcommand("diagnose", "small-gain, V_DAC and excitation diagnostics");
  add_common(dg, common);
  dg->add_option("--policy", policy, "oracle, agent or zero");
  dg->add_option("--checkpoint", checkpoint, "trained agent")->check(CLI::ExistingFile);
  dg->add_option("--runs", runs, "override episode.eval_runs");

  auto* ck = app.add_subcommand("check-invariants", "structural and numerical invariant checks");
  add_common(ck, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kRuntimeFailure;
  }

  try {
    if (sim->parsed()) return cmd_simulate(common, policy, checkpoint, runs, horizon, x0);
    if (tr->parsed()) return cmd_train(common, episodes);
    if (ev->parsed()) return cmd_evaluate(common, policy, checkpoint, integrator, runs);
    if (sw->parsed()) return cmd_sweep(common, policy, checkpoint, runs);
    if (dg->parsed()) return cmd_diagnose(common, policy, checkpoint, runs);
    if (ck->parsed()) return cmd_check(common);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kRuntimeFailure;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntimeFailure;
  }
  return kRuntimeFailure;
}
