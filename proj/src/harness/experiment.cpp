#include "dacph/harness/experiment.hpp"

#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>

#include <unsupported/Eigen/MatrixFunctions>

#include "dacph/excitation/excitation.hpp"
#include "dacph/ph/errors.hpp"
#include "dacph/safety/shield.hpp"
#include "dacph/sac/stats.hpp"

namespace dacph::harness {

namespace fs = std::filesystem;

namespace {

// Turns a nominal torque into the applied one (excitation, then shield) and
// computes the reward terms that sit on top of the plant reward.
class Actuator {
 public:
  explicit Actuator(const RunConfig& cfg) : cfg_(cfg) {
    if (cfg.safety.mode == ConstraintMode::Hard) spec_ = make_safety_spec(cfg);
    window_steps_ = std::max(1, static_cast<int>(std::lround(cfg.pe.window / cfg.physics.dt)));
  }

  bool needs_hold() const { return spec_.has_value(); }

  double excitation(double t) const {
    return cfg_.pe.enabled ? excitation::pe_signal(cfg_.pe.signal, t) : 0.0;
  }

  double apply(const pendulum::PendulumEnv& env, double tau_nominal, double delta,
               EpisodeResult& stats) const {
    if (!spec_) return tau_nominal + delta;

    const Vector x = env.state();
    const Vector zero_pi = Vector::Zero(2);
    auto predictor = [&](const Vector& u) {
      return safety::SafetySignal{env.predict(x, u(0)), zero_pi};
    };
    const auto r = safety::shield_qp(ph::ControlInput{Vector::Constant(1, tau_nominal)},
                                     Vector::Constant(1, delta), {x, zero_pi}, predictor, *spec_);
    if (r.active) ++stats.shield_active_steps;
    if (!r.feasible) ++stats.shield_infeasible_steps;
    for (double v : r.cbf_residuals) stats.min_cbf_residual = std::min(stats.min_cbf_residual, v);
    return r.u_applied.u(0);
  }

  // Shield soft penalty and excitation shaping for the state just reached.
  double extra_reward(const pendulum::PendulumEnv& env) {
    double extra = 0.0;
    if (spec_) {
      extra += safety::soft_penalty(*spec_, safety::SafetySignal{env.state(), Vector::Zero(2)});
    }
    if (cfg_.pe.enabled && cfg_.pe.beta_pe > 0.0) {
      window_.push_back(pendulum::adaptive_flow().regressor(env.state()));
      if (static_cast<int>(window_.size()) > window_steps_) window_.pop_front();
      const std::vector<Matrix> samples(window_.begin(), window_.end());
      extra += excitation::pe_reward(excitation::stack_regressors(samples), cfg_.pe.beta_pe);
    }
    return extra;
  }

  void reset() { window_.clear(); }

 private:
  const RunConfig& cfg_;
  std::optional<safety::SafetySpec> spec_;
  int window_steps_ = 1;
  std::deque<Matrix> window_;
};

// Nominal closed-loop response to the injected excitation, x_d' = Ks x_d + g delta,
// discretized exactly under a held delta. Feeding x - x_d to the parameter
// update keeps the known excitation out of the estimation error.
class ExcitationReference {
 public:
  ExcitationReference(const RunConfig& cfg) {
    const Matrix Ks = make_gains(cfg).Ks;
    const double dt = cfg.physics.dt;
    Ad_ = (Ks * dt).exp();
    Vector g = Vector::Zero(2);
    g(1) = 1.0;
    Bd_ = Ks.partialPivLu().solve((Ad_ - Matrix::Identity(2, 2)) * g);
    x_d_ = Vector::Zero(2);
  }

  const Vector& state() const { return x_d_; }
  void reset() { x_d_.setZero(); }
  void advance(double delta) { x_d_ = Ad_ * x_d_ + Bd_ * delta; }

 private:
  Matrix Ad_;
  Vector Bd_;
  Vector x_d_;
};

std::optional<ExcitationReference> make_reference(const RunConfig& cfg) {
  if (!(cfg.pe.enabled && cfg.lhs.adaptive)) return std::nullopt;
  return ExcitationReference(cfg);
}

void add_to_last_reward(pendulum::PendulumEnv& env, double extra) {
  if (extra == 0.0 || env.log().rows.empty()) return;
  auto& row = env.log().rows.back();
  row.reward += extra;
  row.cumulative_return += extra;
}

pendulum::PendulumEnv make_env(const RunConfig& cfg, int horizon_steps) {
  return pendulum::PendulumEnv(make_env_config(cfg, horizon_steps), make_controller(cfg));
}

double nominal_torque(const RunConfig& cfg, PolicyKind policy, const sac::SacAgent* agent,
                      const pendulum::PendulumEnv& env) {
  switch (policy) {
    case PolicyKind::Oracle:
      return pendulum::oracle_torque(env.state(), env.port_command().pi, cfg.physics);
    case PolicyKind::Zero:
      return 0.0;
    case PolicyKind::Agent:
      return agent->act_deterministic(env.observation())(0);
  }
  return 0.0;
}

void write_divergence_snapshot(const RunConfig& cfg, int episode, const sac::SacAgent& agent,
                               const sac::LossReport& last, const std::string& what) {
  fs::create_directories(cfg.output_dir);
  std::ofstream os(fs::path(cfg.output_dir) / "divergence.json");
  nlohmann::json j = {{"episode", episode},
                      {"env_steps", agent.env_steps()},
                      {"updates", agent.updates()},
                      {"error", what},
                      {"last_losses",
                       {{"critic", last.critic_loss},
                        {"actor", last.actor_loss},
                        {"alpha", last.alpha},
                        {"mean_q", last.mean_q},
                        {"mean_log_prob", last.mean_log_prob}}}};
  os << j.dump(2) << "\n";
}

}  // namespace

EpisodeResult simulate_episode(const RunConfig& cfg, PolicyKind policy, const sac::SacAgent* agent,
                               int horizon_steps, std::uint64_t run_seed,
                               const std::optional<Vector>& x0) {
  if (policy == PolicyKind::Agent && agent == nullptr) {
    throw std::invalid_argument("simulate_episode: agent policy needs a trained agent");
  }
  auto env = make_env(cfg, horizon_steps);
  env.log().seed = run_seed;
  env.log().config_hash = config_hash(cfg);
  std::mt19937_64 rng(run_seed);
  if (x0) {
    env.reset_to(*x0);
  } else {
    env.reset(rng);
  }

  EpisodeResult res;
  res.min_cbf_residual = std::numeric_limits<double>::infinity();
  res.max_abs_x1 = std::abs(env.state()(0));
  Actuator act(cfg);
  const auto regressor = pendulum::adaptive_flow().regressor;
  const auto& params = cfg.physics;
  auto reference = make_reference(cfg);
  while (!env.done()) {
    res.regressors.push_back(regressor(env.state()));
    const double delta = act.excitation(env.time());
    if (reference) env.set_adaptation_reference(reference->state());
    pendulum::StepResult step;
    if (policy == PolicyKind::Oracle && !act.needs_hold()) {
      step = env.step_feedback([&params, delta](const Vector& x, const Vector& pi_c) {
        return pendulum::oracle_torque(x, pi_c, params) + delta;
      });
    } else {
      const double tau = act.apply(env, nominal_torque(cfg, policy, agent, env), delta, res);
      step = env.step(tau);
    }
    if (reference) reference->advance(delta);
    if (step.aborted) break;
    add_to_last_reward(env, act.extra_reward(env));
    res.max_abs_x1 = std::max(res.max_abs_x1, std::abs(env.state()(0)));
  }
  if (const auto& ad = env.controller().adaptation()) res.theta_hat = ad->theta_hat;
  res.log = std::move(env.log());
  return res;
}

TrainResult train(const RunConfig& cfg, bool write_checkpoints, const EpisodeCallback& on_episode) {
  sac::SacHyper hyper = cfg.sac;
  if (cfg.on_policy) {
    hyper.buffer_capacity = static_cast<std::size_t>(cfg.episode.horizon_steps);
    hyper.batch_size = std::min(hyper.batch_size, cfg.episode.horizon_steps);
  }
  TrainResult out;
  out.agent = sac::SacAgent(3, 1, hyper, split_seed(cfg.seed, kAgentStream));
  auto& agent = out.agent;
  std::mt19937_64 env_rng(split_seed(cfg.seed, kTrainEnvStream));
  auto env = make_env(cfg, cfg.episode.horizon_steps);
  env.log().config_hash = config_hash(cfg);
  Actuator act(cfg);
  auto reference = make_reference(cfg);
  EpisodeResult scratch;
  scratch.min_cbf_residual = std::numeric_limits<double>::infinity();

  const fs::path ckpt_dir = fs::path(cfg.output_dir) / "checkpoints";
  if (write_checkpoints) fs::create_directories(ckpt_dir);

  sac::LossReport last;
  for (int ep = 0; ep < cfg.episode.train_episodes; ++ep) {
    Vector obs = env.reset(env_rng);
    act.reset();
    if (reference) reference->reset();
    if (cfg.on_policy) agent.buffer().clear();
    while (!env.done()) {
      const bool warm = agent.env_steps() < hyper.warmup_steps;
      const Vector a = warm ? agent.random_action() : agent.act(obs).action;
      const double delta = act.excitation(env.time());
      if (reference) env.set_adaptation_reference(reference->state());
      const double tau = act.apply(env, a(0), delta, scratch);
      const auto step = env.step(tau);
      if (reference) reference->advance(delta);
      agent.count_env_step();
      if (step.aborted) break;
      const double r = step.reward + act.extra_reward(env);
      add_to_last_reward(env, r - step.reward);
      // The executed torque is stored so the critic learns the applied action.
      agent.buffer().push({obs, Vector::Constant(1, tau), r, step.observation, false});
      obs = step.observation;

      const auto batch = static_cast<std::size_t>(hyper.batch_size);
      if (!warm && agent.buffer().size() >= batch) {
        for (int u = 0; u < hyper.updates_per_step; ++u) {
          try {
            last = agent.sac_step(agent.buffer().sample(batch, agent.rng()));
          } catch (const sac::SacDivergence& e) {
            write_divergence_snapshot(cfg, ep, agent, last, e.what());
            throw;
          }
        }
      }
    }
    out.returns.push_back(env.log().total_return());
    out.last_losses.push_back(last);
    const auto ma = sac::moving_average(out.returns, static_cast<std::size_t>(cfg.episode.ma_window));
    if (on_episode) on_episode(ep + 1, out.returns.back(), ma.back());

    const bool cadence = cfg.episode.checkpoint_every > 0 && (ep + 1) % cfg.episode.checkpoint_every == 0;
    if (write_checkpoints && cadence) {
      char name[32];
      std::snprintf(name, sizeof(name), "episode_%04d.bin", ep + 1);
      agent.save(ckpt_dir / name);
      out.checkpoints.push_back((ckpt_dir / name).string());
    }
  }
  out.moving_average = sac::moving_average(out.returns, static_cast<std::size_t>(cfg.episode.ma_window));
  if (write_checkpoints) {
    agent.save(ckpt_dir / "final.bin");
    out.checkpoints.push_back((ckpt_dir / "final.bin").string());
  }
  return out;
}

Evaluation evaluate(const RunConfig& cfg, PolicyKind policy, const sac::SacAgent* agent,
                    int n_runs, int horizon_steps) {
  Evaluation ev;
  for (int i = 0; i < n_runs; ++i) {
    const auto seed = split_seed(cfg.seed, static_cast<std::uint64_t>(i));
    auto res = simulate_episode(cfg, policy, agent, horizon_steps, seed);
    RunSummary s;
    s.seed = seed;
    s.x1_initial = res.log.rows.empty() ? res.log.final_x(0) : res.log.rows.front().x(0);
    s.final_abs_x1 = std::abs(res.log.final_x(0));
    s.final_abs_x2 = std::abs(res.log.final_x(1));
    s.max_abs_x1 = res.max_abs_x1;
    double sum = 0.0;
    for (const auto& row : res.log.rows) sum += std::abs(row.pi(1) - row.pi_c(1));
    s.mean_abs_epi2 = res.log.rows.empty() ? 0.0 : sum / static_cast<double>(res.log.rows.size());
    s.total_return = res.log.total_return();
    s.aborted = res.log.aborted;
    ev.runs.push_back(s);
    ev.episodes.push_back(std::move(res));
  }
  return ev;
}

SmallGain small_gain_diagnostic(const std::vector<pendulum::EpisodeLog>& logs) {
  double max_ex = 0.0;
  double max_epi = 0.0;
  double max_pic = 0.0;
  for (const auto& log : logs) {
    for (const auto& row : log.rows) {
      max_ex = std::max(max_ex, row.x.norm());
      max_epi = std::max(max_epi, (row.pi - row.pi_c).norm());
      max_pic = std::max(max_pic, row.pi_c.norm());
    }
  }
  SmallGain g;
  if (max_pic == 0.0) {
    g.verdict = "undefined";
    return g;
  }
  // Realisation errors at round-off level count as exact realisation.
  if (max_epi <= 1e-12 * max_pic) max_epi = 0.0;
  g.k_R = max_epi / max_pic;
  if (max_epi == 0.0) {
    g.product = 0.0;
  } else {
    g.k_L = max_ex / max_epi;
    g.product = *g.k_L * *g.k_R;
  }
  g.verdict = *g.product < 1.0 ? "stable-indicated" : "not-indicated";
  return g;
}

VdacSeries vdac_monitor(const pendulum::EpisodeLog& log, const Matrix& P) {
  VdacSeries out;
  for (const auto& row : log.rows) {
    const double v1 = 0.5 * row.x.dot(P * row.x);
    const Vector e_pi = row.pi - row.pi_c;
    out.V1.push_back(v1);
    out.Vdac.push_back(v1 + 0.5 * e_pi.squaredNorm());
  }
  int decreasing = 0;
  for (std::size_t k = 1; k < out.Vdac.size(); ++k) {
    if (out.Vdac[k] < out.Vdac[k - 1]) ++decreasing;
  }
  if (out.Vdac.size() > 1) {
    out.fraction_decreasing = static_cast<double>(decreasing) / static_cast<double>(out.Vdac.size() - 1);
  }
  return out;
}

std::vector<PeWindow> pe_windows(const std::vector<Matrix>& regressors, double dt, int window_steps) {
  std::vector<PeWindow> out;
  if (window_steps < 2) throw std::invalid_argument("pe_windows: need at least two samples per window");
  for (std::size_t start = 0; start + static_cast<std::size_t>(window_steps) <= regressors.size();
       start += static_cast<std::size_t>(window_steps)) {
    const std::vector<Matrix> win(regressors.begin() + static_cast<std::ptrdiff_t>(start),
                                  regressors.begin() + static_cast<std::ptrdiff_t>(start) + window_steps);
    const auto m = excitation::pe_gram(win, dt);
    out.push_back({static_cast<double>(start + window_steps - 1) * dt, m.eig_min, m.eig_max});
  }
  return out;
}

std::vector<SweepEntry> sweep_gains(const RunConfig& cfg, const std::vector<GainSet>& sets,
                                    PolicyKind policy, const sac::SacAgent* agent, int n_runs,
                                    int horizon_steps) {
  std::vector<SweepEntry> out;
  for (const auto& gs : sets) {
    RunConfig c = cfg;
    c.lhs.k21 = gs.k21;
    c.lhs.k2 = gs.k2;
    SweepEntry e;
    e.gains = gs;
    e.eigenvalues = lhs::verify_hurwitz(make_gains(c).Ks).eigenvalues;
    e.evaluation = evaluate(c, policy, agent, n_runs, horizon_steps);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace dacph::harness
