#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dacph/harness/config.hpp"
#include "dacph/pendulum/pendulum.hpp"
#include "dacph/sac/agent.hpp"

namespace dacph::harness {

struct EpisodeResult {
  pendulum::EpisodeLog log;
  int shield_active_steps = 0;
  int shield_infeasible_steps = 0;
  double min_cbf_residual = 0.0;  // over shield calls; +inf when the shield never ran
  double max_abs_x1 = 0.0;        // includes the final state
  Vector theta_hat;               // adaptive estimate at the end (empty if not adapting)
  std::vector<Matrix> regressors;  // phi(x_k) per step, for PE metrics
};

// One episode from a seeded random start (or `x0` when given). The oracle is
// applied as continuous state feedback unless excitation or the shield
// requires a held torque. `agent` is required for PolicyKind::Agent and is
// evaluated deterministically.
EpisodeResult simulate_episode(const RunConfig& cfg, PolicyKind policy, const sac::SacAgent* agent,
                               int horizon_steps, std::uint64_t run_seed,
                               const std::optional<Vector>& x0 = std::nullopt);

struct TrainResult {
  sac::SacAgent agent;
  std::vector<double> returns;
  std::vector<double> moving_average;
  std::vector<sac::LossReport> last_losses;  // last update of every episode
  std::vector<std::string> checkpoints;
};

using EpisodeCallback = std::function<void(int episode, double episode_return, double ma)>;

// SAC against the pendulum with LHS control in the loop. Checkpoints go to
// <output_dir>/checkpoints when `write_checkpoints` is set. On a non-finite
// loss a diagnostics snapshot is written and SacDivergence is rethrown.
TrainResult train(const RunConfig& cfg, bool write_checkpoints = true,
                  const EpisodeCallback& on_episode = nullptr);

struct RunSummary {
  std::uint64_t seed = 0;
  double x1_initial = 0.0;
  double final_abs_x1 = 0.0;
  double final_abs_x2 = 0.0;
  double max_abs_x1 = 0.0;
  double mean_abs_epi2 = 0.0;
  double total_return = 0.0;
  bool aborted = false;
};

struct Evaluation {
  std::vector<RunSummary> runs;
  std::vector<EpisodeResult> episodes;
};

// n runs with seeds split_seed(cfg.seed, i).
Evaluation evaluate(const RunConfig& cfg, PolicyKind policy, const sac::SacAgent* agent,
                    int n_runs, int horizon_steps);

struct SmallGain {
  std::optional<double> k_L;
  std::optional<double> k_R;
  std::optional<double> product;
  std::string verdict;  // "stable-indicated", "not-indicated" or "undefined"
};

// k_L = max ||e_x|| / max ||e_Pi||,  k_R = max ||e_Pi|| / max ||Pi_c||, over all logs.
// e_Pi below 1e-12 max ||Pi_c|| is treated as exact realisation (k_R = 0).
SmallGain small_gain_diagnostic(const std::vector<pendulum::EpisodeLog>& logs);

struct VdacSeries {
  std::vector<double> V1;
  std::vector<double> Vdac;
  double fraction_decreasing = 0.0;
};

// V_DAC = 0.5 e^T P e + 0.5 e_Pi^T e_Pi per logged step, plus the final state.
VdacSeries vdac_monitor(const pendulum::EpisodeLog& log, const Matrix& P);

struct PeWindow {
  double t_end = 0.0;
  double eig_min = 0.0;
  double eig_max = 0.0;
};

// Gram metrics over consecutive windows of `window_steps` regressor samples.
std::vector<PeWindow> pe_windows(const std::vector<Matrix>& regressors, double dt,
                                 int window_steps);

struct GainSet {
  double k21 = 0.0;
  double k2 = 0.0;
};

struct SweepEntry {
  GainSet gains;
  std::vector<std::complex<double>> eigenvalues;
  Evaluation evaluation;
};

std::vector<SweepEntry> sweep_gains(const RunConfig& cfg, const std::vector<GainSet>& sets,
                                    PolicyKind policy, const sac::SacAgent* agent, int n_runs,
                                    int horizon_steps);

}  // namespace dacph::harness
