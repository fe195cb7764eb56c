#include "dacph/harness/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "dacph/ph/errors.hpp"

namespace dacph::harness {

using nlohmann::json;

namespace {

// Reads one JSON object, remembering which keys were consumed so leftovers
// can be rejected, and which were missing so defaults can be reported.
class Section {
 public:
  Section(json obj, std::string path, std::vector<std::string>* defaults)
      : obj_(std::move(obj)), path_(std::move(path)), defaults_(defaults) {
    if (!obj_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string key_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!obj_.contains(key)) {
      defaults_->push_back(key_path(key));
      return;
    }
    try {
      out = obj_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(key_path(key), std::string("wrong type: ") + e.what());
    }
  }

  void get_vector(const std::string& key, Vector& out) {
    std::vector<double> v(out.data(), out.data() + out.size());
    get(key, v);
    out = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
  }

  void get_matrix(const std::string& key, Matrix& out) {
    seen_.insert(key);
    if (!obj_.contains(key)) {
      defaults_->push_back(key_path(key));
      return;
    }
    std::vector<std::vector<double>> rows;
    try {
      rows = obj_.at(key).get<std::vector<std::vector<double>>>();
    } catch (const json::exception& e) {
      throw ConfigError(key_path(key), std::string("wrong type: ") + e.what());
    }
    if (rows.empty()) throw ConfigError(key_path(key), "empty matrix");
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows[0].size()) throw ConfigError(key_path(key), "ragged matrix rows");
      for (std::size_t j = 0; j < rows[i].size(); ++j) {
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
      }
    }
    out = m;
  }

  Section sub(const std::string& key) {
    seen_.insert(key);
    if (!obj_.contains(key)) return Section(json::object(), key_path(key), defaults_);
    return Section(obj_.at(key), key_path(key), defaults_);
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(key_path(it.key()), "unknown key");
    }
  }

 private:
  json obj_;
  std::string path_;
  std::vector<std::string>* defaults_;
  std::set<std::string> seen_;
};

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key, what);
}

}  // namespace

std::string to_string(ConstraintMode m) { return m == ConstraintMode::Soft ? "soft" : "hard"; }

std::string to_string(PolicyKind p) {
  switch (p) {
    case PolicyKind::Oracle: return "oracle";
    case PolicyKind::Agent: return "agent";
    case PolicyKind::Zero: return "zero";
  }
  return "oracle";
}

PolicyKind parse_policy(const std::string& s) {
  if (s == "oracle") return PolicyKind::Oracle;
  if (s == "agent") return PolicyKind::Agent;
  if (s == "zero") return PolicyKind::Zero;
  throw ConfigError("policy", "expected one of oracle, agent, zero; got '" + s + "'");
}

LhsSettings::LhsSettings() {
  KI = Matrix(2, 2);
  KI << -2.0, -1.5, -1.5, -2.0;
  adapt_gain = Vector(2);
  adapt_gain << 0.0, 20.0;
  initial_scale = Vector(2);
  initial_scale << 1.0, 1.3;
}

RunConfig::RunConfig() {
  sac.action_scale = 12.0;
  obs_scale = Vector(3);
  obs_scale << std::numbers::pi / 4.0, 2.0, 10.0;
}

void RunConfig::validate() const {
  physics.validate();
  reward.validate();
  sac.validate();
  require(substeps >= 1, "physics.substeps", "must be at least 1");
  require(std::isfinite(lhs.k21) && std::isfinite(lhs.k2), "lhs.k21", "gains must be finite");
  try {
    make_gains(*this);
  } catch (const lhs::GainDesignError& e) {
    throw ConfigError("lhs.k21", std::string("gains rejected: ") + e.what());
  }
  require(lhs.KI.rows() == 2 && lhs.KI.cols() == 2 && lhs.KI.allFinite(), "lhs.KI",
          "must be a finite 2x2 matrix");
  require(lhs.adapt_gain.size() == 2 && (lhs.adapt_gain.array() >= 0.0).all(), "lhs.adapt_gain",
          "needs two non-negative entries");
  require(lhs.initial_scale.size() == 2 && (lhs.initial_scale.array() > 0.0).all(),
          "lhs.initial_scale", "needs two positive entries");
  require(safety.gamma_cbf > 0.0 && safety.gamma_cbf < 1.0, "safety.gamma_cbf",
          "must lie in (0, 1)");
  require(safety.beta > 0.0, "safety.beta", "must be positive");
  require(safety.delta >= 0.0, "safety.delta", "must be non-negative");
  require(safety.torque_lo < safety.torque_hi, "safety.torque_box", "lower bound must be below upper");
  require(safety.brake_fraction > 0.0 && safety.brake_fraction <= 1.0, "safety.brake_fraction",
          "must lie in (0, 1]");
  require(obs_scale.size() == 3 && (obs_scale.array() > 0.0).all(), "sac.obs_scale",
          "needs three positive entries");
  pe.signal.validate();
  require(pe.beta_pe >= 0.0, "pe.beta_pe", "must be non-negative");
  require(pe.window > 0.0, "pe.window", "must be positive");
  require(pe.threshold >= 0.0, "pe.threshold", "must be non-negative");
  require(episode.train_episodes >= 1, "episode.train_episodes", "must be at least 1");
  require(episode.horizon_steps >= 1, "episode.horizon_steps", "must be at least 1");
  require(episode.eval_horizon_steps >= 1, "episode.eval_horizon_steps", "must be at least 1");
  require(episode.eval_runs >= 1, "episode.eval_runs", "must be at least 1");
  require(episode.checkpoint_every >= 0, "episode.checkpoint_every", "must be non-negative");
  require(episode.ma_window >= 1, "episode.ma_window", "must be at least 1");
  require(!output_dir.empty(), "output_dir", "must not be empty");
}

RunConfig parse_config(const json& doc) {
  RunConfig cfg;
  auto* defaults = &cfg.defaults_applied;
  Section root(doc, "", defaults);

  root.get("seed", cfg.seed);
  root.get("output_dir", cfg.output_dir);
  std::string policy = to_string(cfg.policy);
  root.get("policy", policy);
  cfg.policy = parse_policy(policy);

  auto phys = root.sub("physics");
  phys.get("mass", cfg.physics.mass);
  phys.get("length", cfg.physics.length);
  phys.get("gravity", cfg.physics.gravity);
  phys.get("damping", cfg.physics.damping);
  phys.get("dt", cfg.physics.dt);
  phys.get("substeps", cfg.substeps);
  phys.get("wrap_angle", cfg.wrap_angle);
  phys.finish();

  auto lhs = root.sub("lhs");
  lhs.get("k21", cfg.lhs.k21);
  lhs.get("k2", cfg.lhs.k2);
  lhs.get("integrator", cfg.lhs.integrator);
  lhs.get_matrix("KI", cfg.lhs.KI);
  lhs.get("adaptive", cfg.lhs.adaptive);
  lhs.get_vector("adapt_gain", cfg.lhs.adapt_gain);
  lhs.get_vector("initial_scale", cfg.lhs.initial_scale);
  lhs.finish();

  auto rew = root.sub("reward");
  rew.get("w1", cfg.reward.w1);
  rew.get("w2", cfg.reward.w2);
  rew.get("w3", cfg.reward.w3);
  rew.get("w4", cfg.reward.w4);
  rew.get("q_max", cfg.reward.q_max);
  rew.finish();

  auto saf = root.sub("safety");
  std::string mode = to_string(cfg.safety.mode);
  saf.get("mode", mode);
  if (mode == "soft") {
    cfg.safety.mode = ConstraintMode::Soft;
  } else if (mode == "hard") {
    cfg.safety.mode = ConstraintMode::Hard;
  } else {
    throw ConfigError("safety.mode", "expected soft or hard; got '" + mode + "'");
  }
  saf.get("gamma_cbf", cfg.safety.gamma_cbf);
  saf.get("beta", cfg.safety.beta);
  saf.get("delta", cfg.safety.delta);
  std::vector<double> box{cfg.safety.torque_lo, cfg.safety.torque_hi};
  saf.get("torque_box", box);
  if (box.size() != 2) throw ConfigError("safety.torque_box", "expected [lo, hi]");
  cfg.safety.torque_lo = box[0];
  cfg.safety.torque_hi = box[1];
  saf.get("brake_fraction", cfg.safety.brake_fraction);
  saf.finish();

  auto s = root.sub("sac");
  s.get("discount", cfg.sac.discount);
  s.get("target_smoothing", cfg.sac.target_smoothing);
  s.get("lr_actor", cfg.sac.lr_actor);
  s.get("lr_critic", cfg.sac.lr_critic);
  s.get("lr_alpha", cfg.sac.lr_alpha);
  s.get("batch_size", cfg.sac.batch_size);
  s.get("buffer_capacity", cfg.sac.buffer_capacity);
  s.get("target_entropy", cfg.sac.target_entropy);
  s.get("updates_per_step", cfg.sac.updates_per_step);
  s.get("warmup_steps", cfg.sac.warmup_steps);
  s.get("hidden", cfg.sac.hidden);
  s.get("initial_alpha", cfg.sac.initial_alpha);
  s.get("action_scale", cfg.sac.action_scale);
  s.get("on_policy", cfg.on_policy);
  s.get_vector("obs_scale", cfg.obs_scale);
  s.finish();

  auto pe = root.sub("pe");
  pe.get("enabled", cfg.pe.enabled);
  pe.get("amplitudes", cfg.pe.signal.amplitudes);
  pe.get("frequencies", cfg.pe.signal.frequencies);
  pe.get("phases", cfg.pe.signal.phases);
  pe.get("epsilon0", cfg.pe.signal.epsilon0);
  pe.get("decay_rate", cfg.pe.signal.decay_rate);
  pe.get("beta_pe", cfg.pe.beta_pe);
  pe.get("window", cfg.pe.window);
  pe.get("threshold", cfg.pe.threshold);
  pe.finish();

  auto ep = root.sub("episode");
  ep.get("train_episodes", cfg.episode.train_episodes);
  ep.get("horizon_steps", cfg.episode.horizon_steps);
  ep.get("eval_horizon_steps", cfg.episode.eval_horizon_steps);
  ep.get("eval_runs", cfg.episode.eval_runs);
  ep.get("checkpoint_every", cfg.episode.checkpoint_every);
  ep.get("ma_window", cfg.episode.ma_window);
  ep.finish();

  root.finish();
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot open configuration file");
  json doc;
  try {
    doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string(), std::string("parse error: ") + e.what());
  }
  return parse_config(doc);
}

json to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["policy"] = to_string(c.policy);
  j["physics"] = {{"mass", c.physics.mass},       {"length", c.physics.length},
                  {"gravity", c.physics.gravity}, {"damping", c.physics.damping},
                  {"dt", c.physics.dt},           {"substeps", c.substeps},
                  {"wrap_angle", c.wrap_angle}};
  j["lhs"] = {{"k21", c.lhs.k21},
              {"k2", c.lhs.k2},
              {"integrator", c.lhs.integrator},
              {"KI", matrix_json(c.lhs.KI)},
              {"adaptive", c.lhs.adaptive},
              {"adapt_gain", to_std(c.lhs.adapt_gain)},
              {"initial_scale", to_std(c.lhs.initial_scale)}};
  j["reward"] = {{"w1", c.reward.w1}, {"w2", c.reward.w2},     {"w3", c.reward.w3},
                 {"w4", c.reward.w4}, {"q_max", c.reward.q_max}};
  j["safety"] = {{"mode", to_string(c.safety.mode)},
                 {"gamma_cbf", c.safety.gamma_cbf},
                 {"beta", c.safety.beta},
                 {"delta", c.safety.delta},
                 {"torque_box", {c.safety.torque_lo, c.safety.torque_hi}},
                 {"brake_fraction", c.safety.brake_fraction}};
  j["sac"] = {{"discount", c.sac.discount},
              {"target_smoothing", c.sac.target_smoothing},
              {"lr_actor", c.sac.lr_actor},
              {"lr_critic", c.sac.lr_critic},
              {"lr_alpha", c.sac.lr_alpha},
              {"batch_size", c.sac.batch_size},
              {"buffer_capacity", c.sac.buffer_capacity},
              {"target_entropy", c.sac.target_entropy},
              {"updates_per_step", c.sac.updates_per_step},
              {"warmup_steps", c.sac.warmup_steps},
              {"hidden", c.sac.hidden},
              {"initial_alpha", c.sac.initial_alpha},
              {"action_scale", c.sac.action_scale},
              {"on_policy", c.on_policy},
              {"obs_scale", to_std(c.obs_scale)}};
  j["pe"] = {{"enabled", c.pe.enabled},
             {"amplitudes", c.pe.signal.amplitudes},
             {"frequencies", c.pe.signal.frequencies},
             {"phases", c.pe.signal.phases},
             {"epsilon0", c.pe.signal.epsilon0},
             {"decay_rate", c.pe.signal.decay_rate},
             {"beta_pe", c.pe.beta_pe},
             {"window", c.pe.window},
             {"threshold", c.pe.threshold}};
  j["episode"] = {{"train_episodes", c.episode.train_episodes},
                  {"horizon_steps", c.episode.horizon_steps},
                  {"eval_horizon_steps", c.episode.eval_horizon_steps},
                  {"eval_runs", c.episode.eval_runs},
                  {"checkpoint_every", c.episode.checkpoint_every},
                  {"ma_window", c.episode.ma_window}};
  return j;
}

std::string config_hash(const RunConfig& cfg) {
  const std::string canonical = to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t split_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

lhs::GainConfig make_gains(const RunConfig& cfg) {
  return pendulum::structured_gains(cfg.physics, cfg.lhs.k21, cfg.lhs.k2, cfg.lhs.KI);
}

lhs::LhsController make_controller(const RunConfig& cfg) {
  lhs::LhsController ctl(pendulum::make_pendulum(), pendulum::pendulum_theta(cfg.physics),
                         make_gains(cfg));
  ctl.enable_integrator(cfg.lhs.integrator);
  if (cfg.lhs.adaptive) {
    lhs::AdaptiveState st;
    st.flow = pendulum::adaptive_flow();
    st.theta_hat = pendulum::adaptive_theta(cfg.physics).cwiseProduct(cfg.lhs.initial_scale);
    st.Gamma = cfg.lhs.adapt_gain.asDiagonal();
    ctl.enable_adaptation(std::move(st));
  }
  return ctl;
}

pendulum::EnvConfig make_env_config(const RunConfig& cfg, int horizon_steps) {
  pendulum::EnvConfig env;
  env.params = cfg.physics;
  env.weights = cfg.reward;
  env.horizon_steps = horizon_steps;
  env.substeps = cfg.substeps;
  env.wrap_angle = cfg.wrap_angle;
  env.obs_scale = cfg.obs_scale;
  return env;
}

safety::SafetySpec make_safety_spec(const RunConfig& cfg) {
  safety::SafetySpec spec;
  spec.gamma = cfg.safety.gamma_cbf;
  spec.beta = cfg.safety.beta;
  spec.box_lo = Vector::Constant(1, cfg.safety.torque_lo);
  spec.box_hi = Vector::Constant(1, cfg.safety.torque_hi);
  const double tau_max = std::min(-cfg.safety.torque_lo, cfg.safety.torque_hi);
  spec.barriers = pendulum::angle_barriers(cfg.physics, cfg.reward.q_max, tau_max,
                                           cfg.safety.brake_fraction);
  for (auto& b : spec.barriers) b.soft_margin = cfg.safety.delta;
  return spec;
}

}  // namespace dacph::harness
