#include "dacph/sac/agent.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dacph/ph/errors.hpp"

namespace dacph::sac {

namespace {

constexpr char kMagic[8] = {'D', 'A', 'C', 'P', 'H', 'S', 'A', 'C'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

void write_matrix(std::ostream& os, const Matrix& m) {
  write_pod<std::int64_t>(os, m.rows());
  write_pod<std::int64_t>(os, m.cols());
  os.write(reinterpret_cast<const char*>(m.data()),
           static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
}

Matrix read_matrix(std::istream& is) {
  const auto rows = read_pod<std::int64_t>(is);
  const auto cols = read_pod<std::int64_t>(is);
  if (rows < 0 || cols < 0 || rows * cols > (1LL << 32)) {
    throw std::runtime_error("checkpoint: corrupt matrix header");
  }
  Matrix m(rows, cols);
  is.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
  if (!is) throw std::runtime_error("checkpoint: truncated matrix");
  return m;
}

void write_vector(std::ostream& os, const Vector& v) { write_matrix(os, v); }
Vector read_vector(std::istream& is) {
  Matrix m = read_matrix(is);
  if (m.cols() != 1 && m.size() != 0) throw std::runtime_error("checkpoint: expected a vector");
  return Eigen::Map<Vector>(m.data(), m.size());
}

void write_mlp(std::ostream& os, const Mlp& net) {
  write_pod<std::int32_t>(os, static_cast<std::int32_t>(net.hidden_activation()));
  write_pod<std::int64_t>(os, static_cast<std::int64_t>(net.layers().size()));
  for (const auto& L : net.layers()) {
    write_matrix(os, L.W);
    write_vector(os, L.b);
  }
}

Mlp read_mlp(std::istream& is) {
  const auto act = static_cast<Activation>(read_pod<std::int32_t>(is));
  const auto n = read_pod<std::int64_t>(is);
  if (n <= 0 || n > 64) throw std::runtime_error("checkpoint: corrupt network header");
  std::vector<DenseLayer> layers;
  std::vector<int> sizes;
  for (std::int64_t i = 0; i < n; ++i) {
    DenseLayer L{read_matrix(is), read_vector(is)};
    if (i == 0) sizes.push_back(static_cast<int>(L.W.cols()));
    sizes.push_back(static_cast<int>(L.W.rows()));
    layers.push_back(std::move(L));
  }
  Mlp net = Mlp::zeros(sizes, act);
  net.layers() = std::move(layers);
  return net;
}

void write_adam_cfg(std::ostream& os, const AdamConfig& c) {
  write_pod(os, c.lr);
  write_pod(os, c.beta1);
  write_pod(os, c.beta2);
  write_pod(os, c.eps);
}

AdamConfig read_adam_cfg(std::istream& is) {
  AdamConfig c;
  c.lr = read_pod<double>(is);
  c.beta1 = read_pod<double>(is);
  c.beta2 = read_pod<double>(is);
  c.eps = read_pod<double>(is);
  return c;
}

void write_adam(std::ostream& os, const AdamOptimizer& opt) {
  write_adam_cfg(os, opt.config());
  write_pod<std::int64_t>(os, opt.steps());
  write_pod<std::int64_t>(os, static_cast<std::int64_t>(opt.first_weights().size()));
  for (std::size_t i = 0; i < opt.first_weights().size(); ++i) {
    write_matrix(os, opt.first_weights()[i]);
    write_matrix(os, opt.second_weights()[i]);
    write_vector(os, opt.first_biases()[i]);
    write_vector(os, opt.second_biases()[i]);
  }
}

AdamOptimizer read_adam(std::istream& is, const Mlp& net) {
  const AdamConfig cfg = read_adam_cfg(is);
  AdamOptimizer opt(net, cfg);
  opt.set_steps(read_pod<std::int64_t>(is));
  const auto n = read_pod<std::int64_t>(is);
  if (n != static_cast<std::int64_t>(net.layers().size())) {
    throw std::runtime_error("checkpoint: optimizer does not match network");
  }
  for (std::int64_t i = 0; i < n; ++i) {
    opt.first_weights()[i] = read_matrix(is);
    opt.second_weights()[i] = read_matrix(is);
    opt.first_biases()[i] = read_vector(is);
    opt.second_biases()[i] = read_vector(is);
  }
  return opt;
}

void write_string(std::ostream& os, const std::string& s) {
  write_pod<std::uint64_t>(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
  const auto n = read_pod<std::uint64_t>(is);
  if (n > (1u << 20)) throw std::runtime_error("checkpoint: corrupt string");
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw std::runtime_error("checkpoint: truncated string");
  return s;
}

bool same(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

bool same(const Mlp& a, const Mlp& b) {
  if (a.layers().size() != b.layers().size()) return false;
  for (std::size_t i = 0; i < a.layers().size(); ++i) {
    if (!same(a.layers()[i].W, b.layers()[i].W) || !same(a.layers()[i].b, b.layers()[i].b)) {
      return false;
    }
  }
  return a.hidden_activation() == b.hidden_activation();
}

bool same(const AdamOptimizer& a, const AdamOptimizer& b) {
  if (a.steps() != b.steps() || a.first_weights().size() != b.first_weights().size()) return false;
  for (std::size_t i = 0; i < a.first_weights().size(); ++i) {
    if (!same(a.first_weights()[i], b.first_weights()[i]) ||
        !same(a.second_weights()[i], b.second_weights()[i]) ||
        !same(a.first_biases()[i], b.first_biases()[i]) ||
        !same(a.second_biases()[i], b.second_biases()[i])) {
      return false;
    }
  }
  return true;
}

}  // namespace

void SacHyper::validate() const {
  if (!(discount > 0.0 && discount < 1.0)) throw ConfigError("sac.discount", "must lie in (0, 1)");
  if (!(target_smoothing > 0.0 && target_smoothing <= 1.0)) {
    throw ConfigError("sac.target_smoothing", "must lie in (0, 1]");
  }
  if (!(lr_actor > 0.0)) throw ConfigError("sac.lr_actor", "must be positive");
  if (!(lr_critic > 0.0)) throw ConfigError("sac.lr_critic", "must be positive");
  if (!(lr_alpha > 0.0)) throw ConfigError("sac.lr_alpha", "must be positive");
  if (batch_size <= 0) throw ConfigError("sac.batch_size", "must be positive");
  if (buffer_capacity == 0) throw ConfigError("sac.buffer_capacity", "must be positive");
  if (updates_per_step < 0) throw ConfigError("sac.updates_per_step", "must be non-negative");
  if (warmup_steps < 0) throw ConfigError("sac.warmup_steps", "must be non-negative");
  if (hidden <= 0) throw ConfigError("sac.hidden", "must be positive");
  if (!(initial_alpha > 0.0)) throw ConfigError("sac.initial_alpha", "must be positive");
  if (!(action_scale > 0.0)) throw ConfigError("sac.action_scale", "must be positive");
}

SacAgent::SacAgent(int obs_dim, int act_dim, SacHyper hyper, std::uint64_t seed)
    : obs_dim_(obs_dim), act_dim_(act_dim), hyper_(hyper), rng_(seed) {
  hyper_.validate();
  policy_ = TanhGaussianPolicy(obs_dim, act_dim, hyper_.hidden, hyper_.action_scale, rng_);
  const std::vector<int> critic_sizes{obs_dim + act_dim, hyper_.hidden, hyper_.hidden, 1};
  q1_ = Mlp(critic_sizes, rng_);
  q2_ = Mlp(critic_sizes, rng_);
  q1_target_ = q1_;
  q2_target_ = q2_;
  actor_opt_ = AdamOptimizer(policy_.trunk(), AdamConfig{hyper_.lr_actor});
  q1_opt_ = AdamOptimizer(q1_, AdamConfig{hyper_.lr_critic});
  q2_opt_ = AdamOptimizer(q2_, AdamConfig{hyper_.lr_critic});
  log_alpha_ = std::log(hyper_.initial_alpha);
  alpha_opt_.cfg = AdamConfig{hyper_.lr_alpha};
  buffer_ = ReplayBuffer(hyper_.buffer_capacity, obs_dim, act_dim);
}

double SacAgent::alpha() const { return std::exp(log_alpha_); }

PolicySample SacAgent::act(const Vector& obs) { return policy_.sample(obs, rng_); }

Vector SacAgent::act_deterministic(const Vector& obs) const { return policy_.deterministic(obs); }

Vector SacAgent::random_action() {
  std::uniform_real_distribution<double> unif(-hyper_.action_scale, hyper_.action_scale);
  Vector a(act_dim_);
  for (Eigen::Index j = 0; j < a.size(); ++j) a(j) = unif(rng_);
  return a;
}

Matrix SacAgent::draw_noise(Eigen::Index batch) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix noise(act_dim_, batch);
  for (Eigen::Index c = 0; c < batch; ++c) {
    for (Eigen::Index j = 0; j < act_dim_; ++j) noise(j, c) = normal(rng_);
  }
  return noise;
}

Matrix SacAgent::critic_input(const Matrix& obs, const Matrix& action) const {
  Matrix in(obs_dim_ + act_dim_, obs.cols());
  in.topRows(obs_dim_) = obs;
  in.bottomRows(act_dim_) = action / hyper_.action_scale;
  return in;
}

Vector SacAgent::critic_targets(const TransitionBatch& batch, const Matrix& next_noise) const {
  const auto next = policy_.forward(batch.next_obs, next_noise);
  const Matrix in = critic_input(batch.next_obs, next.action);
  const Matrix q1 = q1_target_.forward(in);
  const Matrix q2 = q2_target_.forward(in);
  const double a = alpha();
  Vector y(batch.size());
  for (Eigen::Index c = 0; c < batch.size(); ++c) {
    const double soft_value = std::min(q1(0, c), q2(0, c)) - a * next.log_prob(c);
    y(c) = batch.reward(c) + hyper_.discount * (1.0 - batch.done(c)) * soft_value;
  }
  return y;
}

CriticLoss SacAgent::critic_loss(const TransitionBatch& batch, const Matrix& next_noise,
                                 bool with_gradients) const {
  const Vector y = critic_targets(batch, next_noise);
  const Matrix in = critic_input(batch.obs, batch.action);
  MlpCache c1, c2;
  const Matrix q1 = q1_.forward(in, &c1);
  const Matrix q2 = q2_.forward(in, &c2);
  const double n = static_cast<double>(batch.size());
  const Matrix e1 = q1 - y.transpose();
  const Matrix e2 = q2 - y.transpose();
  CriticLoss out;
  out.value = e1.squaredNorm() / n + e2.squaredNorm() / n;
  out.mean_q = 0.5 * (q1.mean() + q2.mean());
  if (with_gradients) {
    out.grad_q1 = q1_.zero_gradients();
    out.grad_q2 = q2_.zero_gradients();
    q1_.backward(c1, (2.0 / n) * e1, &out.grad_q1);
    q2_.backward(c2, (2.0 / n) * e2, &out.grad_q2);
  }
  return out;
}

ActorLoss SacAgent::actor_loss(const TransitionBatch& batch, const Matrix& noise,
                               bool with_gradients) const {
  const auto pol = policy_.forward(batch.obs, noise);
  const Matrix in = critic_input(batch.obs, pol.action);
  MlpCache c1, c2;
  const Matrix q1 = q1_.forward(in, &c1);
  const Matrix q2 = q2_.forward(in, &c2);
  const auto n = batch.size();
  const double a = alpha();
  ActorLoss out;
  Matrix up1 = Matrix::Zero(1, n);
  Matrix up2 = Matrix::Zero(1, n);
  double total = 0.0;
  for (Eigen::Index c = 0; c < n; ++c) {
    const bool first = q1(0, c) <= q2(0, c);
    const double q_min = first ? q1(0, c) : q2(0, c);
    total += a * pol.log_prob(c) - q_min;
    (first ? up1 : up2)(0, c) = -1.0 / static_cast<double>(n);
  }
  out.value = total / static_cast<double>(n);
  out.mean_log_prob = pol.log_prob.mean();
  if (with_gradients) {
    const Matrix d_in = q1_.backward(c1, up1, nullptr) + q2_.backward(c2, up2, nullptr);
    const Matrix d_action = d_in.bottomRows(act_dim_) / hyper_.action_scale;
    const Vector d_log_prob = Vector::Constant(n, a / static_cast<double>(n));
    out.grad = policy_.trunk().zero_gradients();
    policy_.backward(pol, d_action, d_log_prob, &out.grad);
  }
  return out;
}

double SacAgent::alpha_loss(double mean_log_prob) const {
  return -log_alpha_ * (mean_log_prob + hyper_.target_entropy);
}

double SacAgent::alpha_gradient(double mean_log_prob) const {
  return -(mean_log_prob + hyper_.target_entropy);
}

LossReport SacAgent::sac_step(const TransitionBatch& batch) {
  LossReport report;
  const Matrix next_noise = draw_noise(batch.size());
  const CriticLoss closs = critic_loss(batch, next_noise, true);
  if (!std::isfinite(closs.value)) throw SacDivergence("critic loss is not finite");
  q1_opt_.step(q1_, closs.grad_q1);
  q2_opt_.step(q2_, closs.grad_q2);

  const Matrix noise = draw_noise(batch.size());
  const ActorLoss aloss = actor_loss(batch, noise, true);
  if (!std::isfinite(aloss.value)) throw SacDivergence("actor loss is not finite");
  actor_opt_.step(policy_.trunk(), aloss.grad);

  report.alpha_loss = alpha_loss(aloss.mean_log_prob);
  alpha_opt_.update(log_alpha_, alpha_gradient(aloss.mean_log_prob));

  q1_target_.polyak_from(q1_, hyper_.target_smoothing);
  q2_target_.polyak_from(q2_, hyper_.target_smoothing);
  ++updates_;

  if (!q1_.all_finite() || !q2_.all_finite() || !policy_.trunk().all_finite() ||
      !std::isfinite(log_alpha_)) {
    throw SacDivergence("non-finite parameters after update " + std::to_string(updates_));
  }
  report.critic_loss = closs.value;
  report.actor_loss = aloss.value;
  report.alpha = alpha();
  report.mean_q = closs.mean_q;
  report.mean_log_prob = aloss.mean_log_prob;
  return report;
}

void SacAgent::save(std::ostream& os) const {
  os.write(kMagic, sizeof(kMagic));
  write_pod(os, kCheckpointVersion);
  write_pod<std::int32_t>(os, obs_dim_);
  write_pod<std::int32_t>(os, act_dim_);
  write_pod(os, hyper_.discount);
  write_pod(os, hyper_.target_smoothing);
  write_pod(os, hyper_.lr_actor);
  write_pod(os, hyper_.lr_critic);
  write_pod(os, hyper_.lr_alpha);
  write_pod<std::int32_t>(os, hyper_.batch_size);
  write_pod<std::uint64_t>(os, hyper_.buffer_capacity);
  write_pod(os, hyper_.target_entropy);
  write_pod<std::int32_t>(os, hyper_.updates_per_step);
  write_pod<std::int32_t>(os, hyper_.warmup_steps);
  write_pod<std::int32_t>(os, hyper_.hidden);
  write_pod(os, hyper_.initial_alpha);
  write_pod(os, hyper_.action_scale);

  write_mlp(os, policy_.trunk());
  write_mlp(os, q1_);
  write_mlp(os, q2_);
  write_mlp(os, q1_target_);
  write_mlp(os, q2_target_);
  write_adam(os, actor_opt_);
  write_adam(os, q1_opt_);
  write_adam(os, q2_opt_);
  write_pod(os, log_alpha_);
  write_adam_cfg(os, alpha_opt_.cfg);
  write_pod(os, alpha_opt_.m);
  write_pod(os, alpha_opt_.v);
  write_pod<std::int64_t>(os, alpha_opt_.step);

  const auto& buf = buffer_;
  const auto filled = static_cast<Eigen::Index>(buf.size());
  write_pod<std::uint64_t>(os, buf.capacity());
  write_pod<std::uint64_t>(os, buf.size());
  write_pod<std::uint64_t>(os, buf.cursor());
  write_matrix(os, buf.obs_storage().leftCols(filled));
  write_matrix(os, buf.action_storage().leftCols(filled));
  write_vector(os, buf.reward_storage().head(filled));
  write_matrix(os, buf.next_obs_storage().leftCols(filled));
  write_vector(os, buf.done_storage().head(filled));

  std::ostringstream rng_text;
  rng_text << rng_;
  write_string(os, rng_text.str());
  write_pod<std::int64_t>(os, updates_);
  write_pod<std::int64_t>(os, env_steps_);
  if (!os) throw std::runtime_error("checkpoint: write failed");
}

void SacAgent::load(std::istream& is) {
  char magic[sizeof(kMagic)];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("checkpoint: bad magic");
  }
  const auto version = read_pod<std::uint32_t>(is);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  obs_dim_ = read_pod<std::int32_t>(is);
  act_dim_ = read_pod<std::int32_t>(is);
  hyper_.discount = read_pod<double>(is);
  hyper_.target_smoothing = read_pod<double>(is);
  hyper_.lr_actor = read_pod<double>(is);
  hyper_.lr_critic = read_pod<double>(is);
  hyper_.lr_alpha = read_pod<double>(is);
  hyper_.batch_size = read_pod<std::int32_t>(is);
  hyper_.buffer_capacity = read_pod<std::uint64_t>(is);
  hyper_.target_entropy = read_pod<double>(is);
  hyper_.updates_per_step = read_pod<std::int32_t>(is);
  hyper_.warmup_steps = read_pod<std::int32_t>(is);
  hyper_.hidden = read_pod<std::int32_t>(is);
  hyper_.initial_alpha = read_pod<double>(is);
  hyper_.action_scale = read_pod<double>(is);

  policy_ = TanhGaussianPolicy(read_mlp(is), hyper_.action_scale);
  q1_ = read_mlp(is);
  q2_ = read_mlp(is);
  q1_target_ = read_mlp(is);
  q2_target_ = read_mlp(is);
  actor_opt_ = read_adam(is, policy_.trunk());
  q1_opt_ = read_adam(is, q1_);
  q2_opt_ = read_adam(is, q2_);
  log_alpha_ = read_pod<double>(is);
  alpha_opt_.cfg = read_adam_cfg(is);
  alpha_opt_.m = read_pod<double>(is);
  alpha_opt_.v = read_pod<double>(is);
  alpha_opt_.step = read_pod<std::int64_t>(is);

  const auto capacity = read_pod<std::uint64_t>(is);
  const auto size = read_pod<std::uint64_t>(is);
  const auto cursor = read_pod<std::uint64_t>(is);
  buffer_ = ReplayBuffer(capacity, obs_dim_, act_dim_);
  const auto filled = static_cast<Eigen::Index>(size);
  buffer_.obs_storage().leftCols(filled) = read_matrix(is);
  buffer_.action_storage().leftCols(filled) = read_matrix(is);
  buffer_.reward_storage().head(filled) = read_vector(is);
  buffer_.next_obs_storage().leftCols(filled) = read_matrix(is);
  buffer_.done_storage().head(filled) = read_vector(is);
  buffer_.restore_cursor(size, cursor);

  std::istringstream rng_text(read_string(is));
  rng_text >> rng_;
  updates_ = read_pod<std::int64_t>(is);
  env_steps_ = read_pod<std::int64_t>(is);
}

void SacAgent::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path.string());
  save(os);
}

SacAgent SacAgent::load_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path.string());
  SacAgent agent;
  agent.load(is);
  return agent;
}

bool SacAgent::identical_to(const SacAgent& other) const {
  const auto& a = buffer_;
  const auto& b = other.buffer_;
  const auto filled = static_cast<Eigen::Index>(a.size());
  const bool buffers_equal =
      a.size() == b.size() && a.cursor() == b.cursor() && a.capacity() == b.capacity() &&
      same(a.obs_storage().leftCols(filled), b.obs_storage().leftCols(filled)) &&
      same(a.action_storage().leftCols(filled), b.action_storage().leftCols(filled)) &&
      same(a.reward_storage().head(filled), b.reward_storage().head(filled)) &&
      same(a.next_obs_storage().leftCols(filled), b.next_obs_storage().leftCols(filled)) &&
      same(a.done_storage().head(filled), b.done_storage().head(filled));
  return obs_dim_ == other.obs_dim_ && act_dim_ == other.act_dim_ &&
         policy_.action_scale() == other.policy_.action_scale() &&
         same(policy_.trunk(), other.policy_.trunk()) && same(q1_, other.q1_) &&
         same(q2_, other.q2_) && same(q1_target_, other.q1_target_) &&
         same(q2_target_, other.q2_target_) && same(actor_opt_, other.actor_opt_) &&
         same(q1_opt_, other.q1_opt_) && same(q2_opt_, other.q2_opt_) &&
         std::memcmp(&log_alpha_, &other.log_alpha_, sizeof(double)) == 0 &&
         alpha_opt_.m == other.alpha_opt_.m && alpha_opt_.v == other.alpha_opt_.v &&
         alpha_opt_.step == other.alpha_opt_.step && buffers_equal && rng_ == other.rng_ &&
         updates_ == other.updates_ && env_steps_ == other.env_steps_;
}

}  // namespace dacph::sac
