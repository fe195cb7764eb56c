#include "dacph/sac/mlp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "dacph/ph/errors.hpp"

namespace dacph::sac {

namespace {

void check_sizes(const std::vector<int>& sizes) {
  if (sizes.size() < 2) throw std::invalid_argument("Mlp: need at least input and output sizes");
  for (int s : sizes) {
    if (s <= 0) throw std::invalid_argument("Mlp: layer sizes must be positive");
  }
}

Matrix activate(const Matrix& pre, Activation act) {
  if (act == Activation::ReLU) return pre.cwiseMax(0.0);
  return pre.array().tanh().matrix();
}

// dL/dpre from dL/dpost for the hidden activation.
Matrix activation_backward(const Matrix& pre, const Matrix& upstream, Activation act) {
  if (act == Activation::ReLU) {
    return (pre.array() > 0.0).select(upstream.array(), 0.0).matrix();
  }
  const auto t = pre.array().tanh();
  return (upstream.array() * (1.0 - t * t)).matrix();
}

}  // namespace

void MlpGradients::set_zero() {
  for (auto& w : dW) w.setZero();
  for (auto& b : db) b.setZero();
}

MlpGradients& MlpGradients::operator+=(const MlpGradients& other) {
  for (std::size_t i = 0; i < dW.size(); ++i) {
    dW[i] += other.dW[i];
    db[i] += other.db[i];
  }
  return *this;
}

Mlp::Mlp(const std::vector<int>& sizes, std::mt19937_64& rng, Activation hidden)
    : hidden_(hidden) {
  check_sizes(sizes);
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes[i]));
    std::uniform_real_distribution<double> unif(-bound, bound);
    DenseLayer layer{Matrix(sizes[i + 1], sizes[i]), Vector(sizes[i + 1])};
    for (Eigen::Index c = 0; c < layer.W.cols(); ++c) {
      for (Eigen::Index r = 0; r < layer.W.rows(); ++r) layer.W(r, c) = unif(rng);
    }
    for (Eigen::Index r = 0; r < layer.b.size(); ++r) layer.b(r) = unif(rng);
    layers_.push_back(std::move(layer));
  }
}

Mlp Mlp::zeros(const std::vector<int>& sizes, Activation hidden) {
  check_sizes(sizes);
  Mlp net;
  net.hidden_ = hidden;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    net.layers_.push_back({Matrix::Zero(sizes[i + 1], sizes[i]), Vector::Zero(sizes[i + 1])});
  }
  return net;
}

Vector Mlp::forward(const Vector& input) const {
  Matrix out = forward(Matrix(input), nullptr);
  return out.col(0);
}

Matrix Mlp::forward(const Matrix& inputs, MlpCache* cache) const {
  if (layers_.empty()) throw std::logic_error("Mlp: empty network");
  if (inputs.rows() != input_size()) {
    throw DimensionError("Mlp: input has " + std::to_string(inputs.rows()) + " rows, expected " +
                         std::to_string(input_size()));
  }
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  Matrix h = inputs;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& L = layers_[i];
    Matrix z = L.W * h;
    z.colwise() += L.b;
    if (cache) cache->inputs.push_back(std::move(h));
    if (i + 1 == layers_.size()) return z;
    h = activate(z, hidden_);
    if (cache) cache->pre.push_back(std::move(z));
  }
  return h;
}

Matrix Mlp::backward(const MlpCache& cache, const Matrix& upstream, MlpGradients* grads) const {
  if (cache.inputs.size() != layers_.size()) throw std::logic_error("Mlp: cache does not match");
  if (upstream.rows() != output_size()) throw DimensionError("Mlp: upstream has wrong row count");
  Matrix delta = upstream;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const auto& L = layers_[k];
    if (grads) {
      grads->dW[k].noalias() += delta * cache.inputs[k].transpose();
      grads->db[k] += delta.rowwise().sum();
    }
    Matrix dinput = L.W.transpose() * delta;
    if (k == 0) return dinput;
    delta = activation_backward(cache.pre[k - 1], dinput, hidden_);
  }
  return delta;
}

MlpGradients Mlp::zero_gradients() const {
  MlpGradients g;
  for (const auto& L : layers_) {
    g.dW.push_back(Matrix::Zero(L.W.rows(), L.W.cols()));
    g.db.push_back(Vector::Zero(L.b.size()));
  }
  return g;
}

int Mlp::input_size() const { return layers_.empty() ? 0 : static_cast<int>(layers_.front().W.cols()); }

int Mlp::output_size() const { return layers_.empty() ? 0 : static_cast<int>(layers_.back().W.rows()); }

std::vector<int> Mlp::sizes() const {
  std::vector<int> s;
  if (layers_.empty()) return s;
  s.push_back(input_size());
  for (const auto& L : layers_) s.push_back(static_cast<int>(L.W.rows()));
  return s;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& L : layers_) n += static_cast<std::size_t>(L.W.size() + L.b.size());
  return n;
}

Vector Mlp::flatten() const {
  Vector out(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index pos = 0;
  for (const auto& L : layers_) {
    out.segment(pos, L.W.size()) = Eigen::Map<const Vector>(L.W.data(), L.W.size());
    pos += L.W.size();
    out.segment(pos, L.b.size()) = L.b;
    pos += L.b.size();
  }
  return out;
}

void Mlp::unflatten(const Vector& params) {
  if (params.size() != static_cast<Eigen::Index>(parameter_count())) {
    throw DimensionError("Mlp::unflatten: wrong parameter count");
  }
  Eigen::Index pos = 0;
  for (auto& L : layers_) {
    Eigen::Map<Vector>(L.W.data(), L.W.size()) = params.segment(pos, L.W.size());
    pos += L.W.size();
    L.b = params.segment(pos, L.b.size());
    pos += L.b.size();
  }
}

void Mlp::polyak_from(const Mlp& source, double tau) {
  if (source.layers_.size() != layers_.size()) throw DimensionError("polyak: shape mismatch");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].W = (1.0 - tau) * layers_[i].W + tau * source.layers_[i].W;
    layers_[i].b = (1.0 - tau) * layers_[i].b + tau * source.layers_[i].b;
  }
}

bool Mlp::all_finite() const {
  for (const auto& L : layers_) {
    if (!L.W.allFinite() || !L.b.allFinite()) return false;
  }
  return true;
}

Vector flatten(const MlpGradients& grads) {
  Eigen::Index n = 0;
  for (std::size_t i = 0; i < grads.dW.size(); ++i) n += grads.dW[i].size() + grads.db[i].size();
  Vector out(n);
  Eigen::Index pos = 0;
  for (std::size_t i = 0; i < grads.dW.size(); ++i) {
    out.segment(pos, grads.dW[i].size()) =
        Eigen::Map<const Vector>(grads.dW[i].data(), grads.dW[i].size());
    pos += grads.dW[i].size();
    out.segment(pos, grads.db[i].size()) = grads.db[i];
    pos += grads.db[i].size();
  }
  return out;
}

}  // namespace dacph::sac
