#include "dacph/sac/adam.hpp"

#include <cmath>

#include "dacph/ph/errors.hpp"

namespace dacph::sac {

void adam_update(std::span<double> params, std::span<const double> grads,
                 std::span<double> first_moment, std::span<double> second_moment,
                 std::int64_t step, const AdamConfig& cfg) {
  const std::size_t n = params.size();
  if (grads.size() != n || first_moment.size() != n || second_moment.size() != n) {
    throw DimensionError("adam_update: parameter, gradient and moment sizes differ");
  }
  if (step < 1) throw std::invalid_argument("adam_update: step count starts at 1");
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grads[i];
    first_moment[i] = cfg.beta1 * first_moment[i] + (1.0 - cfg.beta1) * g;
    second_moment[i] = cfg.beta2 * second_moment[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = first_moment[i] / c1;
    const double v_hat = second_moment[i] / c2;
    params[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

AdamOptimizer::AdamOptimizer(const Mlp& net, AdamConfig cfg) : cfg_(cfg) {
  for (const auto& L : net.layers()) {
    m_w_.push_back(Matrix::Zero(L.W.rows(), L.W.cols()));
    v_w_.push_back(Matrix::Zero(L.W.rows(), L.W.cols()));
    m_b_.push_back(Vector::Zero(L.b.size()));
    v_b_.push_back(Vector::Zero(L.b.size()));
  }
}

void AdamOptimizer::step(Mlp& net, const MlpGradients& grads) {
  auto& layers = net.layers();
  if (layers.size() != m_w_.size() || grads.dW.size() != layers.size()) {
    throw DimensionError("AdamOptimizer: network does not match optimizer state");
  }
  ++step_;
  auto span_of = [](auto& m) { return std::span<double>(m.data(), static_cast<std::size_t>(m.size())); };
  auto cspan_of = [](const auto& m) {
    return std::span<const double>(m.data(), static_cast<std::size_t>(m.size()));
  };
  for (std::size_t i = 0; i < layers.size(); ++i) {
    adam_update(span_of(layers[i].W), cspan_of(grads.dW[i]), span_of(m_w_[i]), span_of(v_w_[i]),
                step_, cfg_);
    adam_update(span_of(layers[i].b), cspan_of(grads.db[i]), span_of(m_b_[i]), span_of(v_b_[i]),
                step_, cfg_);
  }
}

void ScalarAdam::update(double& param, double grad) {
  ++step;
  adam_update(std::span<double>(&param, 1), std::span<const double>(&grad, 1),
              std::span<double>(&m, 1), std::span<double>(&v, 1), step, cfg);
}

}  // namespace dacph::sac
