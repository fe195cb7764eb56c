#include "dacph/excitation/excitation.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

#include "dacph/ph/errors.hpp"

namespace dacph::excitation {

void PESignalConfig::validate() const {
  if (amplitudes.empty()) throw ConfigError("pe.amplitudes", "need at least one component");
  if (frequencies.size() != amplitudes.size() || phases.size() != amplitudes.size()) {
    throw ConfigError("pe.frequencies", "amplitudes, frequencies and phases differ in length");
  }
  for (std::size_t i = 0; i < frequencies.size(); ++i) {
    for (std::size_t j = i + 1; j < frequencies.size(); ++j) {
      if (frequencies[i] == frequencies[j]) {
        throw ConfigError("pe.frequencies", "frequencies must be distinct");
      }
    }
  }
  if (!(epsilon0 >= 0.0)) throw ConfigError("pe.epsilon0", "must be non-negative");
  if (!(decay_rate >= 0.0)) throw ConfigError("pe.decay_rate", "must be non-negative");
}

double PESignalConfig::envelope(double t) const { return epsilon0 * std::exp(-decay_rate * t); }

double PESignalConfig::bound() const {
  double s = 0.0;
  for (double a : amplitudes) s += std::abs(a);
  return epsilon0 * s;
}

double pe_signal(const PESignalConfig& cfg, double t) {
  if (t < 0.0) throw std::invalid_argument("pe_signal: t must be non-negative");
  double sum = 0.0;
  for (std::size_t i = 0; i < cfg.amplitudes.size(); ++i) {
    sum += cfg.amplitudes[i] * std::sin(cfg.frequencies[i] * t + cfg.phases[i]);
  }
  return cfg.envelope(t) * sum;
}

PEMetric pe_gram(const std::vector<Matrix>& phi_samples, double dt, double threshold) {
  if (phi_samples.size() < 2) throw std::invalid_argument("pe_gram: need at least two samples");
  if (!(dt > 0.0)) throw std::invalid_argument("pe_gram: dt must be positive");
  const auto rows = phi_samples.front().rows();
  const auto cols = phi_samples.front().cols();
  Matrix gram = Matrix::Zero(cols, cols);
  for (std::size_t k = 0; k < phi_samples.size(); ++k) {
    const auto& phi = phi_samples[k];
    if (phi.rows() != rows || phi.cols() != cols) {
      throw DimensionError("pe_gram: ragged regressor samples");
    }
    const double w = (k == 0 || k + 1 == phi_samples.size()) ? 0.5 : 1.0;
    gram.noalias() += (w * dt) * (phi.transpose() * phi);
  }
  gram = 0.5 * (gram + gram.transpose());

  PEMetric metric;
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
  metric.gram = gram;
  metric.eig_min = es.eigenvalues().minCoeff();
  metric.eig_max = es.eigenvalues().maxCoeff();
  metric.window = dt * static_cast<double>(phi_samples.size() - 1);
  metric.persistently_exciting = metric.eig_min > threshold;
  return metric;
}

double pe_reward(const Matrix& phi_window, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("pe_reward: beta must be positive");
  return beta * phi_window.squaredNorm();
}

Matrix stack_regressors(const std::vector<Matrix>& samples) {
  if (samples.empty()) return Matrix();
  const auto rows = samples.front().rows();
  const auto cols = samples.front().cols();
  Matrix out(rows * static_cast<Eigen::Index>(samples.size()), cols);
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (samples[k].rows() != rows || samples[k].cols() != cols) {
      throw DimensionError("stack_regressors: ragged regressor samples");
    }
    out.middleRows(static_cast<Eigen::Index>(k) * rows, rows) = samples[k];
  }
  return out;
}

}  // namespace dacph::excitation
