#pragma once

#include <Eigen/Dense>
#include <vector>

namespace dacph::excitation {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// delta_u(t) = eps(t) * sum_i a_i sin(w_i t + phi_i),  eps(t) = eps0 exp(-r t).
struct PESignalConfig {
  std::vector<double> amplitudes{1.0, 1.0};
  std::vector<double> frequencies{1.0, 1.4142135623730951};
  std::vector<double> phases{0.0, 0.0};
  double epsilon0 = 1.0;
  double decay_rate = 0.0;

  // Throws ConfigError: M >= 1, equal lengths, distinct frequencies,
  // eps0 >= 0, decay_rate >= 0.
  void validate() const;

  double envelope(double t) const;
  // eps(0) * sum |a_i|
  double bound() const;
};

double pe_signal(const PESignalConfig& cfg, double t);

struct PEMetric {
  Matrix gram;        // p x p, integral of phi^T phi over the window
  double eig_min = 0.0;
  double eig_max = 0.0;
  double window = 0.0;
  bool persistently_exciting = false;
};

// Trapezoidal approximation of the integral of phi(t)^T phi(t) for samples
// spaced dt apart. Each sample is n x p; row-vector samples (1 x p) cover the
// plain vector case. PE verdict is eig_min > threshold.
PEMetric pe_gram(const std::vector<Matrix>& phi_samples, double dt, double threshold = 1e-6);

// R^PE = beta * tr(Phi^T Phi) for the stacked regressor window.
double pe_reward(const Matrix& phi_window, double beta);

// Vertically stacks equally shaped regressor samples into one window matrix.
Matrix stack_regressors(const std::vector<Matrix>& samples);

}  // namespace dacph::excitation
