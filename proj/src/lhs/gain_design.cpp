#include "dacph/lhs/gain_design.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>
#include <sstream>

#include "dacph/ph/errors.hpp"

namespace dacph::lhs {

std::string HurwitzReport::describe() const {
  std::ostringstream os;
  os << "eigenvalues {";
  for (std::size_t i = 0; i < eigenvalues.size(); ++i) {
    if (i) os << ", ";
    os << eigenvalues[i].real();
    if (eigenvalues[i].imag() != 0.0) os << (eigenvalues[i].imag() > 0 ? "+" : "") << eigenvalues[i].imag() << "i";
  }
  os << "} " << (hurwitz ? "Hurwitz" : "not Hurwitz");
  return os.str();
}

HurwitzReport verify_hurwitz(const Matrix& K) {
  if (K.rows() != K.cols() || K.rows() == 0) {
    throw DimensionError("verify_hurwitz: matrix must be square and non-empty");
  }
  HurwitzReport report;
  if (K.rows() == 1) {
    report.eigenvalues = {std::complex<double>(K(0, 0), 0.0)};
  } else if (K.rows() == 2) {
    const double half_trace = 0.5 * (K(0, 0) + K(1, 1));
    const double det = K(0, 0) * K(1, 1) - K(0, 1) * K(1, 0);
    const double disc = half_trace * half_trace - det;
    if (disc >= 0.0) {
      const double root = std::sqrt(disc);
      report.eigenvalues = {{half_trace + root, 0.0}, {half_trace - root, 0.0}};
    } else {
      const double root = std::sqrt(-disc);
      report.eigenvalues = {{half_trace, root}, {half_trace, -root}};
    }
  } else {
    Eigen::EigenSolver<Matrix> es(K, false);
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
      report.eigenvalues.push_back(es.eigenvalues()(i));
    }
  }
  report.hurwitz = true;
  for (const auto& l : report.eigenvalues) {
    if (!(l.real() < 0.0)) report.hurwitz = false;
  }
  return report;
}

Matrix solve_lyapunov(const Matrix& K, const Matrix& W) {
  const auto n = K.rows();
  if (K.cols() != n || W.rows() != n || W.cols() != n) {
    throw DimensionError("solve_lyapunov: K and W must be square of equal size");
  }
  // vec(K^T P + P K) = (I kron K^T + K^T kron I) vec(P), column-major vec.
  const Matrix I = Matrix::Identity(n, n);
  const Matrix Kt = K.transpose();
  Matrix A = Matrix::Zero(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      A.block(i * n, j * n, n, n) += I(i, j) * Kt;
      A.block(i * n, j * n, n, n) += Kt(i, j) * I;
    }
  }
  const Vector rhs = -Eigen::Map<const Vector>(W.data(), n * n);
  const Vector p = A.fullPivLu().solve(rhs);
  Matrix P = Eigen::Map<const Matrix>(p.data(), n, n);
  return 0.5 * (P + P.transpose());
}

GainConfig design_structured_gain(const ph::PhModel& model, const ph::PhParams& theta,
                                  const GainRequest& request) {
  const auto n = model.dim_state;
  if (request.free_rows.rows() != n || request.free_rows.cols() != n) {
    throw DimensionError("design_structured_gain: free_rows must be n x n");
  }
  if (static_cast<int>(request.pinned.size()) != n) {
    throw DimensionError("design_structured_gain: pinned mask must have length n");
  }

  auto conservative = [&](const Vector& x) -> Vector {
    return model.J(x, theta.theta) * model.grad_H(x, theta.theta);
  };

  Matrix Ks = request.free_rows;
  const Vector f0 = conservative(Vector::Zero(n));
  std::mt19937_64 rng(0x5eedULL);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  std::vector<Vector> probes;
  for (int k = 0; k < 16; ++k) {
    Vector x(n);
    for (int i = 0; i < n; ++i) x(i) = unif(rng);
    probes.push_back(x);
  }

  for (int row = 0; row < n; ++row) {
    if (!request.pinned[row]) continue;
    if (std::abs(f0(row)) > 1e-12) {
      throw GainDesignError("pinned row " + std::to_string(row) +
                                " of J gradH has a constant offset; cannot cancel it linearly",
                            {});
    }
    for (int j = 0; j < n; ++j) {
      Ks(row, j) = conservative(Vector::Unit(n, j))(row);
    }
    for (const auto& x : probes) {
      const double f = conservative(x)(row);
      const double lin = Ks.row(row).dot(x);
      if (std::abs(f - lin) > 1e-9 * (1.0 + std::abs(f))) {
        throw GainDesignError("pinned row " + std::to_string(row) +
                                  " of J gradH is not a linear form in x",
                              {});
      }
    }
  }

  auto report = verify_hurwitz(Ks);
  if (!report.hurwitz) {
    throw GainDesignError("structured gain is not Hurwitz: " + report.describe(), report);
  }

  GainConfig gains;
  gains.Ks = Ks;
  gains.W = request.W.size() ? request.W : Matrix::Identity(n, n);
  gains.P = solve_lyapunov(Ks, gains.W);
  gains.KI = request.KI.size() ? request.KI : Matrix::Zero(n, n);
  if (gains.KI.rows() != n || gains.KI.cols() != n) {
    throw DimensionError("design_structured_gain: KI must be n x n");
  }
  return gains;
}

}  // namespace dacph::lhs
