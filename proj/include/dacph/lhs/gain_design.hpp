#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <vector>

#include "dacph/ph/ph_model.hpp"

namespace dacph::lhs {

using ph::Matrix;
using ph::Vector;

// Feedback gains of the conservative-flow controller.
//   Ks : state feedback, Hurwitz
//   P  : Lyapunov certificate solving Ks^T P + P Ks = -W
//   KI : integrator gain (zero when the integrator is off)
struct GainConfig {
  Matrix Ks;
  Matrix P;
  Matrix W;
  Matrix KI;
};

struct HurwitzReport {
  std::vector<std::complex<double>> eigenvalues;
  bool hurwitz = false;

  std::string describe() const;
};

// Eigenvalues of a square matrix and whether every real part is negative.
// 2x2 matrices use the trace/determinant closed form, larger ones Eigen's
// Hessenberg-QR eigensolver.
HurwitzReport verify_hurwitz(const Matrix& K);

// Solves K^T P + P K = -W through the Kronecker-vectorised linear system.
Matrix solve_lyapunov(const Matrix& K, const Matrix& W);

// Requested structured gain. Rows flagged in `pinned` are the port
// components the dissipative side cannot actuate; their gain rows are derived
// from the model so that the commanded port component vanishes identically.
// Rows not pinned are copied from `free_rows`.
struct GainRequest {
  Matrix free_rows;
  std::vector<bool> pinned;
  Matrix W;   // defaults to identity when empty
  Matrix KI;  // defaults to zero when empty
};

class GainDesignError : public std::invalid_argument {
 public:
  GainDesignError(const std::string& what, HurwitzReport report)
      : std::invalid_argument(what), report_(std::move(report)) {}
  const HurwitzReport& report() const { return report_; }

 private:
  HurwitzReport report_;
};

// Throws GainDesignError when the assembled gain is not Hurwitz or a pinned
// row of J gradH is not a linear form in x.
GainConfig design_structured_gain(const ph::PhModel& model, const ph::PhParams& theta,
                                  const GainRequest& request);

}  // namespace dacph::lhs
