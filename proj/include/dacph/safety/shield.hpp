#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "dacph/ph/ph_model.hpp"

namespace dacph::safety {

using ph::ControlInput;
using ph::Matrix;
using ph::Vector;

// Snapshot of the quantities a barrier may constrain: the state and the
// realised virtual port.
struct SafetySignal {
  Vector x;
  Vector pi;
};

enum class BarrierDomain { State, Port };

struct Barrier {
  std::string name;
  BarrierDomain domain = BarrierDomain::State;
  std::function<double(const Vector&)> h;
  double soft_margin = 0.0;  // delta_i of the reward penalty

  double operator()(const SafetySignal& s) const {
    return h(domain == BarrierDomain::State ? s.x : s.pi);
  }
};

struct SafetySpec {
  std::vector<Barrier> barriers;
  double gamma = 0.5;    // class-K rate alpha(h) = gamma h, in (0, 1)
  double beta = 1.0;     // soft penalty weight
  Vector box_lo;
  Vector box_hi;

  // Throws ConfigError when gamma, beta or the box are invalid.
  void validate() const;
};

struct ShieldResult {
  ControlInput u_applied;
  bool active = false;
  bool feasible = true;
  std::vector<double> cbf_residuals;
  int iterations = 0;
};

// Maps a candidate input to the predicted next-step signal.
using Predictor = std::function<SafetySignal(const Vector& u)>;

// h(s_next) - (1 - gamma) h(s_k); non-negative iff the discrete CBF condition
// h(s_next) - h(s_k) >= -gamma h(s_k) holds.
double cbf_residual(const Barrier& barrier, const SafetySignal& s_k,
                    const SafetySignal& s_next, double gamma);

// Minimises ||u - (u_nom + delta_u)||^2 over the input box subject to the
// discrete CBF conditions of every barrier. Constraints are linearised in u
// by forward differences of the predictor and re-linearised at the current
// iterate until the step stalls. m = 1 is solved exactly on the interval;
// m > 1 by enumerating active sets. When the linearised constraints cannot
// be met inside the box the input maximising the worst residual is returned
// with feasible = false.
ShieldResult shield_qp(const ControlInput& u_nom, const Vector& delta_u,
                       const SafetySignal& current, const Predictor& predictor,
                       const SafetySpec& spec);

// R^C = -beta max(0, delta - h(s)).
double soft_penalty(const Barrier& barrier, const SafetySignal& s, double beta);

// Sum of soft penalties over every barrier of the spec.
double soft_penalty(const SafetySpec& spec, const SafetySignal& s);

}  // namespace dacph::safety
