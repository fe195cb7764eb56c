#include "dacph/safety/shield.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "dacph/ph/errors.hpp"

namespace dacph::safety {

namespace {

// a^T u >= b
struct LinearConstraint {
  Vector a;
  double b;
};

constexpr int kMaxIterations = 12;
constexpr double kSlopeEps = 1e-14;

Vector clamp_box(const Vector& u, const Vector& lo, const Vector& hi) {
  return u.cwiseMax(lo).cwiseMin(hi);
}

void check_signal(const SafetySignal& s) {
  if (!s.x.allFinite() || !s.pi.allFinite()) {
    throw NumericError("shield_qp", "predictor returned a non-finite signal");
  }
}

// Every subset of {0..k-1} with size <= max_size, in lexicographic order.
void for_each_subset(int k, int max_size, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> subset;
  std::function<void(int)> rec = [&](int start) {
    fn(subset);
    if (static_cast<int>(subset.size()) == max_size) return;
    for (int i = start; i < k; ++i) {
      subset.push_back(i);
      rec(i + 1);
      subset.pop_back();
    }
  };
  rec(0);
}

std::vector<LinearConstraint> with_box(const std::vector<LinearConstraint>& cons,
                                       const Vector& lo, const Vector& hi) {
  std::vector<LinearConstraint> all = cons;
  const auto m = lo.size();
  for (Eigen::Index j = 0; j < m; ++j) {
    all.push_back({Vector::Unit(m, j), lo(j)});
    all.push_back({-Vector::Unit(m, j), -hi(j)});
  }
  return all;
}

bool satisfies(const std::vector<LinearConstraint>& cons, const Vector& u, double tol) {
  for (const auto& c : cons) {
    if (c.a.dot(u) < c.b - tol * (1.0 + std::abs(c.b))) return false;
  }
  return true;
}

std::optional<Vector> project_interval(double target, const std::vector<LinearConstraint>& cons,
                                       double lo, double hi) {
  double left = lo;
  double right = hi;
  for (const auto& c : cons) {
    const double a = c.a(0);
    if (a > kSlopeEps) {
      left = std::max(left, c.b / a);
    } else if (a < -kSlopeEps) {
      right = std::min(right, c.b / a);
    } else if (c.b > 0.0) {
      return std::nullopt;
    }
  }
  if (left > right) return std::nullopt;
  Vector u(1);
  u(0) = std::clamp(target, left, right);
  return u;
}

std::optional<Vector> project_active_set(const Vector& target,
                                         const std::vector<LinearConstraint>& cons,
                                         const Vector& lo, const Vector& hi) {
  const auto all = with_box(cons, lo, hi);
  const int m = static_cast<int>(target.size());
  std::optional<Vector> best;
  double best_dist = std::numeric_limits<double>::infinity();
  for_each_subset(static_cast<int>(all.size()), m, [&](const std::vector<int>& active) {
    Vector u = target;
    if (!active.empty()) {
      Matrix A(active.size(), m);
      Vector b(active.size());
      for (std::size_t r = 0; r < active.size(); ++r) {
        A.row(r) = all[active[r]].a.transpose();
        b(r) = all[active[r]].b;
      }
      const Matrix gram = A * A.transpose();
      Eigen::FullPivLU<Matrix> lu(gram);
      if (!lu.isInvertible()) return;
      u = target - A.transpose() * lu.solve(A * target - b);
    }
    if (!satisfies(all, u, 1e-10)) return;
    const double dist = (u - target).squaredNorm();
    if (dist < best_dist) {
      best_dist = dist;
      best = u;
    }
  });
  return best;
}

double worst_residual(const std::vector<LinearConstraint>& cons, const Vector& u) {
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& c : cons) worst = std::min(worst, c.a.dot(u) - c.b);
  return worst;
}

// argmax_u min_i (a_i^T u - b_i) over the box; ties broken by distance to target.
Vector maximize_worst(const Vector& target, const std::vector<LinearConstraint>& cons,
                      const Vector& lo, const Vector& hi) {
  const int m = static_cast<int>(target.size());
  std::vector<Vector> candidates;
  if (m == 1) {
    candidates.push_back(lo);
    candidates.push_back(hi);
    for (std::size_t i = 0; i < cons.size(); ++i) {
      for (std::size_t j = i + 1; j < cons.size(); ++j) {
        const double da = cons[i].a(0) - cons[j].a(0);
        if (std::abs(da) <= kSlopeEps) continue;
        const double u = (cons[i].b - cons[j].b) / da;
        if (u >= lo(0) && u <= hi(0)) candidates.push_back(Vector::Constant(1, u));
      }
    }
  } else {
    // Vertices of the LP  max s  s.t.  a_i^T u - s >= b_i,  u in box.
    std::vector<std::pair<Vector, double>> rows;  // (coefficients over [u; s], rhs)
    for (const auto& c : cons) {
      Vector row(m + 1);
      row << c.a, -1.0;
      rows.emplace_back(row, c.b);
    }
    for (int j = 0; j < m; ++j) {
      Vector row = Vector::Zero(m + 1);
      row(j) = 1.0;
      rows.emplace_back(row, lo(j));
      rows.emplace_back(-row, -hi(j));
    }
    const int k = static_cast<int>(rows.size());
    for_each_subset(k, m + 1, [&](const std::vector<int>& active) {
      if (static_cast<int>(active.size()) != m + 1) return;
      Matrix A(m + 1, m + 1);
      Vector b(m + 1);
      for (int r = 0; r <= m; ++r) {
        A.row(r) = rows[active[r]].first.transpose();
        b(r) = rows[active[r]].second;
      }
      Eigen::FullPivLU<Matrix> lu(A);
      if (!lu.isInvertible()) return;
      const Vector sol = lu.solve(b);
      const Vector u = sol.head(m);
      if ((u.array() < lo.array() - 1e-10).any() || (u.array() > hi.array() + 1e-10).any()) return;
      candidates.push_back(clamp_box(u, lo, hi));
    });
    candidates.push_back(clamp_box(target, lo, hi));
  }
  Vector best = candidates.front();
  double best_val = -std::numeric_limits<double>::infinity();
  double best_dist = std::numeric_limits<double>::infinity();
  for (const auto& u : candidates) {
    const double val = worst_residual(cons, u);
    const double dist = (u - target).squaredNorm();
    if (val > best_val + 1e-15 || (std::abs(val - best_val) <= 1e-15 && dist < best_dist)) {
      best = u;
      best_val = val;
      best_dist = dist;
    }
  }
  return best;
}

std::vector<double> residuals_at(const SafetySpec& spec, const SafetySignal& current,
                                 const SafetySignal& next) {
  std::vector<double> r;
  r.reserve(spec.barriers.size());
  for (const auto& b : spec.barriers) r.push_back(cbf_residual(b, current, next, spec.gamma));
  return r;
}

}  // namespace

void SafetySpec::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma_cbf", "must lie in (0, 1)");
  if (!(beta > 0.0)) throw ConfigError("beta", "must be positive");
  if (box_lo.size() != box_hi.size() || box_lo.size() == 0) {
    throw ConfigError("torque_box", "lower and upper bounds must have equal non-zero length");
  }
  if ((box_lo.array() > box_hi.array()).any()) {
    throw ConfigError("torque_box", "empty box (lo > hi)");
  }
  for (const auto& b : barriers) {
    if (!b.h) throw ConfigError("barrier " + b.name, "missing barrier function");
  }
}

double cbf_residual(const Barrier& barrier, const SafetySignal& s_k, const SafetySignal& s_next,
                    double gamma) {
  return barrier(s_next) - (1.0 - gamma) * barrier(s_k);
}

ShieldResult shield_qp(const ControlInput& u_nom, const Vector& delta_u,
                       const SafetySignal& current, const Predictor& predictor,
                       const SafetySpec& spec) {
  spec.validate();
  const auto m = spec.box_lo.size();
  if (u_nom.u.size() != m || delta_u.size() != m) {
    throw DimensionError("shield_qp: input, excitation and box must share a dimension");
  }
  const Vector target = u_nom.u + delta_u;
  if (!target.allFinite()) throw NumericError("shield_qp", "non-finite nominal input");

  ShieldResult result;
  Vector u = clamp_box(target, spec.box_lo, spec.box_hi);

  auto predict = [&](const Vector& v) {
    SafetySignal s = predictor(v);
    check_signal(s);
    return s;
  };

  auto finish = [&](const Vector& v, const SafetySignal& next) {
    result.u_applied.u = v;
    result.active = (v.array() != target.array()).any();
    result.cbf_residuals = residuals_at(spec, current, next);
    return result;
  };

  if (spec.barriers.empty()) return finish(u, SafetySignal{current.x, current.pi});

  SafetySignal next = predict(u);
  auto r = residuals_at(spec, current, next);
  if (std::all_of(r.begin(), r.end(), [](double v) { return v >= 0.0; })) {
    return finish(u, next);
  }

  const double box_width = (spec.box_hi - spec.box_lo).cwiseAbs().maxCoeff();
  Vector u_lin = u;
  for (int iter = 0; iter < kMaxIterations; ++iter) {
    result.iterations = iter + 1;
    const SafetySignal base = predict(u_lin);
    const auto r0 = residuals_at(spec, current, base);
    std::vector<Vector> grads(spec.barriers.size(), Vector::Zero(m));
    for (Eigen::Index j = 0; j < m; ++j) {
      double du = 1e-6 * (1.0 + std::max(std::abs(u_lin(j)), box_width));
      // step inward when sitting on the upper bound
      if (u_lin(j) + du > spec.box_hi(j) && u_lin(j) - du >= spec.box_lo(j)) du = -du;
      Vector probe = u_lin;
      probe(j) += du;
      const auto rj = residuals_at(spec, current, predict(probe));
      for (std::size_t i = 0; i < spec.barriers.size(); ++i) grads[i](j) = (rj[i] - r0[i]) / du;
    }
    std::vector<LinearConstraint> cons;
    for (std::size_t i = 0; i < spec.barriers.size(); ++i) {
      cons.push_back({grads[i], grads[i].dot(u_lin) - r0[i]});
    }

    std::optional<Vector> sol =
        m == 1 ? project_interval(target(0), cons, spec.box_lo(0), spec.box_hi(0))
               : project_active_set(target, cons, spec.box_lo, spec.box_hi);
    Vector u_new;
    if (sol) {
      u_new = clamp_box(*sol, spec.box_lo, spec.box_hi);
      result.feasible = true;
    } else {
      u_new = maximize_worst(target, cons, spec.box_lo, spec.box_hi);
      result.feasible = false;
    }
    const double step = (u_new - u_lin).norm();
    u_lin = u_new;
    if (step <= 1e-12 * (1.0 + u_lin.norm())) break;
  }
  return finish(u_lin, predict(u_lin));
}

double soft_penalty(const Barrier& barrier, const SafetySignal& s, double beta) {
  return -beta * std::max(0.0, barrier.soft_margin - barrier(s));
}

double soft_penalty(const SafetySpec& spec, const SafetySignal& s) {
  double total = 0.0;
  for (const auto& b : spec.barriers) total += soft_penalty(b, s, spec.beta);
  return total;
}

}  // namespace dacph::safety
