#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>

#include "fwpd/errors.hpp"
#include "fwpd/prng.hpp"
#include "fwpd/regularizer.hpp"
#include "fwpd/sets.hpp"

namespace fwpd {

// L-smooth convex objective with first-order oracle access.
struct Objective {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  double smoothness_L = 0.0;
  int dimension = 0;
};

// f(x) = ||x - x0||^2, grad f(x) = 2 (x - x0), L = 2.
inline Objective make_distance_objective(Vector x0) {
  if (x0.size() == 0) throw ConfigError("make_distance_objective: empty target");
  if (!x0.allFinite()) throw ConfigError("make_distance_objective: target has NaN or Inf");
  auto p = std::make_shared<Vector>(std::move(x0));
  Objective f;
  f.dimension = static_cast<int>(p->size());
  f.value = [p](const Vector& x) { return (x - *p).squaredNorm(); };
  f.gradient = [p](const Vector& x) { return Vector(2.0 * (x - *p)); };
  f.smoothness_L = 2.0;
  return f;
}

// Largest eigenvalue of A^T A by power iteration on the Rayleigh quotient,
// deterministic start, relative tolerance on successive estimates.
inline double top_singular_value_sq(const Eigen::MatrixXd& A, double rel_tol = 1e-6,
                                    int max_iter = 200000) {
  const auto n = A.cols();
  Vector u(n);
  for (Eigen::Index i = 0; i < n; ++i) u[i] = 1.0 + 1e-3 * double(i % 97);
  u.normalize();
  double lambda = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Vector w = A.transpose() * (A * u);
    double norm = w.norm();
    if (norm == 0.0) return 0.0;
    double next = u.dot(w);
    u = w / norm;
    if (it > 0 && std::abs(next - lambda) <= rel_tol * std::max(1e-300, std::abs(next))) {
      return next;
    }
    lambda = next;
  }
  return lambda;
}

// f(x) = ||A x - b||^2, grad f(x) = 2 A^T (A x - b), L = 2 lambda_max(A^T A).
inline Objective make_lsq_objective(Eigen::MatrixXd A, Vector b) {
  if (A.rows() == 0 || A.cols() == 0) throw ConfigError("make_lsq_objective: empty matrix");
  if (b.size() != A.rows()) throw ConfigError("make_lsq_objective: b dimension mismatch");
  if (!A.allFinite() || !b.allFinite())
    throw ConfigError("make_lsq_objective: data has NaN or Inf");
  double lam = top_singular_value_sq(A);
  if (lam <= 0.0)
    throw DegenerateInstanceError(
        "make_lsq_objective: zero matrix gives smoothness constant 0; step rules need L > 0");
  auto pa = std::make_shared<Eigen::MatrixXd>(std::move(A));
  auto pb = std::make_shared<Vector>(std::move(b));
  Objective f;
  f.dimension = static_cast<int>(pa->cols());
  f.value = [pa, pb](const Vector& x) { return (*pa * x - *pb).squaredNorm(); };
  f.gradient = [pa, pb](const Vector& x) {
    return Vector(2.0 * (pa->transpose() * (*pa * x - *pb)));
  };
  f.smoothness_L = 2.0 * lam;
  return f;
}

// f(x) = x^T Q x + c^T x with Q symmetric positive definite,
// grad f(x) = 2 Q x + c, L = 2 lambda_max(Q).
inline Objective make_quadratic_objective(Eigen::MatrixXd Q, Vector c, double lambda_max) {
  if (Q.rows() != Q.cols() || Q.rows() == 0)
    throw ConfigError("make_quadratic_objective: Q must be square and non-empty");
  if (c.size() != Q.rows()) throw ConfigError("make_quadratic_objective: c dimension mismatch");
  if (lambda_max <= 0.0)
    throw DegenerateInstanceError("make_quadratic_objective: lambda_max must be positive");
  auto pq = std::make_shared<Eigen::MatrixXd>(std::move(Q));
  auto pc = std::make_shared<Vector>(std::move(c));
  Objective f;
  f.dimension = static_cast<int>(pq->rows());
  f.value = [pq, pc](const Vector& x) { return x.dot(*pq * x) + pc->dot(x); };
  f.gradient = [pq, pc](const Vector& x) { return Vector(2.0 * (*pq * x) + *pc); };
  f.smoothness_L = 2.0 * lambda_max;
  return f;
}

enum class ScheduleKind { fw_classic, optimistic, open_loop, dynamic };

// Iteration weights a_t with cumulative sums A_t; gamma(t) = a(t)/A(t) is the
// convex-combination mixing coefficient of step t.
class WeightSchedule {
 public:
  static WeightSchedule classic() { return WeightSchedule(ScheduleKind::fw_classic, 2, 2.0); }
  static WeightSchedule optimistic_weights() {
    return WeightSchedule(ScheduleKind::optimistic, 0, 0.0);
  }
  static WeightSchedule open_loop(int ell, double a0) {
    if (ell < 1) throw ConfigError("WeightSchedule::open_loop: ell must be >= 1");
    if (!(a0 > 0.0)) throw ConfigError("WeightSchedule::open_loop: a0 must be positive");
    return WeightSchedule(ScheduleKind::open_loop, ell, a0);
  }
  static WeightSchedule dynamic() { return WeightSchedule(ScheduleKind::dynamic, 0, 0.0); }

  ScheduleKind kind() const { return kind_; }
  int ell() const { return ell_; }
  double a0() const { return a0_; }

  // a_t: fw_classic 2t+2 for t >= 0; optimistic 2t with a_0 = 0;
  // open_loop a0 * C(t+ell-1, t) computed multiplicatively.
  double a(long t) const {
    require_closed_form("a");
    if (t < 0) return 0.0;
    switch (kind_) {
      case ScheduleKind::fw_classic:
        return 2.0 * double(t) + 2.0;
      case ScheduleKind::optimistic:
        return 2.0 * double(t);
      default: {
        double prod = a0_;
        for (int i = 1; i <= ell_ - 1; ++i) prod *= double(t + i) / double(i);
        return prod;
      }
    }
  }

  // A_t = sum_{i<=t} a_i; closed forms: (t+1)(t+2), t(t+1), a0 * C(t+ell, t).
  double A(long t) const {
    require_closed_form("A");
    if (t < 0) return 0.0;
    switch (kind_) {
      case ScheduleKind::fw_classic:
        return double(t + 1) * double(t + 2);
      case ScheduleKind::optimistic:
        return double(t) * double(t + 1);
      default: {
        double prod = a0_;
        for (int i = 1; i <= ell_; ++i) prod *= double(t + i) / double(i);
        return prod;
      }
    }
  }

  // gamma_t = a_t / A_t; open_loop reduces to ell/(t+ell) exactly.
  double gamma(long t) const {
    require_closed_form("gamma");
    if (t < 0) throw StateError("WeightSchedule::gamma: negative iteration");
    switch (kind_) {
      case ScheduleKind::fw_classic:
        return 2.0 / double(t + 2);
      case ScheduleKind::optimistic:
        return t == 0 ? 0.0 : 2.0 / double(t + 1);
      default:
        return double(ell_) / double(t + ell_);
    }
  }

 private:
  WeightSchedule(ScheduleKind k, int ell, double a0) : kind_(k), ell_(ell), a0_(a0) {}
  void require_closed_form(const char* op) const {
    if (kind_ == ScheduleKind::dynamic)
      throw StateError(std::string("WeightSchedule::") + op +
                       ": dynamic schedules have no closed form; use DynamicWeights");
  }
  ScheduleKind kind_;
  int ell_;
  double a0_;
};

// gamma = ell/(t+ell), the open-loop step size.
inline double open_loop_gamma(long t, int ell) {
  if (ell < 1) throw ConfigError("open_loop_gamma: ell must be >= 1");
  if (t < 0) throw ConfigError("open_loop_gamma: t must be >= 0");
  return double(ell) / double(t + ell);
}

// Reconstructs weights from realized step sizes: a_t = gamma_t A_{t-1} / (1 - gamma_t)
// with gamma clamped away from 1 so A_t stays finite. The first absorbed step
// fixes the scale a_0 = 1 (all downstream uses are scale-invariant).
class DynamicWeights {
 public:
  static constexpr double kGammaCap = 1.0 - 1e-12;
  // Returns a_t for the realized gamma_t.
  double absorb(double gamma) {
    if (!(gamma >= 0.0) || gamma > 1.0)
      throw StateError("DynamicWeights::absorb: gamma outside [0, 1]");
    double g = std::min(gamma, kGammaCap);
    double a = (t_ == 0) ? 1.0 : g * A_ / (1.0 - g);
    A_ += a;
    ++t_;
    return a;
  }
  double A() const { return A_; }
  long steps() const { return t_; }

 private:
  double A_ = 0.0;
  long t_ = 0;
};

struct VerifyReport {
  double max_lower_violation = 0.0;   // convexity side of the sandwich
  double max_upper_violation = 0.0;   // smoothness side of the sandwich
  double max_fd_rel_error = 0.0;      // gradient vs central finite differences
  int samples = 0;
  bool flagged = false;
};

// Random point of the set: convex combination of LMO vertices from random
// directions, mixed with normalized exponential weights.
inline Vector sample_set_point(const FeasibleSet& set, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(1e-12, 1.0);
  const int m = std::min(set.dimension() + 1, 9);
  Vector x = Vector::Zero(set.dimension());
  double wsum = 0.0;
  for (int j = 0; j < m; ++j) {
    Vector dir(set.dimension());
    for (Eigen::Index i = 0; i < dir.size(); ++i) dir[i] = gauss(rng);
    double w = -std::log(unif(rng));
    x += w * set.lmo(dir);
    wsum += w;
  }
  return x / wsum;
}

// Samples point pairs from the set and checks the convexity/smoothness
// sandwich 0 <= f(y) - f(x) - <grad f(x), y - x> <= (L/2) ||y - x||^2 plus a
// central-finite-difference gradient probe along random directions.
inline VerifyReport verify_objective(const Objective& f, const FeasibleSet& set, int samples,
                                     std::uint64_t seed) {
  if (samples < 1) throw ConfigError("verify_objective: samples must be >= 1");
  if (f.dimension != set.dimension())
    throw ConfigError("verify_objective: objective/set dimension mismatch");
  auto rng = seeded_stream(seed, "verify_objective");
  std::normal_distribution<double> gauss(0.0, 1.0);
  VerifyReport rep;
  rep.samples = samples;
  for (int s = 0; s < samples; ++s) {
    Vector x = sample_set_point(set, rng);
    Vector y = sample_set_point(set, rng);
    double fx = f.value(x), fy = f.value(y);
    Vector gx = f.gradient(x);
    double lin = fy - fx - gx.dot(y - x);
    rep.max_lower_violation = std::max(rep.max_lower_violation, -lin);
    rep.max_upper_violation =
        std::max(rep.max_upper_violation, lin - 0.5 * f.smoothness_L * (y - x).squaredNorm());
    Vector d(x.size());
    for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = gauss(rng);
    d.normalize();
    double eps = 6e-6 * (1.0 + x.norm());
    double fd = (f.value(x + eps * d) - f.value(x - eps * d)) / (2.0 * eps);
    double err = std::abs(gx.dot(d) - fd) / (1.0 + std::abs(fd));
    rep.max_fd_rel_error = std::max(rep.max_fd_rel_error, err);
  }
  double scale = 1e-6 * (1.0 + f.smoothness_L * set.diameter_sq());
  rep.flagged = rep.max_lower_violation > scale || rep.max_upper_violation > scale ||
                rep.max_fd_rel_error > 1e-5;
  return rep;
}

// A problem: objective + feasible region (through a regularizer) + optional
// reference optimum for validation.
struct ProblemInstance {
  Objective objective;
  std::shared_ptr<const FeasibleSet> set;           // null for unconstrained runs
  std::shared_ptr<const Regularizer> regularizer;   // null means indicator(set)
  std::optional<Vector> start;                      // descent methods; FW starts at a vertex
  std::optional<Vector> reference_optimum;
  std::optional<double> reference_value;

  void validate() const {
    if (!objective.value || !objective.gradient)
      throw ConfigError("ProblemInstance: objective oracles not set");
    if (objective.dimension < 1) throw ConfigError("ProblemInstance: objective dimension not set");
    if (!(objective.smoothness_L > 0.0))
      throw DegenerateInstanceError("ProblemInstance: smoothness constant must be positive");
    if (set && set->dimension() != objective.dimension)
      throw ConfigError("ProblemInstance: set dimension " + std::to_string(set->dimension()) +
                        " != objective dimension " + std::to_string(objective.dimension));
    if (regularizer && regularizer->dimension() != objective.dimension)
      throw ConfigError("ProblemInstance: regularizer dimension " +
                        std::to_string(regularizer->dimension()) + " != objective dimension " +
                        std::to_string(objective.dimension));
    if (start && start->size() != objective.dimension)
      throw ConfigError("ProblemInstance: start point dimension mismatch");
    if (reference_optimum && reference_optimum->size() != objective.dimension)
      throw ConfigError("ProblemInstance: reference optimum dimension mismatch");
  }

  std::shared_ptr<const Regularizer> effective_regularizer() const {
    if (regularizer) return regularizer;
    if (!set) throw ConfigError("ProblemInstance: neither regularizer nor set provided");
    return std::make_shared<IndicatorRegularizer>(set);
  }
};

}  // namespace fwpd
