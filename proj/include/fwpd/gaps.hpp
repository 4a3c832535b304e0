#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "fwpd/errors.hpp"
#include "fwpd/regularizer.hpp"
#include "fwpd/sets.hpp"

namespace fwpd {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Normalized mixed lower bound for Frank-Wolfe runs.
// lb_mix holds (1/A_t) sum_i a_i (f(x_i) + <grad_i, v_i - x_i>), maintained by
// convex mixing so it stays finite under any weight schedule.
// lb_best is the running maximum of the one-step bounds; lb_mix <= lb_best by
// Jensen since lb_mix is a convex combination of the same terms.
class FwGapTracker {
 public:
  double lb_mix() const { return lb_mix_; }
  double lb_best() const { return lb_best_; }
  bool empty() const { return !init_; }

  // one_step_lb = f(x_t) + <grad f(x_t), v_t - x_t> (+ psi(v_t) in composite
  // runs). The first update sets lb_mix outright; gamma only mixes later ones.
  void update(double gamma, double one_step_lb) {
    if (!(gamma >= 0.0) || gamma > 1.0) throw StateError("FwGapTracker: gamma outside [0, 1]");
    if (!init_) {
      lb_mix_ = one_step_lb;
      init_ = true;
    } else {
      lb_mix_ = (1.0 - gamma) * lb_mix_ + gamma * one_step_lb;
    }
    lb_best_ = std::max(lb_best_, one_step_lb);
  }

 private:
  double lb_mix_ = kNegInf;
  double lb_best_ = kNegInf;
  bool init_ = false;
};

// fw_update: mixes the one-step bound f_xt + inner into the tracker and
// returns (lb_mix, lb_best). inner = <grad f(x_t), v_t - x_t>, plus psi(v_t)
// when a nontrivial regularizer is present.
inline std::pair<double, double> fw_update(FwGapTracker& tracker, double gamma, double f_xt,
                                           double inner) {
  tracker.update(gamma, f_xt + inner);
  return {tracker.lb_mix(), tracker.lb_best()};
}

// Normalized accumulators for the averaged-gradient lower bound:
// fbar = sum (a_i/A_t) f(x_i), gbar = sum (a_i/A_t) grad f(x_i),
// cbar = sum (a_i/A_t) <grad f(x_i), x_i>. All three always mixed with the
// same coefficient, so (fbar, gbar, cbar) stays a convex combination.
class HbGapTracker {
 public:
  bool empty() const { return !init_; }
  double fbar() const { return fbar_; }
  const Vector& gbar() const {
    if (!init_) throw StateError("HbGapTracker: no gradient absorbed yet");
    return gbar_;
  }
  double cbar() const { return cbar_; }

  void absorb(double gamma, double f_xt, const Vector& grad_xt, double grad_dot_x) {
    if (!(gamma >= 0.0) || gamma > 1.0) throw StateError("HbGapTracker: gamma outside [0, 1]");
    if (!init_) {
      fbar_ = f_xt;
      gbar_ = grad_xt;
      cbar_ = grad_dot_x;
      init_ = true;
      return;
    }
    fbar_ = (1.0 - gamma) * fbar_ + gamma * f_xt;
    gbar_ = (1.0 - gamma) * gbar_ + gamma * grad_xt;
    cbar_ = (1.0 - gamma) * cbar_ + gamma * grad_dot_x;
  }

 private:
  double fbar_ = 0.0;
  Vector gbar_;
  double cbar_ = 0.0;
  bool init_ = false;
};

// Lower bound from the averaged linearizations, minimized over the set:
// L_t = fbar + <gbar, v> - cbar at v = lmo(gbar). Costs exactly one LMO.
inline std::pair<Vector, double> hb_lower_bound(const HbGapTracker& tracker,
                                                const FeasibleSet& set) {
  if (tracker.empty()) throw StateError("hb_lower_bound: tracker is empty");
  Vector v = set.lmo(tracker.gbar());
  double L = tracker.fbar() + tracker.gbar().dot(v) - tracker.cbar();
  return {std::move(v), L};
}

// Composite variant: v minimizes <gbar, v> + psi(v); the bound gains psi(v).
inline std::pair<Vector, double> hb_lower_bound(const HbGapTracker& tracker,
                                                const Regularizer& reg) {
  if (tracker.empty()) throw StateError("hb_lower_bound: tracker is empty");
  Vector v = regularized_min_oracle(reg, tracker.gbar());
  double L = tracker.fbar() + tracker.gbar().dot(v) - tracker.cbar() + reg.value(v);
  return {std::move(v), L};
}

// Raw-sum accumulators for the optimistic certificate. Pairs
// a_i <grad f(x_i) - g_i, v_i - v_{i+1}> complete one step late, so the
// tracker keeps the latest (a, grad, hint, v) and folds the pair when the next
// vertex arrives. bregman_sum collects the nonnegative per-step curvature
// terms A_{i-1} [f(x_{i-1}) - f(x_i) - <grad f(x_i), y_{i-1} - x_i>]; with the
// identity averaging hook this is exactly A_{i-1} D_f(x_{i-1}, x_i).
class OptimisticGapTracker {
 public:
  bool started() const { return started_; }
  long steps() const { return t_; }
  double regret_bound_sum() const { return pairs_; }
  double bregman_sum() const { return bregman_; }
  double last_grad_diff_norm() const { return last_grad_diff_norm_; }
  double last_a() const { return last_a_; }
  const Vector& last_grad() const { return require(last_grad_); }
  const Vector& last_hint() const { return require(last_hint_); }
  const Vector& last_v() const { return require(last_v_); }

  // Anchors the run at x_0 = v_0: weight a_0 = 0 and hint 0, so the first
  // absorbed pair contributes nothing.
  void start(const Vector& x0, double f_x0, const Vector& grad_x0, const Vector& v0) {
    if (started_) throw StateError("OptimisticGapTracker: start called twice");
    last_x_ = x0;
    last_f_ = f_x0;
    last_grad_ = grad_x0;
    last_hint_ = Vector::Zero(x0.size());
    last_v_ = v0;
    last_a_ = 0.0;
    started_ = true;
  }

  // Folds iteration t: completes the (t-1, t) regret pair, adds the curvature
  // term against the averaging point y_{t-1}, and snapshots state for the next
  // pair. A_prev = A_{t-1}; hint_t is the prediction the learner used for v_t.
  void absorb(double a_t, double A_prev, const Vector& x_t, double f_xt, const Vector& grad_xt,
              const Vector& hint_t, const Vector& v_t, const Vector& y_prev) {
    if (!started_) throw StateError("OptimisticGapTracker: absorb before start");
    pairs_ += last_a_ * (last_grad_ - last_hint_).dot(last_v_ - v_t);
    bregman_ += A_prev * (last_f_ - f_xt - grad_xt.dot(y_prev - x_t));
    last_grad_diff_norm_ = (grad_xt - last_grad_).norm();
    last_x_ = x_t;
    last_f_ = f_xt;
    last_grad_ = grad_xt;
    last_hint_ = hint_t;
    last_v_ = v_t;
    last_a_ = a_t;
    ++t_;
  }

  // Completed pairs plus the final pair closed with an explicit vertex v_close
  // in place of the not-yet-seen v_{t+1}.
  double pair_sum_with_closing_vertex(const Vector& v_close) const {
    if (!started_ || t_ == 0) throw StateError("OptimisticGapTracker: no absorbed iteration");
    return pairs_ + last_a_ * (last_grad_ - last_hint_).dot(last_v_ - v_close);
  }

 private:
  const Vector& require(const Vector& v) const {
    if (!started_) throw StateError("OptimisticGapTracker: not started");
    return v;
  }
  double pairs_ = 0.0;
  double bregman_ = 0.0;
  double last_grad_diff_norm_ = 0.0;
  Vector last_x_, last_grad_, last_hint_, last_v_;
  double last_f_ = 0.0;
  double last_a_ = 0.0;
  long t_ = 0;
  bool started_ = false;
};

// Norm-based optimistic certificate: the unseen final pair is bounded by
// a_t ||grad f(x_t) - grad f(x_{t-1})|| D via Cauchy-Schwarz, where D bounds
// the set diameter. The gradient-difference term carries the weight a_t of
// the open pair it replaces.
inline double optimistic_gap(const OptimisticGapTracker& tracker, double A_t, double D) {
  if (tracker.steps() < 1) throw StateError("optimistic_gap: no absorbed iteration");
  if (!(A_t > 0.0)) throw StateError("optimistic_gap: A_t must be positive");
  if (!(D >= 0.0)) throw ConfigError("optimistic_gap: diameter bound must be nonnegative");
  return (tracker.regret_bound_sum() + tracker.last_a() * tracker.last_grad_diff_norm() * D -
          tracker.bregman_sum()) /
         A_t;
}

// Raw-sum accumulators for the descent-method certificate:
// s_f = sum a_i f(x_i), s_g = sum a_i grad f(x_i), s_gx = sum a_i <grad_i, x_i>.
class GdGapTracker {
 public:
  explicit GdGapTracker(double d_bound) : d_bound_(d_bound) {
    if (!(d_bound > 0.0)) throw ConfigError("GdGapTracker: D bound must be positive");
  }
  double d_bound() const { return d_bound_; }
  double s_f() const { return s_f_; }
  double s_gx() const { return s_gx_; }
  const Vector& s_g() const {
    if (!init_) throw StateError("GdGapTracker: no gradient absorbed yet");
    return s_g_;
  }

  void absorb(double a_t, double f_xt, const Vector& grad_xt, double grad_dot_x) {
    if (!(a_t > 0.0)) throw StateError("GdGapTracker: weight must be positive");
    if (!init_) {
      s_g_ = Vector::Zero(grad_xt.size());
      init_ = true;
    }
    s_f_ += a_t * f_xt;
    s_g_ += a_t * grad_xt;
    s_gx_ += a_t * grad_dot_x;
  }

 private:
  double d_bound_;
  double s_f_ = 0.0;
  double s_gx_ = 0.0;
  Vector s_g_;
  bool init_ = false;
};

// G_t = f(x_{t+1}) - L_t with
// A_t L_t = s_f + <s_g, x_{t+1}> - s_gx + 0.5 ||x_{t+1} - x_1||^2 - 0.5 D^2.
// The quadratic term uses the next iterate, which minimizes the regularized
// linearization sum when x_{t+1} = x_1 - s_g.
inline double gd_gap(const GdGapTracker& tracker, const Vector& x_next, const Vector& x1,
                     double f_next, double A_t) {
  if (!(A_t > 0.0)) throw StateError("gd_gap: A_t must be positive");
  double lt = (tracker.s_f() + tracker.s_g().dot(x_next) - tracker.s_gx() +
               0.5 * (x_next - x1).squaredNorm() - 0.5 * tracker.d_bound() * tracker.d_bound()) /
              A_t;
  return f_next - lt;
}

}  // namespace fwpd
