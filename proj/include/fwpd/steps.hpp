#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>

#include "fwpd/errors.hpp"
#include "fwpd/model.hpp"
#include "fwpd/sets.hpp"

namespace fwpd {

enum class StepRule {
  open_loop,
  short_step,
  pd_short,
  pd_line_search,
  gd_fixed,
  gd_pd_short,
  gd_pd_line_search,
};

inline const char* step_rule_name(StepRule r) {
  switch (r) {
    case StepRule::open_loop: return "open_loop";
    case StepRule::short_step: return "short_step";
    case StepRule::pd_short: return "pd_short";
    case StepRule::pd_line_search: return "pd_line_search";
    case StepRule::gd_fixed: return "gd_fixed";
    case StepRule::gd_pd_short: return "gd_pd_short";
    case StepRule::gd_pd_line_search: return "gd_pd_line_search";
  }
  return "unknown";
}

// gamma_or_a is a convex-combination coefficient in [0,1] for the FW family
// and a positive step weight for the GD family. model_value is the rule's
// predicted quantity: guaranteed decrease for short_step, predicted next gap
// for the pd rules.
struct StepDecision {
  double gamma_or_a = 0.0;
  StepRule rule_tag = StepRule::open_loop;
  double model_value = 0.0;
  bool stationary = false;  // zero direction or zero gradient: stop signal
  bool degenerate = false;  // zero direction with positive gap: any step keeps the bound
};

// Ternary search for the minimizer of a unimodal function on [lo, hi].
// Returns the best probe seen (argument, value), so the result never exceeds
// any evaluated point. Absolute tolerance on the argument.
inline std::pair<double, double> minimize_unimodal(const std::function<double(double)>& F,
                                                   double lo, double hi, double tol) {
  if (!(tol > 0.0)) throw ConfigError("minimize_unimodal: tol must be positive");
  if (!(lo <= hi)) throw ConfigError("minimize_unimodal: empty interval");
  double best_x = lo, best_v = F(lo);
  if (!std::isfinite(best_v)) throw OracleError("minimize_unimodal: non-finite value at interval start");
  auto consider = [&](double x, double v) {
    if (!std::isfinite(v)) throw OracleError("minimize_unimodal: non-finite value in search");
    if (v < best_v) {
      best_v = v;
      best_x = x;
    }
  };
  consider(hi, F(hi));
  while (hi - lo > tol) {
    double m1 = lo + (hi - lo) / 3.0;
    double m2 = hi - (hi - lo) / 3.0;
    double f1 = F(m1), f2 = F(m2);
    consider(m1, f1);
    consider(m2, f2);
    if (f1 < f2) hi = m2;
    else lo = m1;
  }
  double mid = 0.5 * (lo + hi);
  consider(mid, F(mid));
  return {best_x, best_v};
}

// gamma = min{1, inner / (L dist_sq)} maximizing the smoothness model of
// primal progress. inner = <grad f(x_t), x_t - v_t> >= 0 for an LMO vertex.
// model_value = gamma*inner - gamma^2 (L/2) dist_sq, the guaranteed decrease.
inline StepDecision short_step(double inner, double dist_sq, double L) {
  if (!(L > 0.0)) throw ConfigError("short_step: L must be positive");
  if (!(dist_sq >= 0.0)) throw ConfigError("short_step: dist_sq must be nonnegative");
  StepDecision d;
  d.rule_tag = StepRule::short_step;
  if (dist_sq == 0.0 || inner <= 0.0) {
    d.gamma_or_a = 0.0;
    d.model_value = 0.0;
    d.stationary = true;
    return d;
  }
  d.gamma_or_a = std::min(1.0, inner / (L * dist_sq));
  d.model_value = d.gamma_or_a * inner - d.gamma_or_a * d.gamma_or_a * 0.5 * L * dist_sq;
  return d;
}

// gamma = min{1, G_prev / (L dist_sq)} minimizing the gap model
// (1-gamma) G_prev + gamma^2 (L/2) dist_sq. At the interior optimum the model
// value is (1 - gamma/2) G_prev, giving the per-step contraction.
inline StepDecision pd_short_step(double G_prev, double dist_sq, double L) {
  if (!(L > 0.0)) throw ConfigError("pd_short_step: L must be positive");
  if (!(dist_sq >= 0.0)) throw ConfigError("pd_short_step: dist_sq must be nonnegative");
  StepDecision d;
  d.rule_tag = StepRule::pd_short;
  double g = std::max(G_prev, 0.0);
  if (dist_sq == 0.0) {
    if (g > 0.0) {
      // Model (1-gamma) G_prev is decreasing in gamma, so take the full step.
      d.gamma_or_a = 1.0;
      d.degenerate = true;
      d.model_value = 0.0;
    } else {
      d.gamma_or_a = 0.0;
      d.stationary = true;
      d.model_value = 0.0;
    }
    return d;
  }
  d.gamma_or_a = std::min(1.0, g / (L * dist_sq));
  d.model_value =
      (1.0 - d.gamma_or_a) * g + d.gamma_or_a * d.gamma_or_a * 0.5 * L * dist_sq;
  return d;
}

// Minimizes the exact next-gap curve
// h(gamma) = (1-gamma) G_prev - gamma inner + f((1-gamma) x_t + gamma v_t) - f(x_t)
// over [0,1]; inner = <grad f(x_t), v_t - x_t> is passed in so the rule costs
// no gradient call. h is convex in gamma and lies below the pd_short model
// pointwise, so the result dominates pd_short_step.
// model_value = h(gamma*), the realized next gap when the tracker mixes with
// this gamma.
inline StepDecision pd_line_search_fw(const Objective& f, const Vector& x_t, const Vector& v_t,
                                      double G_prev, double inner, double tol = 1e-10) {
  StepDecision d;
  d.rule_tag = StepRule::pd_line_search;
  double g = std::max(G_prev, 0.0);
  double f_xt = f.value(x_t);
  if (!std::isfinite(f_xt)) throw OracleError("pd_line_search_fw: non-finite f(x_t)");
  auto h = [&](double gamma) {
    double fv = f.value(x_t + gamma * (v_t - x_t));
    return (1.0 - gamma) * g - gamma * inner + fv - f_xt;
  };
  auto [gamma, value] = minimize_unimodal(h, 0.0, 1.0, tol);
  d.gamma_or_a = gamma;
  d.model_value = value;
  if (gamma == 0.0 && (v_t - x_t).squaredNorm() == 0.0) d.stationary = true;
  return d;
}

namespace detail {

// sign(phi'(a)) for the GD gap model, cleared of positive denominators:
// 2 (A+a)^2 phi'(a) = -2 script_G + g2 (2 L a (A+a)^2 - 2 A^2 - 2 a A - a^2).
inline double gd_phi_deriv_sign(double a, double script_G, double g2, double A, double L) {
  double Ata = A + a;
  return -2.0 * script_G + g2 * (2.0 * L * a * Ata * Ata - 2.0 * A * A - 2.0 * a * A - a * a);
}

}  // namespace detail

// phi(a) = script_G/(A+a) + g2 (-aA/(A+a) + a^2 L/2 - a^2/(2(A+a))), the
// smoothness model of the next GD gap. script_G = A_{t-1} G_{t-1} (+ D^2/2 at
// the first step).
inline double gd_gap_model(double a, double script_G, double g2, double A, double L) {
  double Ata = A + a;
  return script_G / Ata + g2 * (-a * A / Ata + 0.5 * a * a * L - 0.5 * a * a / Ata);
}

// Minimizes phi by bisection on its derivative sign over [1/(2L), a_hi];
// phi'(1/(2L)) <= 0 always, so the minimizer (and the result) is >= 1/(2L).
// a_prev seeds the upper bracket; pass 0 when unknown.
inline StepDecision gd_pd_short_step(double G_script_prev, double grad_norm_sq, double A_prev,
                                     double L, double a_prev = 0.0) {
  if (!(L > 0.0)) throw ConfigError("gd_pd_short_step: L must be positive");
  if (!(G_script_prev >= 0.0)) throw ConfigError("gd_pd_short_step: gap state must be nonnegative");
  if (!(A_prev >= 0.0)) throw ConfigError("gd_pd_short_step: A_prev must be nonnegative");
  StepDecision d;
  d.rule_tag = StepRule::gd_pd_short;
  if (grad_norm_sq <= 0.0) {
    d.stationary = true;
    d.gamma_or_a = 0.0;
    d.model_value = A_prev > 0.0 ? G_script_prev / A_prev : G_script_prev;
    return d;
  }
  double lo = 0.5 / L;
  double hi = std::max({1.0 / L, 2.0 * a_prev, lo * 2.0});
  while (detail::gd_phi_deriv_sign(hi, G_script_prev, grad_norm_sq, A_prev, L) <= 0.0) {
    hi *= 2.0;
    if (!std::isfinite(hi)) throw OracleError("gd_pd_short_step: bracket diverged");
  }
  while (hi - lo > 1e-12 * std::max(1.0, hi)) {
    double mid = 0.5 * (lo + hi);
    if (detail::gd_phi_deriv_sign(mid, G_script_prev, grad_norm_sq, A_prev, L) > 0.0) hi = mid;
    else lo = mid;
  }
  d.gamma_or_a = 0.5 * (lo + hi);
  d.model_value = gd_gap_model(d.gamma_or_a, G_script_prev, grad_norm_sq, A_prev, L);
  return d;
}

// Minimizes psi(a) = script_G/(A+a) + a^2 g2/(2(A+a)) + f(x_t - a grad) - f(x_t)
// over [1/(2L), a_hi] by bracket doubling + ternary search. psi lies below phi
// pointwise (smoothness bounds the f difference), and psi'(1/(2L)) <= 0, so
// restricting to a >= 1/(2L) loses nothing and keeps the step-size floor.
inline StepDecision gd_pd_line_search(const Objective& f, const Vector& x_t, const Vector& grad,
                                      double G_script_prev, double A_prev, double tol = 1e-10,
                                      double a_prev = 0.0) {
  double L = f.smoothness_L;
  if (!(L > 0.0)) throw ConfigError("gd_pd_line_search: objective smoothness constant not set");
  if (!(G_script_prev >= 0.0))
    throw ConfigError("gd_pd_line_search: gap state must be nonnegative");
  if (!(A_prev >= 0.0)) throw ConfigError("gd_pd_line_search: A_prev must be nonnegative");
  StepDecision d;
  d.rule_tag = StepRule::gd_pd_line_search;
  double g2 = grad.squaredNorm();
  if (g2 <= 0.0) {
    d.stationary = true;
    d.gamma_or_a = 0.0;
    d.model_value = A_prev > 0.0 ? G_script_prev / A_prev : G_script_prev;
    return d;
  }
  double f_xt = f.value(x_t);
  if (!std::isfinite(f_xt)) throw OracleError("gd_pd_line_search: non-finite f(x_t)");
  auto psi = [&](double a) {
    double Ata = A_prev + a;
    return G_script_prev / Ata + 0.5 * a * a * g2 / Ata + f.value(x_t - a * grad) - f_xt;
  };
  double lo = 0.5 / L;
  double hi = std::max({1.0 / L, 2.0 * a_prev, 2.0 * lo});
  double psi_hi = psi(hi);
  if (!std::isfinite(psi_hi)) throw OracleError("gd_pd_line_search: non-finite value on ray");
  while (true) {
    double cand = 2.0 * hi;
    double psi_cand = psi(cand);
    if (!std::isfinite(psi_cand)) throw OracleError("gd_pd_line_search: non-finite value on ray");
    if (psi_cand >= psi_hi) break;
    hi = cand;
    psi_hi = psi_cand;
    if (!std::isfinite(hi)) throw OracleError("gd_pd_line_search: bracket diverged");
  }
  hi *= 2.0;
  auto [a, value] = minimize_unimodal(psi, lo, hi, std::max(tol, 1e-12 * hi));
  d.gamma_or_a = a;
  d.model_value = value;
  return d;
}

}  // namespace fwpd
