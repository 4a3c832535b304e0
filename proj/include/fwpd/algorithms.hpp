#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "fwpd/errors.hpp"
#include "fwpd/gaps.hpp"
#include "fwpd/model.hpp"
#include "fwpd/online.hpp"
#include "fwpd/regularizer.hpp"
#include "fwpd/sets.hpp"
#include "fwpd/steps.hpp"
#include "fwpd/trace.hpp"

namespace fwpd {

// Cumulative oracle usage. lmo/grad/fval are the algorithm's own calls;
// reporting_lmo covers bound-certificate calls that are not part of the
// method; fval_search covers line-search and segment-search probes.
struct OracleCounts {
  long lmo = 0;
  long grad = 0;
  long fval = 0;
  long fval_search = 0;
  long reporting_lmo = 0;
};

// Snapshot handed to an iteration observer right after the step decision,
// before the iterate moves. G_prev is the gap driving adaptive rules
// (nan at the first iteration, where adaptive rules take a full step).
struct IterationInfo {
  long t = 0;
  const Vector& x;
  const Vector& v;
  const Vector& grad;
  double f_x = 0.0;
  double G_prev = 0.0;
  double dist_sq = 0.0;
  const StepDecision& decision;
};

using IterationObserver = std::function<void(const IterationInfo&)>;

enum class FwVariant { per_step, cumulative, decreasing_reg };

inline const char* fw_variant_name(FwVariant v) {
  switch (v) {
    case FwVariant::per_step: return "per_step";
    case FwVariant::cumulative: return "cumulative";
    case FwVariant::decreasing_reg: return "decreasing_reg";
  }
  return "unknown";
}

struct FwOptions {
  StepRule rule = StepRule::open_loop;
  int ell = 2;        // open-loop gamma_t = ell/(t+ell)
  double a0 = 2.0;    // weight scale; only the raw-sum variant is sensitive to it
  long T = 100;
  double epsilon = 0.0;
  bool report_hb = false;
  IterationObserver observer;
};

struct RunResult {
  std::vector<TraceRecord> trace;
  Vector x_final;
  double primal_final = kNan;
  OracleCounts counts;
  bool converged = false;
  bool stationary = false;
};

namespace detail {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Objective whose plain evaluations are counted as search probes.
inline Objective search_counted(const Objective& f, OracleCounts& counts) {
  Objective shim = f;
  shim.value = [base = f.value, &counts](const Vector& x) {
    ++counts.fval_search;
    return base(x);
  };
  return shim;
}

}  // namespace detail

// Minimizes fval over the segment [a, b] with a fixed budget of evaluations.
// The incumbent starts at (a, f_a), so the result never exceeds f(a).
inline std::pair<Vector, double> segment_search_min(
    const std::function<double(const Vector&)>& fval, const Vector& a, double f_a,
    const Vector& b, int budget = 20) {
  double best_theta = 0.0, best_v = f_a;
  double lo = 0.0, hi = 1.0;
  auto probe = [&](double theta) {
    double v = fval(a + theta * (b - a));
    if (!std::isfinite(v)) throw OracleError("segment_search_min: non-finite objective value");
    if (v < best_v) {
      best_v = v;
      best_theta = theta;
    }
    return v;
  };
  while (budget >= 2) {
    double m1 = lo + (hi - lo) / 3.0;
    double m2 = hi - (hi - lo) / 3.0;
    double f1 = probe(m1), f2 = probe(m2);
    budget -= 2;
    if (f1 < f2) hi = m2;
    else lo = m1;
  }
  return {a + best_theta * (b - a), best_v};
}

namespace detail {

// Core loop shared by the whole Frank-Wolfe family. The three variants differ
// in how the step vertex is produced and which lower bound certifies the gap:
//   per_step       v = argmin <grad f(x_t), v> + psi(v); mixed one-step bounds
//   cumulative     v = argmin <mean grad, v> + psi(v);   averaged bound
//   decreasing_reg v = argmin <sum a_i grad_i, v> + psi(v) with psi unscaled
inline RunResult run_fw_family(const ProblemInstance& inst, FwVariant variant,
                               const FwOptions& opt) {
  inst.validate();
  if (opt.T < 1) throw ConfigError("run: T must be >= 1");
  if (opt.ell < 1) throw ConfigError("run: ell must be >= 1");
  auto reg = inst.effective_regularizer();
  const bool indicator = reg->is_indicator();
  const Objective& f = inst.objective;
  const double L = f.smoothness_L;

  switch (opt.rule) {
    case StepRule::open_loop:
      break;
    case StepRule::short_step:
      if (variant != FwVariant::per_step)
        throw ConfigError("run: short_step applies to the per-step variant only");
      break;
    case StepRule::pd_short:
    case StepRule::pd_line_search:
      if (variant == FwVariant::decreasing_reg)
        throw ConfigError("run: the raw-sum variant supports the open-loop rule only");
      break;
    default:
      throw ConfigError("run: step rule not valid for the Frank-Wolfe family");
  }
  if (opt.rule != StepRule::open_loop && !indicator)
    throw ConfigError("run: adaptive and short step rules require an indicator regularizer");

  RunResult out;
  OracleCounts& counts = out.counts;
  Stopwatch clock;
  Objective search_f = search_counted(f, counts);

  // Starting vertex; the setup oracle call is not part of iteration accounting.
  Vector x = regularized_min_oracle(*reg, Vector::Zero(f.dimension));
  ++counts.fval;
  double f_x = f.value(x);
  double psi_x = indicator ? 0.0 : reg->value(x);

  FwGapTracker fw_tr;
  HbGapTracker hb_tr;
  const bool track_hb = variant == FwVariant::cumulative || opt.report_hb;

  // Raw weighted sums for the unscaled-regularizer variant.
  WeightSchedule raw_sched = WeightSchedule::open_loop(opt.ell, opt.a0);
  double s_f = 0.0, s_gx = 0.0;
  Vector s_g = Vector::Zero(f.dimension);
  const double psi_star =
      inst.reference_optimum && !indicator ? reg->value(*inst.reference_optimum) : 0.0;
  const bool psi_star_known = inst.reference_optimum.has_value();

  double G_prev = kNan;       // previous gap_ahead, drives adaptive rules
  double prev_gamma = 1.0;    // provisional mixing weight for adaptive averaged runs
  out.trace.reserve(static_cast<std::size_t>(opt.T));

  for (long t = 0; t < opt.T; ++t) {
    try {
      ++counts.grad;
      Vector grad = f.gradient(x);

      // Step vertex per variant.
      Vector v;
      if (variant == FwVariant::per_step) {
        ++counts.lmo;
        v = regularized_min_oracle(*reg, grad);
      } else if (variant == FwVariant::cumulative) {
        if (opt.rule == StepRule::open_loop) {
          hb_tr.absorb(open_loop_gamma(t, opt.ell), f_x, grad, grad.dot(x));
          ++counts.lmo;
          v = regularized_min_oracle(*reg, hb_tr.gbar());
        } else {
          // The averaging weight of the newest gradient depends on the step
          // size, which depends on the vertex. The step uses a vertex from the
          // previous accepted weight; the emitted bound gets its own exact
          // argmin below.
          Vector dir = t == 0 ? grad
                              : Vector((1.0 - prev_gamma) * hb_tr.gbar() + prev_gamma * grad);
          ++counts.lmo;
          v = regularized_min_oracle(*reg, dir);
        }
      } else {
        double a_t = raw_sched.a(t);
        s_f += a_t * f_x;
        s_g += a_t * grad;
        s_gx += a_t * grad.dot(x);
        ++counts.lmo;
        v = regularized_min_oracle(*reg, s_g);
      }

      double psi_v = indicator ? 0.0 : reg->value(v);
      double inner = grad.dot(v - x);
      double dist_sq = (v - x).squaredNorm();

      // Step size.
      StepDecision dec;
      switch (opt.rule) {
        case StepRule::open_loop:
          dec.rule_tag = StepRule::open_loop;
          dec.gamma_or_a = open_loop_gamma(t, opt.ell);
          dec.model_value = kNan;
          break;
        case StepRule::short_step:
          dec = short_step(-inner, dist_sq, L);
          break;
        case StepRule::pd_short:
          if (t == 0) {
            dec.rule_tag = StepRule::pd_short;
            dec.gamma_or_a = 1.0;
            dec.model_value = 0.5 * L * dist_sq;
          } else {
            dec = pd_short_step(G_prev, dist_sq, L);
          }
          break;
        case StepRule::pd_line_search:
          if (t == 0) {
            dec.rule_tag = StepRule::pd_line_search;
            dec.gamma_or_a = 1.0;
            dec.model_value = kNan;
          } else {
            dec = pd_line_search_fw(search_f, x, v, G_prev, inner);
          }
          break;
        default:
          throw ConfigError("run: unreachable step rule");
      }
      if (opt.observer) opt.observer(IterationInfo{t, x, v, grad, f_x, G_prev, dist_sq, dec});

      const double gamma = dec.gamma_or_a;

      // Trackers absorb the realized mixing weight.
      double lb_primary;
      double lb_hb_val = kNan;
      unsigned flags = 0;
      if (variant == FwVariant::per_step) {
        fw_tr.update(gamma, f_x + inner + psi_v);
        lb_primary = fw_tr.lb_mix();
        if (track_hb) {
          hb_tr.absorb(gamma, f_x, grad, grad.dot(x));
          ++counts.reporting_lmo;
          lb_hb_val = hb_lower_bound(hb_tr, *reg).second;
        }
      } else if (variant == FwVariant::cumulative) {
        if (opt.rule != StepRule::open_loop) {
          hb_tr.absorb(gamma, f_x, grad, grad.dot(x));
          ++counts.reporting_lmo;
          lb_hb_val = hb_lower_bound(hb_tr, *reg).second;
          flags |= flag_hb_dynamic;
        } else {
          lb_hb_val = hb_tr.fbar() + hb_tr.gbar().dot(v) - hb_tr.cbar() + psi_v;
        }
        lb_primary = lb_hb_val;
        prev_gamma = gamma;
      } else {
        double A_t = raw_sched.A(t);
        lb_hb_val = (s_f + s_g.dot(v) - s_gx + psi_v - psi_star) / A_t;
        lb_primary = lb_hb_val;
        if (!psi_star_known && !indicator) flags |= flag_psi_star_omitted;
      }

      // Move.
      Vector x_next = (1.0 - gamma) * x + gamma * v;
      ++counts.fval;
      double f_next = f.value(x_next);
      double psi_next = indicator ? 0.0 : reg->value(x_next);

      // decreasing_reg certifies f alone; the other variants certify f + psi.
      double primal_now =
          variant == FwVariant::decreasing_reg ? f_next : f_next + psi_next;
      double primal_prev = variant == FwVariant::decreasing_reg ? f_x : f_x + psi_x;
      double gap_ahead = primal_now - lb_primary;
      double gap_aligned = primal_prev - lb_primary;

      if (dec.stationary) flags |= flag_stationary;
      if (dec.degenerate) flags |= flag_degenerate;
      bool stop_converged = gap_ahead <= opt.epsilon;
      if (stop_converged) flags |= flag_converged;

      TraceRecord rec;
      rec.iter = t;
      rec.wall_time_s = clock.seconds();
      rec.primal = primal_now;
      if (variant == FwVariant::per_step) {
        rec.lb_fw_mix = fw_tr.lb_mix();
        rec.lb_fw_best = fw_tr.lb_best();
      }
      rec.lb_hb = lb_hb_val;
      rec.gap_aligned = gap_aligned;
      rec.gap_ahead = gap_ahead;
      rec.gamma_or_a = gamma;
      rec.lmo_calls = counts.lmo;
      rec.grad_calls = counts.grad;
      rec.reporting_lmo = counts.reporting_lmo;
      rec.fval_calls = counts.fval;
      rec.fval_search_calls = counts.fval_search;
      rec.flags = flags;
      out.trace.push_back(std::move(rec));

      G_prev = gap_ahead;
      x = std::move(x_next);
      f_x = f_next;
      psi_x = psi_next;
      if (dec.stationary) {
        out.stationary = true;
        break;
      }
      if (stop_converged) {
        out.converged = true;
        break;
      }
    } catch (const OracleError& e) {
      throw OracleError("iteration " + std::to_string(t) + ": " + e.what());
    }
  }

  out.x_final = std::move(x);
  out.primal_final = variant == FwVariant::decreasing_reg ? f_x : f_x + psi_x;
  return out;
}

}  // namespace detail

// Vanilla Frank-Wolfe: vertex from the current gradient, mixed lower bound.
inline RunResult run_fw(const ProblemInstance& inst, const FwOptions& opt) {
  return detail::run_fw_family(inst, FwVariant::per_step, opt);
}

// Averaged-gradient Frank-Wolfe: one argmin serves the step and the bound.
inline RunResult run_hb_fw(const ProblemInstance& inst, const FwOptions& opt) {
  if (opt.rule == StepRule::short_step)
    throw ConfigError("run_hb_fw: supported rules are open_loop, pd_short, pd_line_search");
  return detail::run_fw_family(inst, FwVariant::cumulative, opt);
}

// Composite runs; all three variants, open-loop weights only.
inline RunResult run_generalized_fw(const ProblemInstance& inst, FwVariant variant,
                                    const FwOptions& opt) {
  if (opt.rule != StepRule::open_loop)
    throw ConfigError("run_generalized_fw: open_loop is the only supported rule");
  return detail::run_fw_family(inst, variant, opt);
}

enum class OptimisticLearner { oftrl, omd };
enum class YHook { identity, segment_search };

struct OptimisticOptions {
  OptimisticLearner learner = OptimisticLearner::oftrl;
  SubgradientPolicy policy = SubgradientPolicy::ftrl_equivalent;
  YHook y_hook = YHook::identity;
  long T = 100;
  double epsilon = 0.0;
  bool report_hb = true;
  int segment_budget = 20;
};

// Optimistic Frank-Wolfe: the vertex comes from an online learner fed the
// gradient of the previous coupled iterate as a hint for the next one.
// Weights a_t = 2t, so A_0 = 0 and x_1 = v_1. The certificate is the learner's
// regret bound; with reporting enabled the averaged-gradient vertex both
// yields the comparison bound and closes the regret certificate exactly
// (the averaged direction is the accumulated one rescaled, which linear
// minimization is invariant to).
inline RunResult run_optimistic_fw(const ProblemInstance& inst, const OptimisticOptions& opt) {
  inst.validate();
  if (opt.T < 1) throw ConfigError("run_optimistic_fw: T must be >= 1");
  auto reg = inst.effective_regularizer();
  if (!reg->is_indicator())
    throw ConfigError("run_optimistic_fw: only indicator regularizers are supported");
  if (!inst.set)
    throw ConfigError("run_optimistic_fw: a feasible set with a known diameter is required");
  const Objective& f = inst.objective;
  const double D = std::sqrt(inst.set->diameter_sq());

  RunResult out;
  OracleCounts& counts = out.counts;
  detail::Stopwatch clock;

  BregmanState learner(*reg);  // v_0 = argmin psi; setup call, not counted
  Vector x = learner.v();
  ++counts.fval;
  double f_x = f.value(x);
  ++counts.grad;
  Vector hint_g = f.gradient(x);  // g_1 = grad f(x_0); one extra gradient overall

  OptimisticGapTracker tracker;
  tracker.start(x, f_x, hint_g, x);
  HbGapTracker hb_tr;

  double A_prev = 0.0;
  out.trace.reserve(static_cast<std::size_t>(opt.T));

  for (long t = 1; t <= opt.T; ++t) {
    try {
      const double a_t = 2.0 * double(t);
      const double A_t = double(t) * double(t + 1);
      Hint hint{hint_g, a_t};
      ++counts.lmo;
      Vector v = opt.learner == OptimisticLearner::oftrl
                     ? oftrl_step(learner, hint, *reg)
                     : omd_step(learner, hint, *reg, opt.policy);

      Vector y_prev = x;
      if (opt.y_hook == YHook::segment_search && t > 1) {
        auto counted = [&](const Vector& p) {
          ++counts.fval_search;
          return f.value(p);
        };
        y_prev = segment_search_min(counted, x, f_x, v, opt.segment_budget).first;
      }

      Vector x_t = A_prev == 0.0 ? v : Vector((A_prev / A_t) * y_prev + (a_t / A_t) * v);
      ++counts.fval;
      double f_xt = f.value(x_t);
      ++counts.grad;
      Vector grad_t = f.gradient(x_t);

      learner.absorb_realized(grad_t, a_t);
      tracker.absorb(a_t, A_prev, x_t, f_xt, grad_t, hint_g, v, y_prev);

      double gap_formula = optimistic_gap(tracker, A_t, D);
      double gap_extra = kNan;
      double lb_hb_val = kNan;
      unsigned flags = 0;
      if (opt.report_hb) {
        hb_tr.absorb(2.0 / double(t + 1), f_xt, grad_t, grad_t.dot(x_t));
        ++counts.reporting_lmo;
        auto [v_hb, lb] = hb_lower_bound(hb_tr, *reg);
        lb_hb_val = lb;
        if (opt.learner == OptimisticLearner::oftrl ||
            opt.policy == SubgradientPolicy::ftrl_equivalent) {
          gap_extra =
              (tracker.pair_sum_with_closing_vertex(v_hb) - tracker.bregman_sum()) / A_t;
        } else {
          ++counts.reporting_lmo;
          gap_extra = optimistic_gap_extra_lmo(tracker, learner, *reg, opt.policy, A_t);
        }
        flags |= flag_opt_extra_lmo;
      }

      double gap = std::isnan(gap_extra) ? gap_formula : gap_extra;

      TraceRecord rec;
      rec.iter = t;
      rec.wall_time_s = clock.seconds();
      rec.primal = f_xt;
      rec.lb_hb = lb_hb_val;
      rec.lb_opt = f_xt - gap;
      rec.lb_opt_formula = f_xt - gap_formula;
      rec.lb_opt_extra = std::isnan(gap_extra) ? kNan : f_xt - gap_extra;
      rec.gap_aligned = gap;
      rec.gap_ahead = gap;
      rec.gamma_or_a = a_t;
      rec.lmo_calls = counts.lmo;
      rec.grad_calls = counts.grad;
      rec.reporting_lmo = counts.reporting_lmo;
      rec.fval_calls = counts.fval;
      rec.fval_search_calls = counts.fval_search;
      bool stop_converged = gap <= opt.epsilon;
      if (stop_converged) rec.flags = flags | flag_converged;
      else rec.flags = flags;
      out.trace.push_back(std::move(rec));

      hint_g = std::move(grad_t);  // g_{t+1} = grad f(x_t)
      x = std::move(x_t);
      f_x = f_xt;
      A_prev = A_t;
      if (stop_converged) {
        out.converged = true;
        break;
      }
    } catch (const OracleError& e) {
      throw OracleError("iteration " + std::to_string(t) + ": " + e.what());
    }
  }

  out.x_final = std::move(x);
  out.primal_final = f_x;
  return out;
}

struct GdOptions {
  StepRule rule = StepRule::gd_pd_short;  // gd_pd_short | gd_pd_line_search | gd_fixed
  long T = 100;
  double epsilon = 0.0;
  std::optional<double> d_bound;  // defaults to ||x_1 - x*|| when a reference exists
};

// Unconstrained gradient descent with adaptive step weights chosen to
// minimize the next certified gap. The certificate seeds the first step with
// the D^2/2 term, after which the weighted gap state only shrinks.
inline RunResult run_gd_pd(const ProblemInstance& inst, const GdOptions& opt) {
  inst.validate();
  if (opt.T < 1) throw ConfigError("run_gd_pd: T must be >= 1");
  if (opt.rule != StepRule::gd_pd_short && opt.rule != StepRule::gd_pd_line_search &&
      opt.rule != StepRule::gd_fixed)
    throw ConfigError("run_gd_pd: supported rules are gd_pd_short, gd_pd_line_search, gd_fixed");
  const Objective& f = inst.objective;
  const double L = f.smoothness_L;

  Vector x1 = inst.start.value_or(Vector::Zero(f.dimension));
  double D = 0.0;
  if (opt.d_bound) {
    D = *opt.d_bound;
    if (!(D > 0.0)) throw ConfigError("run_gd_pd: d_bound must be positive");
    if (inst.reference_optimum && D < (x1 - *inst.reference_optimum).norm() * (1.0 - 1e-12))
      throw ConfigError("run_gd_pd: d_bound is smaller than the distance to the reference optimum");
  } else if (inst.reference_optimum) {
    D = (x1 - *inst.reference_optimum).norm();
    if (!(D > 0.0)) D = 1e-12;  // start at the optimum: any tiny bound certifies it
  } else {
    throw ConfigError("run_gd_pd: supply d_bound or a reference optimum for the certificate");
  }

  RunResult out;
  OracleCounts& counts = out.counts;
  detail::Stopwatch clock;
  Objective search_f = detail::search_counted(f, counts);

  GdGapTracker tracker(D);
  Vector x = x1;
  ++counts.fval;
  double f_x = f.value(x);
  double script_G = 0.5 * D * D;  // A_{t-1} G_{t-1} plus the seed term
  double A = 0.0;
  double a_prev = 0.0;
  out.trace.reserve(static_cast<std::size_t>(opt.T));

  for (long t = 1; t <= opt.T; ++t) {
    try {
      ++counts.grad;
      Vector grad = f.gradient(x);
      double g2 = grad.squaredNorm();

      if (g2 == 0.0) {
        // A vanished gradient certifies exact optimality of the smooth convex
        // objective, so the gap closes outright.
        TraceRecord rec;
        rec.iter = t;
        rec.wall_time_s = clock.seconds();
        rec.primal = f_x;
        rec.gap_ahead = 0.0;
        rec.gap_aligned = 0.0;
        rec.gamma_or_a = 0.0;
        rec.lmo_calls = counts.lmo;
        rec.grad_calls = counts.grad;
        rec.fval_calls = counts.fval;
        rec.fval_search_calls = counts.fval_search;
        rec.flags = flag_stationary | flag_converged;
        out.trace.push_back(std::move(rec));
        out.stationary = true;
        out.converged = true;
        break;
      }

      StepDecision dec;
      switch (opt.rule) {
        case StepRule::gd_fixed:
          dec.rule_tag = StepRule::gd_fixed;
          dec.gamma_or_a = 1.0 / L;
          dec.model_value = kNan;
          break;
        case StepRule::gd_pd_short:
          dec = gd_pd_short_step(script_G, g2, A, L, a_prev);
          break;
        default:
          dec = gd_pd_line_search(search_f, x, grad, script_G, A, 1e-10, a_prev);
          break;
      }
      const double a_t = dec.gamma_or_a;

      tracker.absorb(a_t, f_x, grad, grad.dot(x));
      A += a_t;
      Vector x_next = x - a_t * grad;
      ++counts.fval;
      double f_next = f.value(x_next);
      double G_t = gd_gap(tracker, x_next, x1, f_next, A);
      double gap_aligned_v = f_x - (f_next - G_t);

      TraceRecord rec;
      rec.iter = t;
      rec.wall_time_s = clock.seconds();
      rec.primal = f_next;
      rec.gap_ahead = G_t;
      rec.gap_aligned = gap_aligned_v;
      rec.gamma_or_a = a_t;
      rec.lmo_calls = counts.lmo;
      rec.grad_calls = counts.grad;
      rec.fval_calls = counts.fval;
      rec.fval_search_calls = counts.fval_search;
      bool stop_converged = G_t <= opt.epsilon;
      if (stop_converged) rec.flags |= flag_converged;
      out.trace.push_back(std::move(rec));

      script_G = std::max(A * G_t, 0.0);
      a_prev = a_t;
      x = std::move(x_next);
      f_x = f_next;
      if (stop_converged) {
        out.converged = true;
        break;
      }
    } catch (const OracleError& e) {
      throw OracleError("iteration " + std::to_string(t) + ": " + e.what());
    }
  }

  out.x_final = std::move(x);
  out.primal_final = f_x;
  return out;
}

}  // namespace fwpd
