#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "fwpd/errors.hpp"
#include "fwpd/gaps.hpp"
#include "fwpd/regularizer.hpp"
#include "fwpd/sets.hpp"

namespace fwpd {

// Subgradient selection for the mirror-descent update. ftrl_equivalent picks
// the subgradient that makes the update coincide with follow-the-regularized-
// leader on the accumulated losses; zero picks the constant-zero subgradient
// (valid for indicator regularizers, generally a different trajectory).
enum class SubgradientPolicy { ftrl_equivalent, zero };

inline const char* subgradient_policy_name(SubgradientPolicy p) {
  return p == SubgradientPolicy::ftrl_equivalent ? "ftrl_equivalent" : "zero";
}

// Prediction of the next loss vector, scaled by the round weight a_t.
struct Hint {
  Vector g_tilde;  // unweighted predicted gradient
  double weight = 0.0;
};

// Learner state for both update rules. v is the current proposal,
// phi a subgradient of psi at v, accumulated_linear the weighted sum of
// realized losses sum_{i<t} a_i grad_i. The (last_*) fields hold round t-1's
// realized loss and hint for the mirror-descent form; pending_* hold the hint
// the current proposal used, until the realized loss arrives.
class BregmanState {
 public:
  explicit BregmanState(const Regularizer& reg) {
    const auto n = reg.dimension();
    accumulated_linear_ = Vector::Zero(n);
    phi_ = Vector::Zero(n);
    last_realized_ = Vector::Zero(n);
    last_hint_ = Vector::Zero(n);
    v_ = regularized_min_oracle(reg, Vector::Zero(n));
  }

  const Vector& v() const { return v_; }
  const Vector& phi() const { return phi_; }
  const Vector& accumulated_linear() const { return accumulated_linear_; }
  double last_weight() const { return last_weight_; }
  long rounds() const { return rounds_; }
  bool has_pending() const { return pending_; }

  // Internal: called by the step functions below.
  void set_proposal(Vector v, Vector phi, Vector hint_g, double weight) {
    v_ = std::move(v);
    phi_ = std::move(phi);
    pending_hint_ = std::move(hint_g);
    pending_weight_ = weight;
    pending_ = true;
  }

  // Folds the realized loss a_t * grad into the accumulators. Must follow a
  // proposal with the same weight.
  void absorb_realized(const Vector& grad, double a_t) {
    if (!pending_) throw StateError("BregmanState: absorb without a pending proposal");
    if (a_t != pending_weight_)
      throw StateError("BregmanState: absorbed weight differs from the proposed hint weight");
    accumulated_linear_ += a_t * grad;
    last_realized_ = grad;
    last_hint_ = pending_hint_;
    last_weight_ = a_t;
    pending_ = false;
    ++rounds_;
  }

  const Vector& last_realized() const { return last_realized_; }
  const Vector& last_hint() const { return last_hint_; }

 private:
  Vector v_, phi_, accumulated_linear_;
  Vector last_realized_, last_hint_;
  Vector pending_hint_;
  double pending_weight_ = 0.0;
  double last_weight_ = 0.0;
  long rounds_ = 0;
  bool pending_ = false;
};

// v_t = min_oracle(sum_{i<t} a_i grad_i + a_t g_tilde_t). The optimality
// condition puts -(input vector) in the subdifferential of psi at v_t.
inline const Vector& oftrl_step(BregmanState& state, const Hint& hint, const Regularizer& reg) {
  if (state.has_pending()) throw StateError("oftrl_step: previous proposal not absorbed");
  if (hint.g_tilde.size() != reg.dimension())
    throw ConfigError("oftrl_step: hint dimension mismatch");
  Vector w = state.accumulated_linear() + hint.weight * hint.g_tilde;
  Vector v = regularized_min_oracle(reg, w);
  state.set_proposal(std::move(v), Vector(-w), hint.g_tilde, hint.weight);
  return state.v();
}

// Mirror-descent proposal
//   v_t = min_oracle(a_{t-1}(grad_{t-1} - g_tilde_{t-1}) + a_t g_tilde_t - phi_{t-1}).
// Under ftrl_equivalent the subgradient recursion collapses the input to the
// same accumulated vector oftrl_step uses, evaluated with the same arithmetic,
// so the two rules produce identical proposals bit for bit.
inline const Vector& omd_step(BregmanState& state, const Hint& hint, const Regularizer& reg,
                              SubgradientPolicy policy) {
  if (state.has_pending()) throw StateError("omd_step: previous proposal not absorbed");
  if (hint.g_tilde.size() != reg.dimension())
    throw ConfigError("omd_step: hint dimension mismatch");
  if (policy == SubgradientPolicy::ftrl_equivalent) {
    Vector w = state.accumulated_linear() + hint.weight * hint.g_tilde;
    Vector v = regularized_min_oracle(reg, w);
    state.set_proposal(std::move(v), Vector(-w), hint.g_tilde, hint.weight);
    return state.v();
  }
  Vector w = state.last_weight() * (state.last_realized() - state.last_hint()) +
             hint.weight * hint.g_tilde - state.phi();
  Vector v = regularized_min_oracle(reg, w);
  state.set_proposal(std::move(v), Vector::Zero(reg.dimension()), hint.g_tilde, hint.weight);
  return state.v();
}

// The round-(T+1) update with hint 0; the regret bound for mirror descent
// closes its final difference term with this point. One min-oracle call.
inline Vector omd_closing_point(const BregmanState& state, const Regularizer& reg,
                                SubgradientPolicy policy) {
  if (state.has_pending()) throw StateError("omd_closing_point: proposal not absorbed yet");
  if (policy == SubgradientPolicy::ftrl_equivalent)
    return regularized_min_oracle(reg, state.accumulated_linear());
  Vector w = state.last_weight() * (state.last_realized() - state.last_hint()) - state.phi();
  return regularized_min_oracle(reg, w);
}

struct RegretBreakdown {
  double sum = 0.0;                // sum_t <g_t - hint_t, v_t - v_{t+1}>
  std::vector<double> per_term;    // one entry per round
};

// Hint-error terms of the regret bounds. losses and hints are the weighted
// round vectors (a_t grad_t and a_t g_tilde_t); points are the proposals v_t;
// the final difference closes with closing_point (the comparator for the
// leader rule, the hint-0 update for mirror descent).
inline RegretBreakdown regret_terms(const std::vector<Vector>& losses,
                                    const std::vector<Vector>& hints,
                                    const std::vector<Vector>& points,
                                    const Vector& closing_point) {
  if (losses.size() != hints.size() || losses.size() != points.size())
    throw StateError("regret_terms: history arrays have different lengths");
  if (losses.empty()) throw StateError("regret_terms: empty history");
  RegretBreakdown out;
  out.per_term.reserve(losses.size());
  for (std::size_t t = 0; t < losses.size(); ++t) {
    const Vector& next = (t + 1 < points.size()) ? points[t + 1] : closing_point;
    double term = (losses[t] - hints[t]).dot(points[t] - next);
    out.per_term.push_back(term);
    out.sum += term;
  }
  return out;
}

// Generic mirror-descent update x' = argmin <g, x> + D_psi(x, x_cur; phi),
// which for subdifferentiable psi is min_oracle(g - phi); the optimality
// condition makes phi - g a valid subgradient at x'.
inline std::pair<Vector, Vector> mirror_step(const Regularizer& reg, const Vector& g,
                                             const Vector& phi) {
  if (g.size() != reg.dimension() || phi.size() != reg.dimension())
    throw ConfigError("mirror_step: dimension mismatch");
  Vector x = regularized_min_oracle(reg, Vector(g - phi));
  return {std::move(x), Vector(phi - g)};
}

// D_psi(x, y; phi) for an indicator regularizer and feasible x, y.
inline double indicator_bregman(const Vector& phi, const Vector& x, const Vector& y) {
  return -phi.dot(x - y);
}

// Closes the open regret pair with the learner's hint-0 update point instead
// of the norm bound; tighter by Cauchy-Schwarz, one extra min-oracle call.
inline double optimistic_gap_extra_lmo(const OptimisticGapTracker& tracker,
                                       const BregmanState& state, const Regularizer& reg,
                                       SubgradientPolicy policy, double A_t) {
  if (!(A_t > 0.0)) throw StateError("optimistic_gap_extra_lmo: A_t must be positive");
  Vector closing = omd_closing_point(state, reg, policy);
  return (tracker.pair_sum_with_closing_vertex(closing) - tracker.bregman_sum()) / A_t;
}

}  // namespace fwpd
