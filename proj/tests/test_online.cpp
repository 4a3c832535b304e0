#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include "fwpd/gaps.hpp"
#include "fwpd/online.hpp"
#include "fwpd/prng.hpp"
#include "fwpd/regularizer.hpp"
#include "fwpd/sets.hpp"

using namespace fwpd;

namespace {

bool same(const Vector& a, const Vector& b) {
  return a.size() == b.size() && (a.array() == b.array()).all();
}

Vector randn(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

Vector vertex(int n, int i) {
  Vector u = Vector::Zero(n);
  u[i] = 1.0;
  return u;
}

}  // namespace

TEST_CASE("a fresh learner proposes the zero-direction oracle point", "[online]") {
  auto set = std::make_shared<SimplexSet>(5);
  IndicatorRegularizer reg(set);
  BregmanState st(reg);
  REQUIRE(same(st.v(), vertex(5, 0)));
  REQUIRE(st.phi().isZero(0.0));
  REQUIRE(st.accumulated_linear().isZero(0.0));
  REQUIRE(st.rounds() == 0);
  REQUIRE_FALSE(st.has_pending());
}

TEST_CASE("leader and mirror rules coincide bitwise under the equivalent policy", "[online]") {
  const int n = 6;
  auto set = std::make_shared<SimplexSet>(n);
  IndicatorRegularizer reg(set);
  BregmanState a_state(reg), b_state(reg);
  auto rng = seeded_stream(51, "ftrl_eq");

  for (int t = 0; t < 40; ++t) {
    double w = 2.0 * (t + 1);
    Hint h{t == 0 ? Vector(Vector::Zero(n)) : randn(n, rng), w};
    Vector va = oftrl_step(a_state, h, reg);
    Vector vb = omd_step(b_state, h, reg, SubgradientPolicy::ftrl_equivalent);
    REQUIRE(same(va, vb));
    REQUIRE(same(a_state.phi(), b_state.phi()));

    // The stored subgradient is minus the oracle input.
    Vector w_manual = a_state.accumulated_linear() + h.weight * h.g_tilde;
    REQUIRE(same(a_state.phi(), Vector(-w_manual)));

    Vector g = randn(n, rng);
    a_state.absorb_realized(g, w);
    b_state.absorb_realized(g, w);
    REQUIRE(a_state.rounds() == t + 1);
    REQUIRE(same(a_state.accumulated_linear(), b_state.accumulated_linear()));
  }

  Vector ca = omd_closing_point(a_state, reg, SubgradientPolicy::ftrl_equivalent);
  Vector cb = omd_closing_point(b_state, reg, SubgradientPolicy::ftrl_equivalent);
  REQUIRE(same(ca, cb));
  REQUIRE(same(ca, regularized_min_oracle(reg, a_state.accumulated_linear())));
}

TEST_CASE("zero-subgradient mirror updates follow the memoryless input vector", "[online]") {
  const int n = 4;
  auto set = std::make_shared<SimplexSet>(n);
  IndicatorRegularizer reg(set);
  BregmanState st(reg);
  auto rng = seeded_stream(52, "omd_zero");

  for (int t = 0; t < 25; ++t) {
    double w = 1.0 + 0.5 * t;
    Hint h{randn(n, rng), w};
    double lw = st.last_weight();
    Vector lr = st.last_realized(), lh = st.last_hint(), phi_before = st.phi();
    Vector v = omd_step(st, h, reg, SubgradientPolicy::zero);
    Vector w_manual = lw * (lr - lh) + h.weight * h.g_tilde - phi_before;
    REQUIRE(same(v, regularized_min_oracle(reg, w_manual)));
    REQUIRE(st.phi().isZero(0.0));
    st.absorb_realized(randn(n, rng), w);
  }
}

TEST_CASE("the two subgradient policies really are different trajectories", "[online]") {
  const int n = 2;
  auto set = std::make_shared<SimplexSet>(n);
  IndicatorRegularizer reg(set);
  BregmanState ftrl_state(reg), zero_state(reg);
  Hint h0{Vector(Vector::Zero(n)), 1.0};

  Vector g0(2), g1(2);
  g0 << 0.0, 1.0;
  g1 << 1.0, 0.0;

  oftrl_step(ftrl_state, h0, reg);
  omd_step(zero_state, h0, reg, SubgradientPolicy::zero);
  ftrl_state.absorb_realized(g0, 1.0);
  zero_state.absorb_realized(g0, 1.0);

  oftrl_step(ftrl_state, h0, reg);
  omd_step(zero_state, h0, reg, SubgradientPolicy::zero);
  ftrl_state.absorb_realized(g1, 1.0);
  zero_state.absorb_realized(g1, 1.0);

  // Accumulated losses tie at (1,1) so the leader replays index 0; the
  // memoryless rule only sees g1 and moves to index 1.
  Vector vf = oftrl_step(ftrl_state, h0, reg);
  Vector vz = omd_step(zero_state, h0, reg, SubgradientPolicy::zero);
  REQUIRE(same(vf, vertex(n, 0)));
  REQUIRE(same(vz, vertex(n, 1)));
}

TEST_CASE("learner state transitions are guarded", "[online]") {
  const int n = 3;
  auto set = std::make_shared<SimplexSet>(n);
  IndicatorRegularizer reg(set);
  auto rng = seeded_stream(53, "guards");

  BregmanState st(reg);
  REQUIRE_THROWS_AS(st.absorb_realized(randn(n, rng), 1.0), StateError);

  Hint h{randn(n, rng), 2.0};
  oftrl_step(st, h, reg);
  REQUIRE_THROWS_AS(oftrl_step(st, h, reg), StateError);
  REQUIRE_THROWS_AS(omd_step(st, h, reg, SubgradientPolicy::zero), StateError);
  REQUIRE_THROWS_AS(omd_closing_point(st, reg, SubgradientPolicy::ftrl_equivalent), StateError);
  REQUIRE_THROWS_AS(st.absorb_realized(randn(n, rng), 3.0), StateError);
  st.absorb_realized(randn(n, rng), 2.0);

  Hint bad{randn(n + 1, rng), 1.0};
  REQUIRE_THROWS_AS(oftrl_step(st, bad, reg), ConfigError);
  REQUIRE_THROWS_AS(omd_step(st, bad, reg, SubgradientPolicy::zero), ConfigError);
}

TEST_CASE("closing points follow their formulas", "[online]") {
  const int n = 5;
  auto set = std::make_shared<SimplexSet>(n);
  IndicatorRegularizer reg(set);
  auto rng = seeded_stream(54, "closing");

  BregmanState ftrl_state(reg), zero_state(reg);
  for (int t = 0; t < 6; ++t) {
    double w = t + 1.0;
    Hint h{randn(n, rng), w};
    oftrl_step(ftrl_state, h, reg);
    omd_step(zero_state, h, reg, SubgradientPolicy::zero);
    Vector g = randn(n, rng);
    ftrl_state.absorb_realized(g, w);
    zero_state.absorb_realized(g, w);
  }

  Vector cf = omd_closing_point(ftrl_state, reg, SubgradientPolicy::ftrl_equivalent);
  REQUIRE(same(cf, regularized_min_oracle(reg, ftrl_state.accumulated_linear())));

  Vector cz = omd_closing_point(zero_state, reg, SubgradientPolicy::zero);
  Vector w_manual = zero_state.last_weight() * (zero_state.last_realized() - zero_state.last_hint()) -
                    zero_state.phi();
  REQUIRE(same(cz, regularized_min_oracle(reg, w_manual)));
}

TEST_CASE("hint-error terms recompute independently and validate lengths", "[online]") {
  const int n = 3, T = 8;
  auto rng = seeded_stream(55, "regret_terms");
  std::vector<Vector> losses, hints, points;
  for (int t = 0; t < T; ++t) {
    losses.push_back(randn(n, rng));
    hints.push_back(randn(n, rng));
    points.push_back(randn(n, rng));
  }
  Vector closing = randn(n, rng);

  RegretBreakdown rb = regret_terms(losses, hints, points, closing);
  REQUIRE(rb.per_term.size() == std::size_t(T));
  double acc = 0.0;
  for (int t = 0; t < T; ++t) {
    const Vector& next = (t + 1 < T) ? points[t + 1] : closing;
    double term = (losses[t] - hints[t]).dot(points[t] - next);
    REQUIRE(rb.per_term[t] == term);
    acc += term;
  }
  REQUIRE(rb.sum == acc);

  std::vector<Vector> short_hints(hints.begin(), hints.end() - 1);
  REQUIRE_THROWS_AS(regret_terms(losses, short_hints, points, closing), StateError);
  std::vector<Vector> empty;
  REQUIRE_THROWS_AS(regret_terms(empty, empty, empty, closing), StateError);
}

TEST_CASE("mirror step satisfies the three-point identity at every vertex", "[online]") {
  const int n = 5;
  auto set = std::make_shared<SimplexSet>(n);
  IndicatorRegularizer reg(set);
  auto rng = seeded_stream(56, "three_point");

  Vector x_cur = regularized_min_oracle(reg, Vector(Vector::Zero(n)));
  Vector phi = Vector::Zero(n);
  for (int t = 0; t < 30; ++t) {
    Vector g = randn(n, rng);
    auto [x_next, phi_next] = mirror_step(reg, g, phi);
    REQUIRE(set->contains(x_next, 1e-12));
    REQUIRE(same(phi_next, Vector(phi - g)));
    for (int i = 0; i < n; ++i) {
      Vector u = vertex(n, i);
      double lhs = g.dot(x_next - u);
      double rhs = indicator_bregman(phi, u, x_cur) - indicator_bregman(phi_next, u, x_next) -
                   indicator_bregman(phi, x_next, x_cur);
      REQUIRE(lhs <= rhs + 1e-9);
      REQUIRE(std::abs(lhs - rhs) < 1e-9);
    }
    x_cur = x_next;
    phi = phi_next;
  }
}

TEST_CASE("both learners meet their regret bounds on small games", "[online]") {
  const int n = 4, T = 25;
  auto set = std::make_shared<SimplexSet>(n);
  IndicatorRegularizer reg(set);
  auto rng = seeded_stream(57, "small_games");

  BregmanState leader(reg), mirror_zero(reg), mirror_eq(reg);
  std::vector<Vector> wl, wh, pts_leader, pts_zero, pts_eq;
  Vector prev_grad = Vector::Zero(n);
  for (int t = 0; t < T; ++t) {
    double w = t + 1.0;
    Hint h{prev_grad, w};
    pts_leader.push_back(oftrl_step(leader, h, reg));
    pts_zero.push_back(omd_step(mirror_zero, h, reg, SubgradientPolicy::zero));
    pts_eq.push_back(omd_step(mirror_eq, h, reg, SubgradientPolicy::ftrl_equivalent));
    Vector g = randn(n, rng);
    wl.push_back((w * g).eval());
    wh.push_back((w * h.g_tilde).eval());
    leader.absorb_realized(g, w);
    mirror_zero.absorb_realized(g, w);
    mirror_eq.absorb_realized(g, w);
    prev_grad = g;
  }

  auto regret = [&](const std::vector<Vector>& pts, const Vector& u) {
    double r = 0.0;
    for (int t = 0; t < T; ++t) r += wl[t].dot(pts[t] - u);
    return r;
  };

  Vector close_zero = omd_closing_point(mirror_zero, reg, SubgradientPolicy::zero);
  Vector close_eq = omd_closing_point(mirror_eq, reg, SubgradientPolicy::ftrl_equivalent);
  double bound_zero = regret_terms(wl, wh, pts_zero, close_zero).sum;
  double bound_eq = regret_terms(wl, wh, pts_eq, close_eq).sum;
  for (int i = 0; i < n; ++i) {
    Vector u = vertex(n, i);
    REQUIRE(regret(pts_leader, u) <= regret_terms(wl, wh, pts_leader, u).sum + 1e-9);
    REQUIRE(regret(pts_zero, u) <= bound_zero + 1e-9);
    REQUIRE(regret(pts_eq, u) <= bound_eq + 1e-9);
  }
}

TEST_CASE("the vertex-closed certificate never exceeds the norm-closed one", "[online]") {
  const int n = 5;
  auto set = std::make_shared<SimplexSet>(n);
  IndicatorRegularizer reg(set);
  const double D = std::sqrt(set->diameter_sq());
  auto rng = seeded_stream(58, "extra_lmo");
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  BregmanState state(reg);
  OptimisticGapTracker tracker;

  Vector x_prev = sample_set_point(*set, rng);
  Vector grad_prev = randn(n, rng);
  tracker.start(x_prev, u01(rng), grad_prev, state.v());

  double A = 0.0;
  for (int t = 1; t <= 10; ++t) {
    double a_t = 2.0 * t, A_prev = A;
    Hint h{grad_prev, a_t};
    Vector v_t = oftrl_step(state, h, reg);
    Vector x_t = sample_set_point(*set, rng);
    Vector grad_t = randn(n, rng);
    double f_t = u01(rng);
    tracker.absorb(a_t, A_prev, x_t, f_t, grad_t, h.g_tilde, v_t, x_prev);
    state.absorb_realized(grad_t, a_t);
    A += a_t;
    x_prev = x_t;
    grad_prev = grad_t;

    double extra = optimistic_gap_extra_lmo(tracker, state, reg,
                                            SubgradientPolicy::ftrl_equivalent, A);
    double norm_closed = optimistic_gap(tracker, A, D);
    REQUIRE(extra <= norm_closed + 1e-12);
  }
  REQUIRE_THROWS_AS(
      optimistic_gap_extra_lmo(tracker, state, reg, SubgradientPolicy::ftrl_equivalent, 0.0),
      StateError);
}
