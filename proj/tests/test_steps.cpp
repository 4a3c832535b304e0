#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "fwpd/model.hpp"
#include "fwpd/prng.hpp"
#include "fwpd/steps.hpp"

using namespace fwpd;

namespace {

// Closed forms written out independently of the implementation.
double short_gamma(double inner, double dist_sq, double L) {
  return std::min(1.0, inner / (L * dist_sq));
}
double short_model(double g, double inner, double dist_sq, double L) {
  return g * inner - 0.5 * g * g * L * dist_sq;
}
double pd_gamma(double G, double dist_sq, double L) {
  return std::min(1.0, std::max(G, 0.0) / (L * dist_sq));
}
double pd_model(double g, double G, double dist_sq, double L) {
  return (1.0 - g) * std::max(G, 0.0) + 0.5 * g * g * L * dist_sq;
}

}  // namespace

TEST_CASE("short step equals its closed form exactly", "[steps]") {
  auto rng = seeded_stream(41, "short");
  std::uniform_real_distribution<double> u(0.01, 4.0);
  for (int rep = 0; rep < 500; ++rep) {
    double inner = u(rng), dist_sq = u(rng), L = u(rng);
    StepDecision d = short_step(inner, dist_sq, L);
    REQUIRE(d.rule_tag == StepRule::short_step);
    REQUIRE(d.gamma_or_a == short_gamma(inner, dist_sq, L));
    REQUIRE(d.model_value == short_model(d.gamma_or_a, inner, dist_sq, L));
    REQUIRE_FALSE(d.stationary);
  }
  // Nonpositive alignment or a zero direction is a stationarity signal.
  REQUIRE(short_step(0.0, 1.0, 2.0).stationary);
  REQUIRE(short_step(-0.5, 1.0, 2.0).stationary);
  REQUIRE(short_step(1.0, 0.0, 2.0).stationary);
  REQUIRE_THROWS_AS(short_step(1.0, 1.0, 0.0), ConfigError);
  REQUIRE_THROWS_AS(short_step(1.0, -1.0, 2.0), ConfigError);
}

TEST_CASE("gap-driven short step equals its closed form and contracts", "[steps]") {
  // Worked examples.
  StepDecision d = pd_short_step(0.5, 1.0, 2.0);
  REQUIRE(d.gamma_or_a == 0.25);
  REQUIRE(d.model_value == 0.4375);
  d = pd_short_step(2.0, 1.0, 2.0);
  REQUIRE(d.gamma_or_a == 1.0);
  REQUIRE(d.model_value == 1.0);

  auto rng = seeded_stream(42, "pd_short");
  std::uniform_real_distribution<double> u(0.01, 4.0);
  for (int rep = 0; rep < 500; ++rep) {
    double G = u(rng) - 0.5, dist_sq = u(rng), L = u(rng);
    StepDecision s = pd_short_step(G, dist_sq, L);
    REQUIRE(s.gamma_or_a == pd_gamma(G, dist_sq, L));
    REQUIRE(s.model_value == pd_model(s.gamma_or_a, G, dist_sq, L));
    // Interior or clipped, the model sits at or below (1 - gamma/2) G.
    double g = std::max(G, 0.0);
    REQUIRE(s.model_value <= (1.0 - 0.5 * s.gamma_or_a) * g + 1e-12);
    // The chosen gamma beats a fine scan of the model.
    for (double probe = 0.0; probe <= 1.0; probe += 1.0 / 128.0)
      REQUIRE(s.model_value <= pd_model(probe, G, dist_sq, L) + 1e-12);
  }

  // Zero direction: positive gap forces the degenerate full step, zero gap
  // is stationary.
  StepDecision deg = pd_short_step(0.7, 0.0, 1.0);
  REQUIRE(deg.degenerate);
  REQUIRE(deg.gamma_or_a == 1.0);
  StepDecision st = pd_short_step(0.0, 0.0, 1.0);
  REQUIRE(st.stationary);
  REQUIRE_THROWS_AS(pd_short_step(1.0, 1.0, -1.0), ConfigError);
}

TEST_CASE("unimodal search returns its best probe within tolerance", "[steps]") {
  auto [x, v] = minimize_unimodal([](double t) { return (t - 0.3) * (t - 0.3); }, 0.0, 1.0, 1e-10);
  REQUIRE(std::abs(x - 0.3) < 1e-8);
  REQUIRE(v <= 0.09 + 1e-15);  // never exceeds the endpoint value at 0

  // Minimum at an endpoint.
  auto [xe, ve] = minimize_unimodal([](double t) { return t; }, 0.0, 1.0, 1e-10);
  REQUIRE(xe < 1e-8);
  REQUIRE(ve == xe);

  REQUIRE_THROWS_AS(minimize_unimodal([](double) { return 1.0; }, 1.0, 0.0, 1e-10), ConfigError);
  REQUIRE_THROWS_AS(minimize_unimodal([](double) { return 1.0; }, 0.0, 1.0, 0.0), ConfigError);
  REQUIRE_THROWS_AS(minimize_unimodal(
                        [](double t) { return t > 0.5 ? std::numeric_limits<double>::quiet_NaN() : t; },
                        0.0, 1.0, 1e-10),
                    OracleError);
}

TEST_CASE("FW line search minimizes the realized next gap", "[steps]") {
  const int n = 6;
  auto rng = seeded_stream(43, "fw_ls");
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector anchor(n);
  for (int i = 0; i < n; ++i) anchor[i] = gauss(rng) + 0.5;
  Objective f = make_distance_objective(anchor);
  SimplexSet set(n);

  for (int rep = 0; rep < 20; ++rep) {
    Vector x = sample_set_point(set, rng);
    Vector grad = f.gradient(x);
    Vector v = set.lmo(grad);
    double inner = grad.dot(v - x);
    double G_prev = 0.1 + 0.2 * rep;

    StepDecision ls = pd_line_search_fw(f, x, v, G_prev, inner);
    REQUIRE(ls.rule_tag == StepRule::pd_line_search);

    // Independent restriction of the same curve; the squared distance is an
    // exact quadratic along the segment.
    Vector d = v - x;
    double f_x = f.value(x);
    double c1 = 2.0 * (x - anchor).dot(d);
    double c2 = d.squaredNorm();
    auto h = [&](double g) {
      double fv = f_x + g * c1 + g * g * c2;
      return (1.0 - g) * G_prev - g * inner + fv - f_x;
    };
    double grid_best = std::numeric_limits<double>::infinity(), grid_arg = 0.0;
    for (int i = 0; i <= 100000; ++i) {
      double g = double(i) / 100000.0;
      double val = h(g);
      if (val < grid_best) {
        grid_best = val;
        grid_arg = g;
      }
    }
    REQUIRE(ls.model_value <= grid_best + 1e-9);
    REQUIRE(std::abs(ls.gamma_or_a - grid_arg) <= 2e-5);

    // Dominates the smoothness-model step on the same state.
    StepDecision ps = pd_short_step(G_prev, d.squaredNorm(), f.smoothness_L);
    REQUIRE(ls.model_value <= ps.model_value + 1e-10);
  }
}

TEST_CASE("descent gap model matches an independent rearrangement", "[steps]") {
  auto rng = seeded_stream(44, "gd_model");
  std::uniform_real_distribution<double> u(0.01, 5.0);
  for (int rep = 0; rep < 300; ++rep) {
    double a = u(rng), sG = u(rng), g2 = u(rng), A = u(rng) - 0.01, L = u(rng);
    double want = sG / (A + a) - g2 * a * (2.0 * A + a) / (2.0 * (A + a)) +
                  0.5 * g2 * a * a * L;
    REQUIRE(gd_gap_model(a, sG, g2, A, L) == Catch::Approx(want).epsilon(1e-12).margin(1e-12));
  }
}

TEST_CASE("descent short step solves its optimality condition", "[steps]") {
  // Anchor: script_G = 0.5, g2 = 1, A = 0, L = 1 has the exact minimizer 1.
  StepDecision d = gd_pd_short_step(0.5, 1.0, 0.0, 1.0);
  REQUIRE(d.rule_tag == StepRule::gd_pd_short);
  REQUIRE(std::abs(d.gamma_or_a - 1.0) < 1e-9);
  REQUIRE(d.model_value == Catch::Approx(gd_gap_model(1.0, 0.5, 1.0, 0.0, 1.0)).margin(1e-9));

  auto rng = seeded_stream(45, "gd_short");
  std::uniform_real_distribution<double> u(0.01, 5.0);
  for (int rep = 0; rep < 100; ++rep) {
    double sG = u(rng), g2 = u(rng), A = u(rng) - 0.01, L = u(rng);
    StepDecision s = gd_pd_short_step(sG, g2, A, L, rep % 3 == 0 ? u(rng) : 0.0);
    REQUIRE(s.gamma_or_a >= 0.5 / L - 1e-12);
    // Beats a fine scan of the model over the admissible ray.
    double lo = 0.5 / L;
    double hi = std::max(4.0 * s.gamma_or_a, 2.0 * lo);
    for (int i = 0; i <= 4000; ++i) {
      double a = lo + (hi - lo) * double(i) / 4000.0;
      REQUIRE(s.model_value <= gd_gap_model(a, sG, g2, A, L) + 1e-9);
    }
  }

  StepDecision st = gd_pd_short_step(1.0, 0.0, 2.0, 1.0);
  REQUIRE(st.stationary);
  REQUIRE(st.model_value == 0.5);
  REQUIRE_THROWS_AS(gd_pd_short_step(-1.0, 1.0, 0.0, 1.0), ConfigError);
  REQUIRE_THROWS_AS(gd_pd_short_step(1.0, 1.0, -1.0, 1.0), ConfigError);
  REQUIRE_THROWS_AS(gd_pd_short_step(1.0, 1.0, 0.0, 0.0), ConfigError);
}

TEST_CASE("descent line search beats a grid on the realized curve", "[steps]") {
  const int n = 5;
  auto rng = seeded_stream(46, "gd_ls");
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector anchor(n);
  for (int i = 0; i < n; ++i) anchor[i] = gauss(rng);
  Objective f = make_distance_objective(anchor);
  const double L = f.smoothness_L;

  for (int rep = 0; rep < 15; ++rep) {
    Vector x(n);
    for (int i = 0; i < n; ++i) x[i] = 2.0 * gauss(rng);
    Vector grad = f.gradient(x);
    double g2 = grad.squaredNorm();
    if (g2 < 1e-12) continue;
    double sG = 0.3 + 0.1 * rep, A = 0.2 * rep;

    StepDecision ls = gd_pd_line_search(f, x, grad, sG, A);
    REQUIRE(ls.rule_tag == StepRule::gd_pd_line_search);
    REQUIRE(ls.gamma_or_a >= 0.5 / L - 1e-12);

    // Exact restriction: the squared distance along the gradient ray.
    double f_x = f.value(x);
    double c1 = -2.0 * (x - anchor).dot(grad);
    double c2 = grad.squaredNorm();
    auto psi = [&](double a) {
      double fv = f_x + a * c1 + a * a * c2;
      return sG / (A + a) + 0.5 * a * a * g2 / (A + a) + fv - f_x;
    };
    double lo = 0.5 / L;
    double hi = std::max(4.0 * ls.gamma_or_a, 2.0 * lo);
    double grid_best = std::numeric_limits<double>::infinity(), grid_arg = lo;
    for (int i = 0; i <= 200000; ++i) {
      double a = lo + (hi - lo) * double(i) / 200000.0;
      double val = psi(a);
      if (val < grid_best) {
        grid_best = val;
        grid_arg = a;
      }
    }
    REQUIRE(ls.model_value <= grid_best + 1e-8);
    REQUIRE(std::abs(ls.gamma_or_a - grid_arg) <= 1e-4 * std::max(1.0, grid_arg));
  }

  Vector zero_grad = Vector::Zero(n);
  StepDecision st = gd_pd_line_search(f, anchor, zero_grad, 1.0, 2.0);
  REQUIRE(st.stationary);
  REQUIRE_THROWS_AS(gd_pd_line_search(f, anchor, zero_grad, -1.0, 0.0), ConfigError);
}

TEST_CASE("both line-search curves pass midpoint convexity spot checks", "[steps]") {
  const int n = 4;
  auto rng = seeded_stream(47, "midpoint");
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  Vector anchor(n);
  for (int i = 0; i < n; ++i) anchor[i] = gauss(rng) + 0.4;
  Objective f = make_distance_objective(anchor);
  SimplexSet set(n);

  Vector x = sample_set_point(set, rng);
  Vector grad = f.gradient(x);
  Vector v = set.lmo(grad);
  double inner = grad.dot(v - x);
  double G = 0.4;
  auto h = [&](double g) {
    return (1.0 - g) * G - g * inner + f.value(Vector(x + g * (v - x))) - f.value(x);
  };
  for (int s = 0; s < 200; ++s) {
    double g1 = u01(rng), g2v = u01(rng);
    REQUIRE(h(0.5 * (g1 + g2v)) <= 0.5 * (h(g1) + h(g2v)) + 1e-12);
  }

  Vector y(n);
  for (int i = 0; i < n; ++i) y[i] = 2.0 * gauss(rng);
  Vector gy = f.gradient(y);
  double g2 = gy.squaredNorm();
  double sG = 0.7, A = 1.3;
  auto psi = [&](double a) {
    return sG / (A + a) + 0.5 * a * a * g2 / (A + a) + f.value(Vector(y - a * gy)) - f.value(y);
  };
  for (int s = 0; s < 200; ++s) {
    double a1 = 0.25 + 3.0 * u01(rng), a2 = 0.25 + 3.0 * u01(rng);
    REQUIRE(psi(0.5 * (a1 + a2)) <= 0.5 * (psi(a1) + psi(a2)) + 1e-12);
  }
}
