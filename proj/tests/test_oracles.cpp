#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <vector>

#include "fwpd/model.hpp"
#include "fwpd/prng.hpp"
#include "fwpd/regularizer.hpp"
#include "fwpd/sets.hpp"

using namespace fwpd;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

bool same(const Vector& a, const Vector& b) {
  return a.size() == b.size() && (a.array() == b.array()).all();
}

// Enumeration oracle: best simplex vertex, lowest index on ties.
Vector brute_simplex_vertex(const Vector& w) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < w.size(); ++i)
    if (w[i] < w[best]) best = i;
  Vector v = Vector::Zero(w.size());
  v[best] = 1.0;
  return v;
}

// Enumeration oracle: best k-subset by full subset enumeration.
double brute_ksparse_value(const Vector& w, int k) {
  const int n = static_cast<int>(w.size());
  double best = std::numeric_limits<double>::infinity();
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (std::popcount(mask) != k) continue;
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      if (mask & (1u << i)) s += w[i];
    best = std::min(best, s);
  }
  return best;
}

// Tie-break oracle: k smallest entries under the (value, index) order.
Vector brute_ksparse_vertex(const Vector& w, int k) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(w.size()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
    return w[a] < w[b] || (w[a] == w[b] && a < b);
  });
  Vector v = Vector::Zero(w.size());
  for (int j = 0; j < k; ++j) v[idx[static_cast<std::size_t>(j)]] = 1.0;
  return v;
}

}  // namespace

TEST_CASE("simplex linear minimization agrees with vertex enumeration", "[oracles]") {
  auto rng = seeded_stream(21, "lmo_simplex");
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int rep = 0; rep < 1000; ++rep) {
    int n = 1 + rep % 10;
    Vector w(n);
    for (int i = 0; i < n; ++i) w[i] = gauss(rng);
    Vector got = lmo_simplex(w);
    Vector want = brute_simplex_vertex(w);
    REQUIRE(same(got, want));
  }

  // Forced ties resolve to the lowest index.
  REQUIRE(same(lmo_simplex(vec({2.0, 1.0, 1.0, 5.0})), vec({0.0, 1.0, 0.0, 0.0})));
  REQUIRE(same(lmo_simplex(vec({3.0, 3.0, 3.0})), vec({1.0, 0.0, 0.0})));

  Vector nan_dir = vec({0.0, std::numeric_limits<double>::quiet_NaN()});
  REQUIRE_THROWS_AS(lmo_simplex(nan_dir), OracleError);
  REQUIRE_THROWS_AS(lmo_simplex(Vector()), OracleError);
}

TEST_CASE("k-sparse linear minimization agrees with subset enumeration", "[oracles]") {
  auto rng = seeded_stream(22, "lmo_ksparse");
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int rep = 0; rep < 500; ++rep) {
    int n = 2 + rep % 9;
    int k = 1 + rep % n;
    Vector w(n);
    for (int i = 0; i < n; ++i) w[i] = gauss(rng);
    Vector got = lmo_ksparse(w, k);
    REQUIRE(got.sum() == Catch::Approx(double(k)));
    for (int i = 0; i < n; ++i) REQUIRE((got[i] == 0.0 || got[i] == 1.0));
    REQUIRE(w.dot(got) == Catch::Approx(brute_ksparse_value(w, k)).margin(1e-12));
  }

  // Duplicated entries: the winning subset is the (value, index) prefix.
  Vector tie = vec({1.0, 0.5, 0.5, 0.5, 2.0});
  REQUIRE(same(lmo_ksparse(tie, 2), brute_ksparse_vertex(tie, 2)));
  REQUIRE(same(lmo_ksparse(tie, 2), vec({0.0, 1.0, 1.0, 0.0, 0.0})));
  Vector flat = vec({7.0, 7.0, 7.0, 7.0});
  REQUIRE(same(lmo_ksparse(flat, 3), vec({1.0, 1.0, 1.0, 0.0})));

  REQUIRE_THROWS_AS(lmo_ksparse(tie, 0), OracleError);
  REQUIRE_THROWS_AS(lmo_ksparse(tie, 6), OracleError);
}

TEST_CASE("set classes wire the oracles with diameters and membership", "[oracles]") {
  SimplexSet s(4);
  REQUIRE(s.diameter_sq() == 2.0);
  REQUIRE(SimplexSet(1).diameter_sq() == 0.0);
  REQUIRE(s.contains(vec({0.25, 0.25, 0.25, 0.25}), 1e-9));
  REQUIRE_FALSE(s.contains(vec({0.5, 0.5, 0.5, -0.5}), 1e-9));
  REQUIRE_FALSE(s.contains(vec({1.0, 0.0}), 1e-9));
  REQUIRE_THROWS_AS(s.lmo(vec({1.0, 2.0})), OracleError);

  KSparseSet ks(6, 2);
  REQUIRE(ks.k() == 2);
  REQUIRE(ks.diameter_sq() == 4.0);
  REQUIRE(KSparseSet(6, 5).diameter_sq() == 2.0);
  REQUIRE(ks.contains(vec({1.0, 1.0, 0.0, 0.0, 0.0, 0.0}), 1e-9));
  REQUIRE(ks.contains(vec({0.5, 0.5, 0.5, 0.5, 0.0, 0.0}), 1e-9));
  REQUIRE_FALSE(ks.contains(vec({2.0, 0.0, 0.0, 0.0, 0.0, 0.0}), 1e-9));
  REQUIRE_THROWS_AS(KSparseSet(3, 4), ConfigError);
  REQUIRE_THROWS_AS(SimplexSet(0), ConfigError);
}

TEST_CASE("simplex projection satisfies the variational characterization", "[oracles]") {
  auto rng = seeded_stream(23, "proj");
  std::normal_distribution<double> gauss(0.0, 2.0);
  for (int rep = 0; rep < 200; ++rep) {
    int n = 1 + rep % 12;
    Vector y(n);
    for (int i = 0; i < n; ++i) y[i] = gauss(rng);
    Vector x = project_simplex(y);
    SimplexSet set(n);
    REQUIRE(set.contains(x, 1e-9));
    // <y - x, z - x> <= 0 for every z; it suffices to test the vertices.
    for (int i = 0; i < n; ++i) {
      Vector e = Vector::Zero(n);
      e[i] = 1.0;
      REQUIRE((y - x).dot(e - x) <= 1e-9);
    }
  }
  // Feasible inputs are fixed points.
  Vector p = vec({0.2, 0.3, 0.5});
  REQUIRE((project_simplex(p) - p).norm() < 1e-12);
}

TEST_CASE("k-sparse distance reference is optimal against the feasible set", "[oracles]") {
  auto rng = seeded_stream(24, "ksparse_ref");
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    int n = 3 + rep % 6;
    int k = 1 + rep % n;
    Vector x0(n);
    for (int i = 0; i < n; ++i) x0[i] = 1.5 * gauss(rng);
    auto [xs, val] = reference_optimum_ksparse_distance(x0, k);
    KSparseSet set(n, k);
    REQUIRE(set.contains(xs, 1e-7));
    REQUIRE(val == Catch::Approx((xs - x0).squaredNorm()).margin(1e-12));
    // Projection characterization against every vertex of the set.
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      if (std::popcount(mask) != k) continue;
      Vector z = Vector::Zero(n);
      for (int i = 0; i < n; ++i)
        if (mask & (1u << i)) z[i] = 1.0;
      REQUIRE((x0 - xs).dot(z - xs) <= 1e-8);
    }
    // No sampled feasible point does better.
    for (int s = 0; s < 100; ++s) {
      Vector z = sample_set_point(set, rng);
      REQUIRE((z - x0).squaredNorm() >= val - 1e-9);
    }
  }
  // Interior case: a feasible anchor projects to itself with value 0.
  Vector inside = vec({0.5, 0.5, 1.0});
  auto [xi, vi] = reference_optimum_ksparse_distance(inside, 2);
  REQUIRE(vi == Catch::Approx(0.0).margin(1e-12));
  REQUIRE((xi - inside).norm() < 1e-9);

  REQUIRE_THROWS_AS(reference_optimum_ksparse_distance(Vector::Zero(13), 2), ConfigError);
}

TEST_CASE("regularizer oracles reduce to the set oracles they wrap", "[oracles]") {
  auto set = std::make_shared<SimplexSet>(5);
  IndicatorRegularizer ind(set);
  REQUIRE(ind.is_indicator());
  REQUIRE(ind.dimension() == 5);
  REQUIRE(ind.value(vec({0.2, 0.2, 0.2, 0.2, 0.2})) == 0.0);
  REQUIRE(std::isinf(ind.value(vec({1.0, 1.0, 0.0, 0.0, 0.0}))));
  REQUIRE(ind.subgradient(vec({1.0, 0.0, 0.0, 0.0, 0.0})).isZero(0.0));

  Vector c = vec({0.3, -0.2, 0.0, 0.1, -0.4});
  LinearIndicatorRegularizer lin(c, set);
  REQUIRE_FALSE(lin.is_indicator());
  REQUIRE(same(lin.subgradient(vec({0.0, 0.0, 1.0, 0.0, 0.0})), c));

  auto rng = seeded_stream(25, "reg");
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int rep = 0; rep < 100; ++rep) {
    Vector w(5);
    for (int i = 0; i < 5; ++i) w[i] = gauss(rng);
    REQUIRE(same(ind.min_oracle(w), set->lmo(w)));
    REQUIRE(same(lin.min_oracle(w), set->lmo(Vector(w + c))));
    Vector x = sample_set_point(*set, rng);
    REQUIRE(lin.value(x) == Catch::Approx(c.dot(x)).margin(1e-12));
  }
  REQUIRE(std::isinf(lin.value(vec({1.0, 1.0, 0.0, 0.0, 1.0}))));

  Vector bad = vec({0.0, 0.0, 0.0, 0.0, std::numeric_limits<double>::infinity()});
  REQUIRE_THROWS_AS(regularized_min_oracle(ind, bad), OracleError);
  REQUIRE_THROWS_AS(regularized_min_oracle(ind, vec({1.0, 2.0})), OracleError);
  REQUIRE(same(regularized_min_oracle(ind, Vector::Zero(5)), vec({1.0, 0.0, 0.0, 0.0, 0.0})));
}

TEST_CASE("seeded streams are deterministic and independent per tag", "[oracles]") {
  auto a1 = seeded_stream(42, "alpha");
  auto a2 = seeded_stream(42, "alpha");
  auto b = seeded_stream(42, "beta");
  auto c = seeded_stream(43, "alpha");
  bool same = true, tag_diff = false, seed_diff = false;
  for (int i = 0; i < 32; ++i) {
    auto x = a1();
    same = same && (x == a2());
    tag_diff = tag_diff || (x != b());
    seed_diff = seed_diff || (x != c());
  }
  REQUIRE(same);
  REQUIRE(tag_diff);
  REQUIRE(seed_diff);

  // Drawing from one stream leaves another stream's sequence unchanged.
  auto fresh = seeded_stream(42, "beta");
  auto again = seeded_stream(42, "beta");
  (void)seeded_stream(42, "alpha")();
  for (int i = 0; i < 8; ++i) REQUIRE(fresh() == again());
}
