#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "fwpd/errors.hpp"

namespace fwpd {

using Vector = Eigen::VectorXd;

inline void check_direction(const Vector& w, const char* who) {
  if (w.size() == 0) throw OracleError(std::string(who) + ": empty direction");
  if (!w.allFinite()) throw OracleError(std::string(who) + ": direction has NaN or Inf entries");
}

// Lowest-index minimizing coordinate; deterministic under ties.
inline Eigen::Index argmin_index(const Vector& w) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < w.size(); ++i)
    if (w[i] < w[best]) best = i;
  return best;
}

// argmin_{v in standard simplex} <w, v>; returns the vertex e_i with the
// smallest w_i, lowest index on ties.
inline Vector lmo_simplex(const Vector& w) {
  check_direction(w, "lmo_simplex");
  Vector v = Vector::Zero(w.size());
  v[argmin_index(w)] = 1.0;
  return v;
}

// argmin over the convex hull of 0/1 vectors with exactly k ones: puts a one
// at the k smallest entries of w, ties broken by lowest index.
inline Vector lmo_ksparse(const Vector& w, int k) {
  check_direction(w, "lmo_ksparse");
  const auto n = w.size();
  if (k < 1 || k > n) throw OracleError("lmo_ksparse: k must satisfy 1 <= k <= dimension");
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::nth_element(idx.begin(), idx.begin() + (k - 1), idx.end(),
                   [&](Eigen::Index a, Eigen::Index b) {
                     return w[a] < w[b] || (w[a] == w[b] && a < b);
                   });
  Vector v = Vector::Zero(n);
  for (int j = 0; j < k; ++j) v[idx[static_cast<std::size_t>(j)]] = 1.0;
  return v;
}

// Compact convex feasible region accessed through a linear minimization
// oracle. diameter_sq is the exact squared Euclidean diameter.
class FeasibleSet {
 public:
  virtual ~FeasibleSet() = default;
  virtual int dimension() const = 0;
  virtual Vector lmo(const Vector& w) const = 0;
  virtual double diameter_sq() const = 0;
  virtual bool contains(const Vector& x, double tol) const = 0;
  virtual std::string name() const = 0;
};

class SimplexSet final : public FeasibleSet {
 public:
  explicit SimplexSet(int n) : n_(n) {
    if (n < 1) throw ConfigError("SimplexSet: dimension must be >= 1");
  }
  int dimension() const override { return n_; }
  Vector lmo(const Vector& w) const override {
    if (w.size() != n_) throw OracleError("SimplexSet::lmo: dimension mismatch");
    return lmo_simplex(w);
  }
  double diameter_sq() const override { return n_ == 1 ? 0.0 : 2.0; }
  bool contains(const Vector& x, double tol) const override {
    if (x.size() != n_) return false;
    if (x.minCoeff() < -tol) return false;
    return std::abs(x.sum() - 1.0) <= tol * std::max(1.0, std::sqrt(double(n_)));
  }
  std::string name() const override { return "simplex(" + std::to_string(n_) + ")"; }

 private:
  int n_;
};

// Convex hull of 0/1 vectors with exactly k ones, equivalently
// {x in [0,1]^n : sum x = k}.
class KSparseSet final : public FeasibleSet {
 public:
  KSparseSet(int n, int k) : n_(n), k_(k) {
    if (n < 1) throw ConfigError("KSparseSet: dimension must be >= 1");
    if (k < 1 || k > n) throw ConfigError("KSparseSet: k must satisfy 1 <= k <= dimension");
  }
  int dimension() const override { return n_; }
  int k() const { return k_; }
  Vector lmo(const Vector& w) const override {
    if (w.size() != n_) throw OracleError("KSparseSet::lmo: dimension mismatch");
    return lmo_ksparse(w, k_);
  }
  double diameter_sq() const override { return 2.0 * std::min(k_, n_ - k_); }
  bool contains(const Vector& x, double tol) const override {
    if (x.size() != n_) return false;
    if (x.minCoeff() < -tol || x.maxCoeff() > 1.0 + tol) return false;
    return std::abs(x.sum() - double(k_)) <= tol * std::max(1.0, std::sqrt(double(n_)));
  }
  std::string name() const override {
    return "ksparse(" + std::to_string(n_) + "," + std::to_string(k_) + ")";
  }

 private:
  int n_;
  int k_;
};

// Euclidean projection onto the standard simplex by sorting and thresholding.
inline Vector project_simplex(const Vector& y) {
  check_direction(y, "project_simplex");
  const auto n = y.size();
  std::vector<double> u(y.data(), y.data() + n);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cum = 0.0, tau = 0.0;
  int rho = 0;
  for (int j = 0; j < n; ++j) {
    cum += u[static_cast<std::size_t>(j)];
    double t = (cum - 1.0) / double(j + 1);
    if (u[static_cast<std::size_t>(j)] - t > 0.0) {
      rho = j + 1;
      tau = t;
    }
  }
  Vector x(n);
  for (Eigen::Index i = 0; i < n; ++i) x[i] = std::max(0.0, y[i] - tau);
  (void)rho;
  return x;
}

// Exact minimizer of ||x - x0||^2 over {x in [0,1]^n : sum x = k}, found by
// enumerating all fixed-at-0 / fixed-at-1 / free classifications (3^n).
// Intended for small reference instances only.
inline std::pair<Vector, double> reference_optimum_ksparse_distance(const Vector& x0, int k) {
  const int n = static_cast<int>(x0.size());
  if (n < 1 || n > 12)
    throw ConfigError("reference_optimum_ksparse_distance: supported for 1 <= n <= 12");
  if (k < 1 || k > n)
    throw ConfigError("reference_optimum_ksparse_distance: k must satisfy 1 <= k <= n");
  check_direction(x0, "reference_optimum_ksparse_distance");

  long patterns = 1;
  for (int i = 0; i < n; ++i) patterns *= 3;

  double best_val = std::numeric_limits<double>::infinity();
  Vector best_x;
  std::vector<int> cls(static_cast<std::size_t>(n));
  const double tol = 1e-12;
  for (long p = 0; p < patterns; ++p) {
    long q = p;
    int ones = 0, free_cnt = 0;
    double free_sum = 0.0;
    for (int i = 0; i < n; ++i) {
      int c = static_cast<int>(q % 3);
      q /= 3;
      cls[static_cast<std::size_t>(i)] = c;
      if (c == 1) ++ones;
      if (c == 2) {
        ++free_cnt;
        free_sum += x0[i];
      }
    }
    Vector x = Vector::Zero(n);
    if (free_cnt == 0) {
      if (ones != k) continue;
    } else {
      double tau = (free_sum - (double(k) - double(ones))) / double(free_cnt);
      bool ok = true;
      for (int i = 0; i < n && ok; ++i) {
        if (cls[static_cast<std::size_t>(i)] == 2) {
          double xi = x0[i] - tau;
          if (xi < -tol || xi > 1.0 + tol) ok = false;
          x[i] = std::clamp(xi, 0.0, 1.0);
        }
      }
      if (!ok) continue;
    }
    for (int i = 0; i < n; ++i)
      if (cls[static_cast<std::size_t>(i)] == 1) x[i] = 1.0;
    if (std::abs(x.sum() - double(k)) > 1e-9) continue;
    double val = (x - x0).squaredNorm();
    if (val < best_val) {
      best_val = val;
      best_x = x;
    }
  }
  return {best_x, best_val};
}

}  // namespace fwpd
