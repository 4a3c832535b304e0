#pragma once

#include <limits>
#include <memory>
#include <string>
#include <utility>

#include "fwpd/errors.hpp"
#include "fwpd/sets.hpp"

namespace fwpd {

// Proper closed convex regularizer accessed through a generalized linear
// minimization oracle: min_oracle(w) = argmin_v <w, v> + psi(v).
class Regularizer {
 public:
  virtual ~Regularizer() = default;
  virtual double value(const Vector& x) const = 0;
  virtual Vector min_oracle(const Vector& w) const = 0;
  // Some subgradient of psi at x; x must be in the domain.
  virtual Vector subgradient(const Vector& x) const = 0;
  virtual int dimension() const = 0;
  virtual bool is_indicator() const { return false; }
  virtual std::string name() const = 0;
};

// psi = indicator of a feasible set; value() uses a fixed containment
// tolerance so iterates built from convex combinations evaluate to 0.
class IndicatorRegularizer final : public Regularizer {
 public:
  explicit IndicatorRegularizer(std::shared_ptr<const FeasibleSet> set, double tol = 1e-7)
      : set_(std::move(set)), tol_(tol) {
    if (!set_) throw ConfigError("IndicatorRegularizer: null set");
  }
  double value(const Vector& x) const override {
    return set_->contains(x, tol_) ? 0.0 : std::numeric_limits<double>::infinity();
  }
  Vector min_oracle(const Vector& w) const override { return set_->lmo(w); }
  Vector subgradient(const Vector& x) const override {
    (void)x;
    return Vector::Zero(set_->dimension());
  }
  int dimension() const override { return set_->dimension(); }
  bool is_indicator() const override { return true; }
  std::string name() const override { return "indicator(" + set_->name() + ")"; }
  const FeasibleSet& set() const { return *set_; }

 private:
  std::shared_ptr<const FeasibleSet> set_;
  double tol_;
};

// psi(x) = <c, x> + indicator(x in set).
class LinearIndicatorRegularizer final : public Regularizer {
 public:
  LinearIndicatorRegularizer(Vector c, std::shared_ptr<const FeasibleSet> set, double tol = 1e-7)
      : c_(std::move(c)), set_(std::move(set)), tol_(tol) {
    if (!set_) throw ConfigError("LinearIndicatorRegularizer: null set");
    if (c_.size() != set_->dimension())
      throw ConfigError("LinearIndicatorRegularizer: c dimension mismatch with set");
  }
  double value(const Vector& x) const override {
    return set_->contains(x, tol_) ? c_.dot(x) : std::numeric_limits<double>::infinity();
  }
  Vector min_oracle(const Vector& w) const override { return set_->lmo(w + c_); }
  Vector subgradient(const Vector& x) const override {
    (void)x;
    return c_;
  }
  int dimension() const override { return set_->dimension(); }
  std::string name() const override { return "linear+indicator(" + set_->name() + ")"; }
  const Vector& linear_part() const { return c_; }
  const FeasibleSet& set() const { return *set_; }

 private:
  Vector c_;
  std::shared_ptr<const FeasibleSet> set_;
  double tol_;
};

// Validating entry point for the generalized oracle.
inline Vector regularized_min_oracle(const Regularizer& reg, const Vector& w) {
  check_direction(w, "regularized_min_oracle");
  if (w.size() != reg.dimension())
    throw OracleError("regularized_min_oracle: direction dimension mismatch");
  Vector v = reg.min_oracle(w);
  if (!v.allFinite())
    throw DegenerateInstanceError("regularized_min_oracle: regularizer is unbounded below");
  return v;
}

}  // namespace fwpd
