#pragma once

// Delete-one-component chart between the half sphere {|beta| = 1, beta_r > 0}
// and the open unit ball of dimension p - 1.

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "lpre/errors.hpp"

namespace lpre {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Unit-norm index coefficient with a positive pivot component.
/// The pivot is zero-based.
struct UnitIndexCoef {
  Vector beta;
  Eigen::Index pivot = 0;

  Eigen::Index dim() const noexcept { return beta.size(); }

  bool valid(double tol = 1e-10) const noexcept {
    return beta.size() >= 1 && pivot >= 0 && pivot < beta.size() &&
           beta.allFinite() && std::abs(beta.norm() - 1.0) <= tol &&
           beta[pivot] > 0.0;
  }
};

struct ReducedCoef {
  Vector beta_r;
  Eigen::Index pivot = 0;
  Eigen::Index p = 1;
};

/// Builds a valid coefficient from any nonzero vector: normalizes, selects
/// the pivot as the largest-magnitude component and flips the sign so that
/// the pivot is positive.
inline UnitIndexCoef make_unit_coef(const Vector& v) {
  const double norm = v.norm();
  if (!(norm > 0) || !std::isfinite(norm))
    throw Error("cannot normalize a zero or non-finite coefficient vector");
  UnitIndexCoef c;
  c.beta = v / norm;
  c.beta.cwiseAbs().maxCoeff(&c.pivot);
  if (c.beta[c.pivot] < 0) c.beta = -c.beta;
  return c;
}

/// Same as make_unit_coef with a caller-fixed pivot.
inline UnitIndexCoef make_unit_coef(const Vector& v, Eigen::Index pivot) {
  const double norm = v.norm();
  if (!(norm > 0) || !std::isfinite(norm))
    throw Error("cannot normalize a zero or non-finite coefficient vector");
  if (pivot < 0 || pivot >= v.size()) throw Error("pivot out of range");
  if (v[pivot] == 0.0) throw Error("pivot component is zero");
  UnitIndexCoef c;
  c.beta = v / norm;
  c.pivot = pivot;
  if (c.beta[pivot] < 0) c.beta = -c.beta;
  return c;
}

inline ReducedCoef reduce(const UnitIndexCoef& coef) {
  const Eigen::Index p = coef.beta.size();
  const Eigen::Index r = coef.pivot;
  ReducedCoef red;
  red.pivot = r;
  red.p = p;
  red.beta_r.resize(p - 1);
  red.beta_r.head(r) = coef.beta.head(r);
  red.beta_r.tail(p - 1 - r) = coef.beta.tail(p - 1 - r);
  return red;
}

namespace detail {
inline double chart_height(const ReducedCoef& red) {
  const double norm = red.beta_r.norm();
  if (!(norm < 1.0 - 1e-12)) {
    throw OutsideBall("reduced coefficient norm " + std::to_string(norm) +
                      " is not inside the unit ball");
  }
  return std::sqrt(1.0 - red.beta_r.squaredNorm());
}
}  // namespace detail

/// Inserts the positive pivot entry sqrt(1 - |beta_r|^2) at position r.
inline UnitIndexCoef lift(const ReducedCoef& red) {
  const double top = detail::chart_height(red);
  const Eigen::Index p = red.p;
  const Eigen::Index r = red.pivot;
  UnitIndexCoef c;
  c.pivot = r;
  c.beta.resize(p);
  c.beta.head(r) = red.beta_r.head(r);
  c.beta[r] = top;
  c.beta.tail(p - 1 - r) = red.beta_r.tail(p - 1 - r);
  return c;
}

/// d beta / d beta_r, a p x (p-1) matrix: identity rows around the pivot and
/// -beta_r^T / sqrt(1 - |beta_r|^2) in the pivot row.
inline Matrix jacobian(const ReducedCoef& red) {
  const double top = detail::chart_height(red);
  const Eigen::Index p = red.p;
  const Eigen::Index r = red.pivot;
  Matrix J = Matrix::Zero(p, p - 1);
  for (Eigen::Index s = 0; s < r; ++s) J(s, s) = 1.0;
  J.row(r) = -red.beta_r.transpose() / top;
  for (Eigen::Index s = r + 1; s < p; ++s) J(s, s - 1) = 1.0;
  return J;
}

}  // namespace lpre
