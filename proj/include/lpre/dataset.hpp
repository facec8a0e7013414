#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lpre/errors.hpp"

namespace lpre {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Covariates X (n x p) and strictly positive responses Y (n), with log Y cached.
class Dataset {
 public:
  Dataset() = default;

  Dataset(Matrix X, Vector Y) : X_(std::move(X)), Y_(std::move(Y)) {
    if (X_.rows() != Y_.size())
      throw InvalidData("X has " + std::to_string(X_.rows()) +
                        " rows but Y has " + std::to_string(Y_.size()));
    if (X_.cols() < 1) throw InvalidData("need at least one covariate");
    if (X_.rows() <= X_.cols())
      throw InvalidData("need n > p (n=" + std::to_string(X_.rows()) +
                        ", p=" + std::to_string(X_.cols()) + ")");
    if (!X_.allFinite()) throw InvalidData("covariates contain non-finite values");
    for (Eigen::Index i = 0; i < Y_.size(); ++i) {
      if (!std::isfinite(Y_[i]) || !(Y_[i] > 0.0))
        throw NonPositiveResponse(
            static_cast<std::size_t>(i + 1),
            "response in row " + std::to_string(i + 1) +
                " is not a finite positive number");
    }
    log_y_ = Y_.array().log().matrix();
  }

  const Matrix& X() const noexcept { return X_; }
  const Vector& Y() const noexcept { return Y_; }
  const Vector& log_y() const noexcept { return log_y_; }
  Eigen::Index n() const noexcept { return X_.rows(); }
  Eigen::Index p() const noexcept { return X_.cols(); }

  /// Rows selected by (zero-based) index, duplicates allowed.
  Dataset subset(const std::vector<Eigen::Index>& rows) const {
    Matrix X(static_cast<Eigen::Index>(rows.size()), p());
    Vector Y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
      X.row(static_cast<Eigen::Index>(k)) = X_.row(rows[k]);
      Y[static_cast<Eigen::Index>(k)] = Y_[rows[k]];
    }
    return Dataset(std::move(X), std::move(Y));
  }

  /// Same covariates with responses multiplied by k > 0.
  Dataset rescaled(double k) const { return Dataset(X_, Y_ * k); }

 private:
  Matrix X_;
  Vector Y_;
  Vector log_y_;
};

}  // namespace lpre
