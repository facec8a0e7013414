#pragma once

// Least product relative error (LPRE) estimation for the multiplicative
// single-index model Y = exp{g(X'beta)} * eps.
//
// The two-stage procedure alternates
//   1. a local linear fit of log Y on the current index X'beta, and
//   2. a Newton solve of the estimating equation Q(beta) = 0 with the link
//      frozen at its step-1 values.
// The frozen link is the first-order expansion g_i + g'_i (X_i'beta - z_i)
// around each observation's current index z_i. Q and B below are then the
// exact negative gradient and Gauss-Newton matrix of the frozen criterion,
// and at beta = beta~ they coincide with the plug-in estimating equation.
//
// Both the LPRE loss and the least-squares baseline are expressed through a
// loss policy acting on residuals r = log Y - eta, so they share the solver.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "lpre/dataset.hpp"
#include "lpre/errors.hpp"
#include "lpre/kernel_smoother.hpp"
#include "lpre/reparam.hpp"

namespace lpre {

// ---------------------------------------------------------------------------
// Loss policies. value(r) is the per-observation criterion, slope(r) its
// derivative with respect to eta (not r), curvature(r) the second derivative
// and change(r, dr) = value(r + dr) - value(r) computed without cancellation.

/// Y e^{-eta} + Y^{-1} e^{eta} - 2 = 2 cosh(r) - 2.
struct LpreLoss {
  static constexpr std::string_view name = "lpre";
  static double value(double r) noexcept {
    const double s = std::sinh(0.5 * r);
    return 4.0 * s * s;
  }
  static double slope(double r) noexcept { return -2.0 * std::sinh(r); }
  static double curvature(double r) noexcept { return 2.0 * std::cosh(r); }
  static double change(double r, double dr) noexcept {
    return 4.0 * std::sinh(r + 0.5 * dr) * std::sinh(0.5 * dr);
  }
};

/// (log Y - eta)^2.
struct LsLoss {
  static constexpr std::string_view name = "ls";
  static double value(double r) noexcept { return r * r; }
  static double slope(double r) noexcept { return -2.0 * r; }
  static double curvature(double) noexcept { return 2.0; }
  static double change(double r, double dr) noexcept { return dr * (2.0 * r + dr); }
};

enum class Estimator { Lpre, Ls, Linear };

inline std::string_view estimator_name(Estimator e) noexcept {
  switch (e) {
    case Estimator::Lpre: return "lpre";
    case Estimator::Ls: return "ls";
    case Estimator::Linear: return "linear";
  }
  return "?";
}

inline Estimator estimator_from_name(std::string_view s) {
  if (s == "lpre") return Estimator::Lpre;
  if (s == "ls") return Estimator::Ls;
  if (s == "linear") return Estimator::Linear;
  throw Error("unknown estimator '" + std::string(s) +
              "' (expected lpre, ls or linear)");
}

struct FitConfig {
  Kernel kernel{KernelFamily::Gaussian};
  std::vector<double> gcv_grid;      ///< explicit candidates; empty selects the default grid
  std::size_t gcv_grid_size = 20;
  int max_outer = 500;
  int max_inner = 50;
  double tol_beta = 1e-8;
  double tol_grad = 1e-8;
  double ridge = 1e-8;
  double backtrack_factor = 0.5;
  int max_halvings = 30;
  double repivot_below = 0.1;
  int anderson_memory = 0;  ///< 0 runs the plain alternation
  double anderson_max_jump = 10.0;  ///< accelerated step length cap, in plain steps

  void validate() const {
    if (!(tol_beta > 0) || !(tol_grad > 0) || !(ridge >= 0))
      throw Error("fit tolerances must be positive");
    if (max_outer < 1 || max_inner < 1 || max_halvings < 1)
      throw Error("iteration caps must be at least 1");
    if (!(backtrack_factor > 0 && backtrack_factor < 1))
      throw Error("backtrack factor must lie in (0, 1)");
  }
};

struct FitResult {
  Estimator estimator = Estimator::Lpre;
  UnitIndexCoef beta_hat;
  LinkFit link;            ///< final link at the training index X'beta_hat
  Vector train_logy;       ///< responses the link was smoothed from
  double criterion_value = 0.0;
  int outer_iters = 0;
  std::vector<double> inner_trace;  ///< gradient norms of every inner iterate
  bool converged = false;
  Bandwidths bandwidths;
  double grad_norm = 0.0;  ///< |Q| at the end of the last step-2 solve
  Vector linear_coef;      ///< unnormalized coefficients (Linear only)
  double linear_intercept = 0.0;
  std::string diagnostic;
};

// ---------------------------------------------------------------------------
// Criterion, estimating function and information matrix.

/// (1/n) sum { Y_i e^{-g_i} + Y_i^{-1} e^{g_i} - 2 }.
inline double lpre_criterion(VectorCRef Y, VectorCRef g_at_index) {
  if (Y.size() != g_at_index.size()) throw Error("criterion inputs differ in length");
  if (Y.size() == 0) return 0.0;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < Y.size(); ++i)
    sum += LpreLoss::value(std::log(Y[i]) - g_at_index[i]);
  return sum / static_cast<double>(Y.size());
}

namespace detail {

inline void check_link(const Dataset& data, const LinkFit& link) {
  if (link.size() != data.n())
    throw Error("link must be evaluated at every observation's index");
}

/// Residuals log Y_i - [g_i + g'_i (X_i'beta - z_i)].
inline Vector frozen_residuals(const Dataset& data, const Vector& beta,
                               const LinkFit& link) {
  const Vector index = data.X() * beta;
  return data.log_y() - link.g_hat -
         link.g_deriv_hat.cwiseProduct(index - link.eval_points);
}

}  // namespace detail

/// Mean loss at coef with the link frozen.
template <class Loss>
double frozen_objective(const Dataset& data, const UnitIndexCoef& coef,
                        const LinkFit& link) {
  detail::check_link(data, link);
  const Vector r = detail::frozen_residuals(data, coef.beta, link);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) sum += Loss::value(r[i]);
  return sum / static_cast<double>(data.n());
}

/// Q = -(1/n) sum slope(r_i) g'_i J^T X_i, the negative frozen-link gradient
/// with respect to the reduced coefficient.
template <class Loss>
Vector score(const Dataset& data, const UnitIndexCoef& coef, const LinkFit& link) {
  detail::check_link(data, link);
  if (data.p() == 1) return Vector(0);
  const Matrix J = jacobian(reduce(coef));
  const Vector r = detail::frozen_residuals(data, coef.beta, link);
  Vector weights(data.n());
  for (Eigen::Index i = 0; i < data.n(); ++i)
    weights[i] = -Loss::slope(r[i]) * link.g_deriv_hat[i];
  return J.transpose() * (data.X().transpose() * weights) /
         static_cast<double>(data.n());
}

/// B = (1/n) sum curvature(r_i) g'_i^2 J^T X_i X_i^T J.
template <class Loss>
Matrix information(const Dataset& data, const UnitIndexCoef& coef,
                   const LinkFit& link) {
  detail::check_link(data, link);
  if (data.p() == 1) return Matrix(0, 0);
  const Matrix J = jacobian(reduce(coef));
  const Vector r = detail::frozen_residuals(data, coef.beta, link);
  const Matrix XJ = data.X() * J;
  Vector w(data.n());
  for (Eigen::Index i = 0; i < data.n(); ++i)
    w[i] = Loss::curvature(r[i]) * link.g_deriv_hat[i] * link.g_deriv_hat[i];
  Matrix B = XJ.transpose() * w.asDiagonal() * XJ;
  B /= static_cast<double>(data.n());
  // Exact symmetry, independent of summation order.
  return 0.5 * (B + B.transpose());
}

/// LPRE estimating function Q_n.
inline Vector estimating_fn(const Dataset& data, const UnitIndexCoef& coef,
                            const LinkFit& link) {
  return score<LpreLoss>(data, coef, link);
}

/// Positive-form LPRE information matrix B_n.
inline Matrix info_matrix(const Dataset& data, const UnitIndexCoef& coef,
                          const LinkFit& link) {
  return information<LpreLoss>(data, coef, link);
}

// ---------------------------------------------------------------------------
// Inner Newton solve.

struct NewtonResult {
  UnitIndexCoef coef;
  std::vector<double> grad_norms;  ///< |Q| at each iterate, starting point first
  std::vector<double> criterion;   ///< frozen objective at each iterate
  int steps = 0;
  bool converged = false;
};

namespace detail {

inline Vector solve_spd(const Matrix& B, const Vector& rhs, double ridge) {
  Matrix A = B;
  A.diagonal().array() += ridge;
  Eigen::LDLT<Matrix> ldlt(A);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw SingularInformation("information matrix is numerically singular");
  Vector x = ldlt.solve(rhs);
  if (!x.allFinite())
    throw SingularInformation("information matrix solve produced non-finite values");
  return x;
}

/// lift(red + move) - lift(red) without cancellation in the pivot entry.
inline Vector lift_difference(const ReducedCoef& red, const Vector& move) {
  const Eigen::Index r = red.pivot;
  const double old_top = std::sqrt(1.0 - red.beta_r.squaredNorm());
  const double new_top = std::sqrt(1.0 - (red.beta_r + move).squaredNorm());
  // |b + m|^2 - |b|^2 = m'(2b + m)
  const double grow = move.dot(2.0 * red.beta_r + move);
  Vector d(red.p);
  d.head(r) = move.head(r);
  d[r] = -grow / (old_top + new_top);
  d.tail(red.p - 1 - r) = move.tail(red.p - 1 - r);
  return d;
}

}  // namespace detail

/// Newton-Raphson on the frozen-link criterion in the reduced chart, with
/// step halving until the criterion does not increase.
template <class Loss>
NewtonResult newton_solve(const Dataset& data, const UnitIndexCoef& init,
                          const LinkFit& link, const FitConfig& cfg) {
  detail::check_link(data, link);
  NewtonResult out;
  out.coef = init;
  if (data.p() == 1) {
    out.grad_norms.push_back(0.0);
    out.criterion.push_back(frozen_objective<Loss>(data, init, link));
    out.converged = true;
    return out;
  }

  ReducedCoef red = reduce(init);
  UnitIndexCoef coef = init;
  Vector r = detail::frozen_residuals(data, coef.beta, link);
  const double inv_n = 1.0 / static_cast<double>(data.n());
  auto objective = [&](const Vector& res) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < res.size(); ++i) s += Loss::value(res[i]);
    return s * inv_n;
  };

  for (int it = 0;; ++it) {
    const Vector Q = score<Loss>(data, coef, link);
    const double gnorm = Q.norm();
    out.grad_norms.push_back(gnorm);
    out.criterion.push_back(objective(r));
    if (gnorm <= cfg.tol_grad) {
      out.converged = true;
      break;
    }
    if (it >= cfg.max_inner) break;

    const Matrix B = information<Loss>(data, coef, link);
    const Vector step = detail::solve_spd(B, Q, cfg.ridge);

    double t = 1.0;
    bool accepted = false;
    bool stalled = false;
    for (int k = 0; k <= cfg.max_halvings; ++k, t *= cfg.backtrack_factor) {
      const Vector move = t * step;
      ReducedCoef trial = red;
      trial.beta_r += move;
      if (trial.beta_r == red.beta_r) {
        stalled = true;
        break;
      }
      if (!(trial.beta_r.norm() < 1.0 - 1e-12)) continue;
      const Vector dbeta = detail::lift_difference(red, move);
      // dr_i = -g'_i X_i' dbeta, formed from the step itself so the decrease
      // is resolved even when it is far below the criterion's ulp.
      const Vector dr = -link.g_deriv_hat.cwiseProduct(data.X() * dbeta);
      double delta = 0.0;
      for (Eigen::Index i = 0; i < dr.size(); ++i) delta += Loss::change(r[i], dr[i]);
      if (std::isfinite(delta) && delta <= 0.0) {
        red = trial;
        coef = lift(red);
        r = detail::frozen_residuals(data, coef.beta, link);
        accepted = true;
        break;
      }
    }
    if (stalled) break;
    if (!accepted) {
      throw NoDescent(gnorm, "line search found no non-increasing step (|Q|=" +
                                 std::to_string(gnorm) + ")");
    }
    ++out.steps;
  }
  out.coef = coef;
  return out;
}

// ---------------------------------------------------------------------------
// Linear baseline and initializer.

namespace detail {

/// Newton with backtracking for the convex criterion (1/n) sum value(logy - D b).
inline Vector linear_lpre_solve(const Matrix& design, const Vector& logy,
                                std::optional<Vector> start, double ridge = 1e-8,
                                int max_iter = 200) {
  const Eigen::Index n = design.rows();
  const Eigen::Index q = design.cols();
  Vector b = start ? *start : Vector::Zero(q);
  if (b.size() != q) throw Error("start vector has wrong dimension");
  Vector r = logy - design * b;
  auto objective = [&](const Vector& res) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) s += LpreLoss::value(res[i]);
    return s;
  };
  if (!std::isfinite(objective(r)))
    throw SingularInformation("linear LPRE start point has an infinite criterion");

  for (int it = 0; it < max_iter; ++it) {
    Vector grad = Vector::Zero(q);
    Vector w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      grad += LpreLoss::slope(r[i]) * design.row(i).transpose();
      w[i] = LpreLoss::curvature(r[i]);
    }
    Matrix H = design.transpose() * w.asDiagonal() * design;
    Vector step;
    try {
      step = solve_spd(H, -grad, 0.0);
    } catch (const SingularInformation&) {
      step = solve_spd(H, -grad, ridge * std::max(1.0, H.diagonal().maxCoeff()));
    }
    const double decrement = -grad.dot(step);
    if (!(decrement > 1e-28 * (1.0 + objective(r)))) break;

    double t = 1.0;
    bool accepted = false;
    for (int k = 0; k <= 60; ++k, t *= 0.5) {
      const Vector dr = -t * (design * step);
      double delta = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) delta += LpreLoss::change(r[i], dr[i]);
      if (std::isfinite(delta) && delta <= 0.0) {
        b += t * step;
        r = logy - design * b;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    if ((t * step).norm() <= 1e-15 * (1.0 + b.norm())) break;
  }
  if (!b.allFinite()) throw SingularInformation("linear LPRE solve diverged");
  return b;
}

/// Zero-based index of the first column of centered X that depends linearly
/// on the preceding ones, or -1 if X has full column rank.
inline Eigen::Index first_dependent_column(const Matrix& X) {
  const Matrix centered = X.rowwise() - X.colwise().mean();
  auto rank_of = [&](Eigen::Index cols) {
    Eigen::ColPivHouseholderQR<Matrix> qr(centered.leftCols(cols));
    qr.setThreshold(1e-10);
    return qr.rank();
  };
  if (rank_of(X.cols()) == X.cols()) return -1;
  for (Eigen::Index j = 1; j <= X.cols(); ++j)
    if (rank_of(j) < j) return j - 1;
  return X.cols() - 1;
}

}  // namespace detail

struct LinearLpreFit {
  Vector coef;             ///< covariate coefficients, unnormalized
  double intercept = 0.0;  ///< zero when fitted without an intercept
};

/// Minimizer of the convex linear criterion
///   D1*(b) = sum {Y e^{-a - X'b} + Y^{-1} e^{a + X'b} - 2},
/// with the intercept a held at zero when with_intercept is false. `start`
/// covers (a, b) when the intercept is fitted and b alone otherwise.
inline LinearLpreFit linear_lpre_fit(const Dataset& data, bool with_intercept = true,
                                     std::optional<Vector> start = std::nullopt) {
  LinearLpreFit out;
  if (!with_intercept) {
    out.coef = detail::linear_lpre_solve(data.X(), data.log_y(), std::move(start));
    return out;
  }
  Matrix design(data.n(), data.p() + 1);
  design.col(0).setOnes();
  design.rightCols(data.p()) = data.X();
  const Vector b = detail::linear_lpre_solve(design, data.log_y(), std::move(start));
  out.intercept = b[0];
  out.coef = b.tail(data.p());
  return out;
}

/// Starting value for the two-stage fit: the linear LPRE slopes (with
/// intercept, so the start is invariant to rescaling Y), normalized with the
/// largest component as pivot. Falls back to least squares of log Y on
/// centered X.
inline UnitIndexCoef initial_beta(const Dataset& data) {
  const Eigen::Index bad = detail::first_dependent_column(data.X());
  if (bad >= 0) {
    throw DegenerateCovariates(
        static_cast<std::size_t>(bad),
        "covariate column " + std::to_string(bad + 1) +
            " is constant or linearly dependent on earlier columns");
  }
  try {
    const Vector slope = linear_lpre_fit(data, true).coef;
    if (slope.allFinite() && slope.norm() > 0) return make_unit_coef(slope);
  } catch (const Error&) {
  }
  const Matrix centered = data.X().rowwise() - data.X().colwise().mean();
  const Vector ls = centered.colPivHouseholderQr().solve(
      (data.log_y().array() - data.log_y().mean()).matrix());
  return make_unit_coef(ls);
}

// ---------------------------------------------------------------------------
// Two-stage fit.

namespace detail {

/// GCV candidates whose derived link bandwidth h_opt * n^(-2/15) still gives a
/// usable local design at every observation.
inline std::vector<double> gcv_grid_for(const Vector& index, const FitConfig& cfg) {
  std::vector<double> grid = cfg.gcv_grid.empty()
                                 ? default_gcv_grid(index, cfg.gcv_grid_size)
                                 : cfg.gcv_grid;
  const auto n = static_cast<std::size_t>(index.size());
  std::erase_if(grid, [&](double h) {
    return !(h > 0) || !smoother_usable(index, bandwidth_rule(h, n).h, cfg.kernel);
  });
  if (grid.empty())
    throw NoValidBandwidth("no GCV candidate yields a usable link bandwidth");
  return grid;
}

template <class Loss>
double final_criterion(const Dataset& data, const LinkFit& link) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i)
    s += Loss::value(data.log_y()[i] - link.g_hat[i]);
  return s / static_cast<double>(data.n());
}

}  // namespace detail

namespace detail {

/// Anderson acceleration (type II) of a fixed-point map x -> T(x) in the
/// reduced chart.
class AndersonMixer {
 public:
  explicit AndersonMixer(int memory) : memory_(memory) {}

  void reset() {
    dx_.clear();
    df_.clear();
    have_last_ = false;
  }

  /// Given x and T(x), returns the next iterate.
  Vector next(const Vector& x, const Vector& tx) {
    const Vector f = tx - x;
    if (memory_ <= 0) return tx;
    if (have_last_) {
      dx_.push_back(tx - last_tx_);
      df_.push_back(f - last_f_);
      if (static_cast<int>(dx_.size()) > memory_) {
        dx_.erase(dx_.begin());
        df_.erase(df_.begin());
      }
    }
    last_tx_ = tx;
    last_f_ = f;
    have_last_ = true;
    if (dx_.empty()) return tx;
    const auto m = static_cast<Eigen::Index>(df_.size());
    Matrix F(f.size(), m), G(f.size(), m);
    for (Eigen::Index j = 0; j < m; ++j) {
      F.col(j) = df_[static_cast<std::size_t>(j)];
      G.col(j) = dx_[static_cast<std::size_t>(j)];
    }
    const Vector gamma = F.completeOrthogonalDecomposition().solve(f);
    Vector out = tx - G * gamma;
    if (!out.allFinite()) {
      reset();
      return tx;
    }
    return out;
  }

 private:
  int memory_;
  std::vector<Vector> dx_;
  std::vector<Vector> df_;
  Vector last_tx_;
  Vector last_f_;
  bool have_last_ = false;
};

}  // namespace detail

/// Alternates link smoothing (step 1) and the frozen-link Newton solve
/// (step 2). Converged when step 2 moves beta by at most tol_beta and its
/// estimating equation was solved to tol_grad. The bandwidth is selected by
/// GCV at the starting index and then frozen. The outer fixed-point map is
/// Anderson-accelerated in the reduced chart; the returned beta is always a
/// step-2 output and the link is refitted at it.
template <class Loss>
FitResult two_stage_fit(const Dataset& data, std::optional<UnitIndexCoef> init,
                        const FitConfig& cfg) {
  cfg.validate();
  FitResult res;
  res.estimator = Loss::name == LpreLoss::name ? Estimator::Lpre : Estimator::Ls;
  res.train_logy = data.log_y();

  UnitIndexCoef coef = init ? *init : initial_beta(data);
  if (coef.dim() != data.p() || !coef.valid(1e-8))
    throw Error("initial coefficient is not a valid unit index coefficient");

  Vector index = data.X() * coef.beta;
  const double h_opt =
      gcv_bandwidth(index, data.log_y(), cfg.kernel, detail::gcv_grid_for(index, cfg));
  res.bandwidths = bandwidth_rule(h_opt, static_cast<std::size_t>(data.n()));

  auto refit = [&](const UnitIndexCoef& c) {
    const Vector idx = data.X() * c.beta;
    return fit_link(idx, data.log_y(), idx, res.bandwidths, cfg.kernel);
  };

  LinkFit link = refit(coef);
  detail::AndersonMixer mixer(cfg.anderson_memory);
  // Safeguard state: an accelerated iterate is kept only if the fixed-point
  // residual it produces is smaller than the one before it.
  bool accelerated = false;
  double last_delta = std::numeric_limits<double>::infinity();
  UnitIndexCoef last_mapped = coef;
  for (int outer = 1; outer <= cfg.max_outer; ++outer) {
    res.outer_iters = outer;
    NewtonResult step;
    try {
      step = newton_solve<Loss>(data, coef, link, cfg);
    } catch (const Error& e) {
      res.diagnostic = e.what();
      break;
    }
    res.inner_trace.insert(res.inner_trace.end(), step.grad_norms.begin(),
                           step.grad_norms.end());
    res.grad_norm = step.grad_norms.back();

    UnitIndexCoef mapped = step.coef;
    bool repivoted = false;
    if (std::abs(mapped.beta[mapped.pivot]) < cfg.repivot_below) {
      mapped = make_unit_coef(mapped.beta);
      repivoted = true;
    }
    const double delta = (mapped.beta - coef.beta).norm();
    if (delta <= cfg.tol_beta && step.converged) {
      try {
        link = refit(mapped);
      } catch (const DegenerateDesign& e) {
        res.diagnostic = e.what();
        break;
      }
      coef = mapped;
      res.converged = true;
      break;
    }

    UnitIndexCoef next = mapped;
    if (accelerated && delta >= last_delta) {
      // Rejected: fall back to the plain step from the previous iterate.
      mixer.reset();
      next = last_mapped;
      accelerated = false;
    } else if (repivoted || mapped.pivot != coef.pivot) {
      mixer.reset();
      accelerated = false;
    } else {
      ReducedCoef red = reduce(mapped);
      red.beta_r = mixer.next(reduce(coef).beta_r, red.beta_r);
      const double jump = (red.beta_r - reduce(mapped).beta_r).norm();
      if (red.beta_r.norm() < 1.0 - 1e-6 && jump <= cfg.anderson_max_jump * delta) {
        next = lift(red);
        accelerated = jump > 0;
      } else {
        mixer.reset();
        accelerated = false;
      }
      last_delta = delta;
      last_mapped = mapped;
    }
    try {
      link = refit(next);
      coef = next;
    } catch (const DegenerateDesign&) {
      try {
        link = refit(mapped);
        coef = mapped;
        mixer.reset();
        accelerated = false;
      } catch (const DegenerateDesign& e) {
        res.diagnostic = e.what();
        break;
      }
    }
  }
  if (!res.converged && res.diagnostic.empty())
    res.diagnostic = "outer iteration cap reached";

  res.beta_hat = coef;
  res.criterion_value = detail::final_criterion<Loss>(data, link);
  res.link = std::move(link);
  return res;
}

inline FitResult lpre_fit(const Dataset& data, const FitConfig& cfg,
                          std::optional<UnitIndexCoef> init = std::nullopt) {
  return two_stage_fit<LpreLoss>(data, std::move(init), cfg);
}

/// Least-squares baseline with the same two-stage architecture.
inline FitResult ls_fit(const Dataset& data, const FitConfig& cfg,
                        std::optional<UnitIndexCoef> init = std::nullopt) {
  return two_stage_fit<LsLoss>(data, std::move(init), cfg);
}

/// Linear baseline: the no-intercept minimizer of D1*, wrapped as a FitResult
/// without a link.
inline FitResult linear_fit(const Dataset& data) {
  FitResult res;
  res.estimator = Estimator::Linear;
  const LinearLpreFit lin = linear_lpre_fit(data, false);
  res.linear_coef = lin.coef;
  res.linear_intercept = lin.intercept;
  res.beta_hat = make_unit_coef(res.linear_coef);
  res.train_logy = data.log_y();
  const Vector eta = (data.X() * lin.coef).array() + lin.intercept;
  res.criterion_value = lpre_criterion(data.Y(), eta);
  res.converged = true;
  res.outer_iters = 1;
  return res;
}

inline FitResult fit(const Dataset& data, Estimator estimator, const FitConfig& cfg) {
  switch (estimator) {
    case Estimator::Lpre: return lpre_fit(data, cfg);
    case Estimator::Ls: return ls_fit(data, cfg);
    case Estimator::Linear: return linear_fit(data);
  }
  throw Error("unknown estimator");
}

// ---------------------------------------------------------------------------
// Prediction.

struct Prediction {
  double y_hat = 0.0;
  bool extrapolated = false;
};

/// y_hat = exp{g*(x' beta_hat)}.
inline Prediction predict(const FitResult& fit, VectorCRef x_new) {
  if (x_new.size() != fit.beta_hat.dim())
    throw Error("prediction point has the wrong dimension");
  Prediction out;
  if (fit.estimator == Estimator::Linear) {
    out.y_hat = std::exp(fit.linear_intercept + x_new.dot(fit.linear_coef));
    return out;
  }
  const double z = x_new.dot(fit.beta_hat.beta);
  const auto v = evaluate_link(z, fit.link.eval_points, fit.train_logy,
                               fit.bandwidths.h, fit.link.kernel);
  out.y_hat = std::exp(v.value);
  out.extrapolated = v.extrapolated;
  return out;
}

}  // namespace lpre
