#pragma once

// Local linear estimation of a link function and its first derivative from
// (index value, log response) pairs, plus GCV bandwidth selection and the
// undersmoothing rule that derives the link and derivative bandwidths.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "lpre/errors.hpp"

namespace lpre {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using VectorCRef = Eigen::Ref<const Vector>;

enum class KernelFamily { Epanechnikov, Gaussian };

/// Symmetric probability density used as the smoothing kernel.
struct Kernel {
  KernelFamily family = KernelFamily::Epanechnikov;

  double operator()(double u) const noexcept {
    switch (family) {
      case KernelFamily::Epanechnikov:
        return std::abs(u) <= 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
      case KernelFamily::Gaussian:
        return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
    }
    return 0.0;
  }

  /// K_h(u) = K(u/h)/h.
  double scaled(double u, double h) const noexcept { return (*this)(u / h) / h; }

  /// Integral of u^2 K(u).
  double second_moment() const noexcept {
    return family == KernelFamily::Epanechnikov ? 0.2 : 1.0;
  }

  /// Half-width of the support; infinity for the Gaussian.
  double support() const noexcept {
    return family == KernelFamily::Epanechnikov
               ? 1.0
               : std::numeric_limits<double>::infinity();
  }

  std::string_view name() const noexcept {
    return family == KernelFamily::Epanechnikov ? "epanechnikov" : "gaussian";
  }

  friend bool operator==(const Kernel&, const Kernel&) = default;
};

inline Kernel kernel_from_name(std::string_view name) {
  if (name == "epanechnikov") return Kernel{KernelFamily::Epanechnikov};
  if (name == "gaussian") return Kernel{KernelFamily::Gaussian};
  throw Error("unknown kernel '" + std::string(name) +
              "' (expected epanechnikov or gaussian)");
}

struct Bandwidths {
  double h_opt = 0.0;  ///< GCV-optimal bandwidth
  double h = 0.0;      ///< link bandwidth
  double h1 = 0.0;     ///< derivative bandwidth

  bool valid() const noexcept {
    return std::isfinite(h_opt) && std::isfinite(h) && std::isfinite(h1) &&
           h_opt > 0 && h > 0 && h1 > 0;
  }
};

/// Link values and derivatives at a set of evaluation points.
struct LinkFit {
  Vector eval_points;
  Vector g_hat;
  Vector g_deriv_hat;
  Bandwidths bandwidths;
  Kernel kernel;

  Eigen::Index size() const noexcept { return eval_points.size(); }
};

/// Normalized kernel moments S_r = (1/n) sum_i u_i^r K_h(u_i), u_i = index_i - z.
struct MomentSums {
  double s0 = 0.0;
  double s1 = 0.0;
  double s2 = 0.0;

  double denominator() const noexcept { return s0 * s2 - s1 * s1; }

  /// True when the local 2x2 design is numerically singular, judged relative
  /// to S0*S2 (den / (S0 S2) is one minus a squared weighted correlation).
  bool degenerate() const noexcept {
    const double den = denominator();
    const double scale = s0 * s2;
    return !std::isfinite(den) || !(scale > 0.0) || den <= 1e-12 * scale;
  }
};

inline MomentSums moment_sums(double z, VectorCRef index_values, double h,
                              const Kernel& kernel) {
  MomentSums m;
  const auto n = index_values.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = index_values[i] - z;
    const double k = kernel.scaled(u, h);
    m.s0 += k;
    m.s1 += u * k;
    m.s2 += u * u * k;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  m.s0 *= inv_n;
  m.s1 *= inv_n;
  m.s2 *= inv_n;
  return m;
}

namespace detail {

struct LocalLine {
  MomentSums moments;
  double intercept = 0.0;
  double slope = 0.0;
};

// One pass over the data: the moment sums plus the kernel-weighted response
// sums T0 = (1/n) sum K y and T1 = (1/n) sum u K y. The intercept and slope
// are then (S2 T0 - S1 T1)/den and (S0 T1 - S1 T0)/den, which is the closed
// form of sum W_i y_i and sum W~_i y_i.
inline LocalLine local_line(double z, VectorCRef index_values, VectorCRef logy,
                            double h, const Kernel& kernel) {
  LocalLine out;
  double t0 = 0.0;
  double t1 = 0.0;
  MomentSums& m = out.moments;
  const auto n = index_values.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = index_values[i] - z;
    const double k = kernel.scaled(u, h);
    if (k == 0.0) continue;
    m.s0 += k;
    m.s1 += u * k;
    m.s2 += u * u * k;
    t0 += k * logy[i];
    t1 += u * k * logy[i];
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  m.s0 *= inv_n;
  m.s1 *= inv_n;
  m.s2 *= inv_n;
  t0 *= inv_n;
  t1 *= inv_n;
  if (m.degenerate()) {
    std::ostringstream msg;
    msg << "degenerate local design at z=" << z << " (h=" << h << ")";
    throw DegenerateDesign(z, msg.str());
  }
  const double den = m.denominator();
  out.intercept = (m.s2 * t0 - m.s1 * t1) / den;
  out.slope = (m.s0 * t1 - m.s1 * t0) / den;
  return out;
}

inline void check_lengths(VectorCRef index_values, VectorCRef logy) {
  if (index_values.size() != logy.size())
    throw Error("index values and log responses differ in length");
  if (index_values.size() == 0) throw Error("smoother needs at least one point");
}

}  // namespace detail

struct LocalLinearResult {
  double g_hat = 0.0;
  Vector weights;  ///< W_ni(z); sums to one
};

/// Intercept of the kernel-weighted least-squares line through (u_i, logy_i).
inline LocalLinearResult local_linear_at(double z, VectorCRef index_values,
                                         VectorCRef logy, double h,
                                         const Kernel& kernel) {
  detail::check_lengths(index_values, logy);
  const auto line = detail::local_line(z, index_values, logy, h, kernel);
  const auto& m = line.moments;
  const auto n = index_values.size();
  const double scale = 1.0 / (static_cast<double>(n) * m.denominator());
  LocalLinearResult out;
  out.g_hat = line.intercept;
  out.weights.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = index_values[i] - z;
    out.weights[i] = kernel.scaled(u, h) * (m.s2 - u * m.s1) * scale;
  }
  return out;
}

/// Slope weights W~_ni(z) at bandwidth h1; they sum to zero.
inline Vector local_linear_deriv_weights(double z, VectorCRef index_values,
                                         double h1, const Kernel& kernel) {
  const auto m = moment_sums(z, index_values, h1, kernel);
  if (m.degenerate()) {
    std::ostringstream msg;
    msg << "degenerate local design at z=" << z << " (h1=" << h1 << ")";
    throw DegenerateDesign(z, msg.str());
  }
  const auto n = index_values.size();
  const double scale = 1.0 / (static_cast<double>(n) * m.denominator());
  Vector w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = index_values[i] - z;
    w[i] = kernel.scaled(u, h1) * (u * m.s0 - m.s1) * scale;
  }
  return w;
}

/// Slope of the kernel-weighted least-squares line at bandwidth h1.
inline double local_linear_deriv_at(double z, VectorCRef index_values,
                                    VectorCRef logy, double h1,
                                    const Kernel& kernel) {
  detail::check_lengths(index_values, logy);
  return detail::local_line(z, index_values, logy, h1, kernel).slope;
}

/// h = h_opt * n^(-2/15) for the link, h1 = h_opt for the derivative.
inline Bandwidths bandwidth_rule(double h_opt, std::size_t n) {
  if (!(h_opt > 0) || !std::isfinite(h_opt) || n < 1)
    throw Error("bandwidth_rule needs h_opt > 0 and n >= 1");
  Bandwidths bw;
  bw.h_opt = h_opt;
  bw.h = h_opt * std::pow(static_cast<double>(n), -2.0 / 15.0);
  bw.h1 = h_opt;
  return bw;
}

/// True when the local design is non-degenerate at every index value.
inline bool smoother_usable(VectorCRef index_values, double h, const Kernel& kernel) {
  for (Eigen::Index i = 0; i < index_values.size(); ++i)
    if (moment_sums(index_values[i], index_values, h, kernel).degenerate()) return false;
  return true;
}

/// Generalized cross-validation score of the link smoother at bandwidth h,
/// or NaN when some evaluation is degenerate or tr(S_h) >= n.
inline double gcv_score(VectorCRef index_values, VectorCRef logy, double h,
                        const Kernel& kernel) {
  const auto n = index_values.size();
  const double nd = static_cast<double>(n);
  const double k0 = kernel.scaled(0.0, h);
  double rss = 0.0;
  double trace = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    detail::LocalLine line;
    try {
      line = detail::local_line(index_values[i], index_values, logy, h, kernel);
    } catch (const DegenerateDesign&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
    const double r = logy[i] - line.intercept;
    rss += r * r;
    // Diagonal of the smoother matrix: u_ii = 0 so W_ii = K_h(0) S2 / (n den).
    trace += k0 * line.moments.s2 / (nd * line.moments.denominator());
  }
  if (!(trace < nd)) return std::numeric_limits<double>::quiet_NaN();
  const double shrink = 1.0 - trace / nd;
  return (rss / nd) / (shrink * shrink);
}

/// Default grid: 20 log-spaced candidates from 0.1*sd(z)*n^(-1/5) to 2*range(z).
inline std::vector<double> default_gcv_grid(VectorCRef index_values,
                                            std::size_t count = 20) {
  const auto n = index_values.size();
  if (n < 2) throw NoValidBandwidth("need at least two index values for a grid");
  const double mean = index_values.mean();
  const double sd =
      std::sqrt((index_values.array() - mean).square().sum() / (n - 1.0));
  const double range = index_values.maxCoeff() - index_values.minCoeff();
  const double lo = 0.1 * sd * std::pow(static_cast<double>(n), -0.2);
  const double hi = 2.0 * range;
  if (!(lo > 0) || !(hi > lo))
    throw NoValidBandwidth("index values have no spread; cannot build a grid");
  std::vector<double> grid(count);
  const double step = count > 1 ? std::log(hi / lo) / (count - 1.0) : 0.0;
  for (std::size_t k = 0; k < count; ++k)
    grid[k] = lo * std::exp(step * static_cast<double>(k));
  grid.back() = hi;
  return grid;
}

/// Grid minimizer of the GCV score. Candidates within 1e-12 of the minimum
/// are ties and resolve to the largest bandwidth.
inline double gcv_bandwidth(VectorCRef index_values, VectorCRef logy,
                            const Kernel& kernel, const std::vector<double>& grid) {
  detail::check_lengths(index_values, logy);
  if (grid.empty()) throw Error("GCV grid is empty");
  if (index_values.size() < 5) throw Error("GCV needs at least 5 observations");
  for (double h : grid)
    if (!(h > 0) || !std::isfinite(h)) throw Error("GCV grid entries must be positive");

  std::vector<double> scores(grid.size());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    scores[k] = gcv_score(index_values, logy, grid[k], kernel);
    if (std::isfinite(scores[k])) best = std::min(best, scores[k]);
  }
  if (!std::isfinite(best))
    throw NoValidBandwidth("every GCV candidate is degenerate");

  double chosen = -1.0;
  for (std::size_t k = 0; k < grid.size(); ++k)
    if (std::isfinite(scores[k]) && scores[k] <= best + 1e-12 * (1.0 + best))
      chosen = std::max(chosen, grid[k]);
  return chosen;
}

/// Link at bandwidth h and derivative at h1 for every evaluation point.
inline LinkFit fit_link(VectorCRef index_values, VectorCRef logy,
                        VectorCRef eval_points, const Bandwidths& bw,
                        const Kernel& kernel) {
  detail::check_lengths(index_values, logy);
  if (!bw.valid()) throw Error("fit_link needs positive finite bandwidths");
  LinkFit fit;
  fit.eval_points = eval_points;
  fit.bandwidths = bw;
  fit.kernel = kernel;
  const auto m = eval_points.size();
  fit.g_hat.resize(m);
  fit.g_deriv_hat.resize(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const double z = eval_points[j];
    fit.g_hat[j] = detail::local_line(z, index_values, logy, bw.h, kernel).intercept;
    fit.g_deriv_hat[j] =
        detail::local_line(z, index_values, logy, bw.h1, kernel).slope;
  }
  return fit;
}

struct LinkValue {
  double value = 0.0;
  bool extrapolated = false;  ///< z outside the training index range or clamped
};

/// Evaluates the link at an arbitrary point. Outside the data range the local
/// line from the nearest window extrapolates; if that window is empty the
/// point is clamped to the nearest training index value.
inline LinkValue evaluate_link(double z, VectorCRef index_values, VectorCRef logy,
                               double h, const Kernel& kernel) {
  detail::check_lengths(index_values, logy);
  LinkValue out;
  out.extrapolated =
      z < index_values.minCoeff() || z > index_values.maxCoeff();
  try {
    out.value = detail::local_line(z, index_values, logy, h, kernel).intercept;
    return out;
  } catch (const DegenerateDesign&) {
  }
  out.extrapolated = true;
  Eigen::Index nearest = 0;
  (index_values.array() - z).abs().minCoeff(&nearest);
  try {
    out.value = detail::local_line(index_values[nearest], index_values, logy, h,
                                   kernel).intercept;
  } catch (const DegenerateDesign&) {
    out.value = logy[nearest];
  }
  return out;
}

}  // namespace lpre
