#pragma once

// Pairs-bootstrap standard errors and normal tail p-values for index
// coefficients.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "lpre/dataset.hpp"
#include "lpre/errors.hpp"
#include "lpre/lpre_fit.hpp"
#include "lpre/parallel.hpp"
#include "lpre/random.hpp"

namespace lpre {

using Fitter = std::function<FitResult(const Dataset&)>;

/// Fitter running `estimator` with a fixed configuration.
inline Fitter make_fitter(Estimator estimator, FitConfig cfg) {
  return [estimator, cfg = std::move(cfg)](const Dataset& d) {
    return fit(d, estimator, cfg);
  };
}

/// Fitter that reuses the bandwidth selected for `original` instead of
/// running GCV on each resample. Duplicated rows drive GCV towards
/// interpolation, so resamples keep the bandwidth of the full-data fit.
inline Fitter make_fitter(Estimator estimator, FitConfig cfg, const FitResult& original) {
  if (estimator != Estimator::Linear) cfg.gcv_grid = {original.bandwidths.h_opt};
  return make_fitter(estimator, std::move(cfg));
}

/// 1 - Phi(|beta_hat / se|).
inline double p_value(double beta_hat, double se) {
  if (!(se > 0) || !std::isfinite(se))
    throw UndefinedPValue("p-value needs a positive finite standard error");
  const double z = std::abs(beta_hat / se);
  return 0.5 * std::erfc(z / std::numbers::sqrt2);
}

struct BootstrapReport {
  Vector estimate;   ///< point estimate the replicates are aligned to
  Vector se;
  Vector p_values;   ///< NaN where se is zero
  Matrix replicates; ///< one successful resample fit per row, in draw order
  std::size_t n_failed = 0;
  std::size_t B = 0;
  std::uint64_t seed = 0;
};

/// Row indices of resample b: n draws with replacement.
inline std::vector<Eigen::Index> bootstrap_rows(Eigen::Index n, std::uint64_t seed,
                                                std::size_t b) {
  Rng rng(mix_seed(seed, b));
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
  for (auto& r : rows) r = pick(rng);
  return rows;
}

/// Fits every resample, flips each replicate whose dot product with the point
/// estimate is negative, and reports componentwise sample standard
/// deviations. Resamples that throw or do not converge are dropped.
inline BootstrapReport bootstrap_se(const Dataset& data, const Fitter& fitter,
                                    const Vector& estimate, std::size_t B,
                                    std::uint64_t seed, std::size_t threads = 1) {
  if (B < 2) throw Error("bootstrap needs B >= 2");
  if (estimate.size() != data.p()) throw Error("estimate has the wrong dimension");

  std::vector<std::optional<Vector>> slots(B);
  parallel_for(B, threads, [&](std::size_t b) {
    try {
      const Dataset resample = data.subset(bootstrap_rows(data.n(), seed, b));
      const FitResult f = fitter(resample);
      if (!f.converged || !f.beta_hat.beta.allFinite()) return;
      Vector v = f.beta_hat.beta;
      if (v.dot(estimate) < 0) v = -v;
      slots[b] = std::move(v);
    } catch (const Error&) {
    }
  });

  BootstrapReport rep;
  rep.estimate = estimate;
  rep.B = B;
  rep.seed = seed;
  std::size_t ok = 0;
  for (const auto& s : slots) ok += s.has_value();
  rep.n_failed = B - ok;
  if (rep.n_failed * 2 > B)
    throw TooManyFailures(std::to_string(rep.n_failed) + " of " + std::to_string(B) +
                          " bootstrap resamples failed");

  rep.replicates.resize(static_cast<Eigen::Index>(ok), data.p());
  Eigen::Index row = 0;
  for (const auto& s : slots)
    if (s) rep.replicates.row(row++) = s->transpose();

  const Eigen::RowVectorXd mean = rep.replicates.colwise().mean();
  const Matrix centered = rep.replicates.rowwise() - mean;
  const double dof = ok > 1 ? static_cast<double>(ok - 1) : 1.0;
  rep.se = (centered.colwise().squaredNorm() / dof).cwiseSqrt().transpose();

  rep.p_values.resize(data.p());
  for (Eigen::Index j = 0; j < data.p(); ++j)
    rep.p_values[j] = rep.se[j] > 0 ? p_value(estimate[j], rep.se[j])
                                    : std::numeric_limits<double>::quiet_NaN();
  return rep;
}

/// Fits the data once and bootstraps around that fit.
inline BootstrapReport bootstrap_se(const Dataset& data, const Fitter& fitter,
                                    std::size_t B, std::uint64_t seed,
                                    std::size_t threads = 1) {
  const FitResult f = fitter(data);
  return bootstrap_se(data, fitter, f.beta_hat.beta, B, seed, threads);
}

/// Fits the data once and bootstraps with that fit's bandwidth held fixed.
inline BootstrapReport bootstrap_se(const Dataset& data, Estimator estimator,
                                    const FitConfig& cfg, std::size_t B, std::uint64_t seed,
                                    std::size_t threads = 1) {
  const FitResult f = fit(data, estimator, cfg);
  if (!f.converged) throw NoDescent(f.grad_norm, "fit did not converge: " + f.diagnostic);
  return bootstrap_se(data, make_fitter(estimator, cfg, f), f.beta_hat.beta, B, seed, threads);
}

}  // namespace lpre
