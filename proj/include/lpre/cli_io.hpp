#pragma once

// CSV ingestion, the train/test prediction pipeline, flat key=value
// configuration, report emitters and the command line driver.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <system_error>
#include <unistd.h>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <CLI11.hpp>
#include <Eigen/Dense>
#include <json.hpp>

#include "lpre/dataset.hpp"
#include "lpre/errors.hpp"
#include "lpre/inference.hpp"
#include "lpre/lpre_fit.hpp"
#include "lpre/simulation.hpp"

namespace lpre {

/// Bad command line or configuration.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// File could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

namespace io_detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    std::string field = trim(line.substr(start, pos == std::string_view::npos
                                                    ? std::string_view::npos
                                                    : pos - start));
    if (field.size() >= 2 && field.front() == '"' && field.back() == '"')
      field = field.substr(1, field.size() - 2);
    out.push_back(std::move(field));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

/// "%.6g", with "nan"/"inf" spelled out.
inline std::string fmt6(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace io_detail

// ---------------------------------------------------------------------------
// Files

/// Writes `contents` to a temporary sibling and renames it over `path`.
inline void write_atomic(const std::filesystem::path& path, const std::string& contents) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string());
  }
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << contents;
    out.flush();
    if (!out) throw IoError("write to " + tmp.string() + " failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move output into place at " + path.string());
  }
}

/// Header plus raw string fields. Blank lines and lines starting with '#'
/// are skipped; data rows are numbered from 1 in file order.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column(std::string_view name) const {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return j;
    return std::nullopt;
  }
};

inline CsvTable parse_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  bool have_header = false;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    const std::string s = io_detail::trim(line);
    if (s.empty() || s.front() == '#') continue;
    auto fields = io_detail::split(s, ',');
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
      continue;
    }
    ++row;
    if (fields.size() != t.header.size())
      throw ParseError(row, 0,
                       "row " + std::to_string(row) + " has " +
                           std::to_string(fields.size()) + " fields, header has " +
                           std::to_string(t.header.size()));
    t.rows.push_back(std::move(fields));
  }
  if (!have_header) throw ParseError(0, 0, "input has no header row");
  return t;
}

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_csv(in);
}

/// Selected columns of a table, before any validation of the response.
struct NamedData {
  std::vector<std::string> covariates;
  std::string response;
  Matrix X;
  Vector Y;
  std::vector<std::size_t> case_numbers;  ///< 1-based data row of each kept row

  Dataset dataset() const {
    for (Eigen::Index i = 0; i < Y.size(); ++i) {
      if (!std::isfinite(Y[i]) || !(Y[i] > 0)) {
        const std::size_t row = case_numbers[static_cast<std::size_t>(i)];
        throw NonPositiveResponse(row, "response '" + response + "' in row " +
                                           std::to_string(row) +
                                           " is not a finite positive number");
      }
    }
    return Dataset(X, Y);
  }
};

/// Extracts the response and covariates by name. An empty covariate list
/// selects every column other than the response. Rows listed in drop_rows
/// (1-based case numbers) are removed before anything is validated.
inline NamedData select_columns(const CsvTable& t, const std::string& response,
                                std::vector<std::string> covariates,
                                const std::vector<std::size_t>& drop_rows = {}) {
  const auto rcol = t.column(response);
  if (!rcol) throw ParseError(0, 0, "response column '" + response + "' not found");
  if (covariates.empty())
    for (const auto& h : t.header)
      if (h != response) covariates.push_back(h);
  if (covariates.empty()) throw ParseError(0, 0, "no covariate columns");
  std::vector<std::size_t> cols;
  for (const auto& c : covariates) {
    const auto j = t.column(c);
    if (!j) throw ParseError(0, 0, "covariate column '" + c + "' not found");
    cols.push_back(*j);
  }
  for (std::size_t d : drop_rows)
    if (d < 1 || d > t.rows.size())
      throw ParseError(d, 0, "drop row " + std::to_string(d) + " is out of range");

  NamedData out;
  out.covariates = covariates;
  out.response = response;
  std::vector<std::size_t> keep;
  for (std::size_t r = 1; r <= t.rows.size(); ++r)
    if (std::find(drop_rows.begin(), drop_rows.end(), r) == drop_rows.end())
      keep.push_back(r);
  const auto n = static_cast<Eigen::Index>(keep.size());
  out.X.resize(n, static_cast<Eigen::Index>(cols.size()));
  out.Y.resize(n);
  auto number = [&](std::size_t row, std::size_t col) {
    const auto v = io_detail::parse_double(t.rows[row - 1][col]);
    if (!v || !std::isfinite(*v))
      throw ParseError(row, col + 1,
                       "row " + std::to_string(row) + ", column '" + t.header[col] +
                           "': '" + t.rows[row - 1][col] + "' is not a finite number");
    return *v;
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t row = keep[static_cast<std::size_t>(i)];
    // A response of 0 parses fine and is rejected by dataset().
    const auto y = io_detail::parse_double(t.rows[row - 1][*rcol]);
    if (!y)
      throw ParseError(row, *rcol + 1,
                       "row " + std::to_string(row) + ", column '" + response +
                           "': '" + t.rows[row - 1][*rcol] + "' is not a number");
    out.Y[i] = *y;
    for (std::size_t k = 0; k < cols.size(); ++k)
      out.X(i, static_cast<Eigen::Index>(k)) = number(row, cols[k]);
  }
  out.case_numbers = std::move(keep);
  return out;
}

inline Dataset load_csv(const std::filesystem::path& path, const std::string& response,
                        const std::vector<std::string>& covariates,
                        const std::vector<std::size_t>& drop_rows = {}) {
  return select_columns(read_csv(path), response, covariates, drop_rows).dataset();
}

// ---------------------------------------------------------------------------
// Standardization and prediction metrics

struct Standardization {
  bool enabled = false;
  Vector mean;
  Vector sd;

  /// Column means and sample standard deviations of X.
  static Standardization fit(const Matrix& X) {
    Standardization s;
    s.enabled = true;
    s.mean = X.colwise().mean().transpose();
    s.sd.resize(X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      const double ss = (X.col(j).array() - s.mean[j]).square().sum();
      s.sd[j] = std::sqrt(ss / static_cast<double>(std::max<Eigen::Index>(1, X.rows() - 1)));
      if (!(s.sd[j] > 0))
        throw DegenerateCovariates(static_cast<std::size_t>(j),
                                   "covariate column " + std::to_string(j + 1) +
                                       " is constant");
    }
    return s;
  }

  static Standardization identity(Eigen::Index p) {
    Standardization s;
    s.mean = Vector::Zero(p);
    s.sd = Vector::Ones(p);
    return s;
  }

  Vector apply_row(VectorCRef x) const {
    if (!enabled) return x;
    Vector z(x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) z[j] = (x[j] - mean[j]) / sd[j];
    return z;
  }

  Matrix apply(const Matrix& X) const {
    if (!enabled) return X;
    Matrix Z(X.rows(), X.cols());
    for (Eigen::Index i = 0; i < X.rows(); ++i) Z.row(i) = apply_row(X.row(i).transpose()).transpose();
    return Z;
  }
};

struct PredictionMetrics {
  double mpe = 0.0;   ///< median |Y - Yhat|
  double mppe = 0.0;  ///< median |Y - Yhat|^2 / (Y Yhat)
  double mape = 0.0;  ///< median |Y - Yhat|/Y + |Y - Yhat|/Yhat
  double mspe = 0.0;  ///< median (Y - Yhat)^2
};

/// Sample median; even counts average the two middle order statistics.
inline double median(std::vector<double> v) {
  if (v.empty()) throw Error("median of an empty set");
  const std::size_t m = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m), v.end());
  const double upper = v[m];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m));
  return 0.5 * (lower + upper);
}

inline PredictionMetrics prediction_metrics(VectorCRef y, VectorCRef y_hat) {
  if (y.size() != y_hat.size() || y.size() == 0)
    throw Error("prediction metrics need equal, nonzero lengths");
  if (!(y.array() > 0).all() || !(y_hat.array() > 0).all())
    throw Error("prediction metrics need positive values");
  const auto n = static_cast<std::size_t>(y.size());
  std::vector<double> ae(n), ppe(n), are(n), se(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const double d = std::abs(y[k] - y_hat[k]);
    ae[i] = d;
    ppe[i] = d * d / (y[k] * y_hat[k]);
    are[i] = d / y[k] + d / y_hat[k];
    se[i] = d * d;
  }
  return {median(ae), median(ppe), median(are), median(se)};
}

// ---------------------------------------------------------------------------
// Fitted model with its covariate transform

struct FittedModel {
  FitResult fit;
  Standardization transform;
  std::vector<std::string> covariates;
  std::string response;

  Prediction predict_raw(VectorCRef x) const { return predict(fit, transform.apply_row(x)); }

  /// exp of the link at each training row (exp of the linear predictor for
  /// the Linear baseline).
  Vector fitted_values(const Matrix& X_train_scaled) const {
    if (fit.estimator == Estimator::Linear)
      return ((X_train_scaled * fit.linear_coef).array() + fit.linear_intercept).exp();
    return fit.link.g_hat.array().exp();
  }
};

inline FittedModel fit_model(const NamedData& nd, Estimator est, const FitConfig& cfg,
                             bool standardize) {
  FittedModel m;
  m.covariates = nd.covariates;
  m.response = nd.response;
  const Dataset raw = nd.dataset();
  m.transform = standardize ? Standardization::fit(raw.X()) : Standardization::identity(raw.p());
  const Dataset data(m.transform.apply(raw.X()), raw.Y());
  m.fit = fit(data, est, cfg);
  return m;
}

// ---------------------------------------------------------------------------
// Train/test pipeline

struct RunConfig {
  std::string input;
  std::string response;
  std::vector<std::string> covariates;
  std::vector<std::size_t> drop_rows;
  std::size_t train = 200;
  std::size_t test = 50;
  Estimator estimator = Estimator::Lpre;
  FitConfig fit_cfg;
  std::size_t boot = 500;  ///< 0 skips the bootstrap
  std::uint64_t seed = 20240601;
  std::size_t threads = 1;
  bool standardize = true;
};

struct PipelineResult {
  FittedModel model;
  std::optional<BootstrapReport> bootstrap;
  PredictionMetrics metrics;
  Vector y_test;
  Vector y_hat;
  std::vector<bool> extrapolated;
  std::vector<std::size_t> test_cases;
};

/// Splits in file order (first `train` rows, then `test` rows), standardizes
/// on the training split, fits, bootstraps and scores the test rows.
inline PipelineResult run_pipeline(const NamedData& all, const RunConfig& cfg) {
  const auto n = static_cast<std::size_t>(all.Y.size());
  if (cfg.train + cfg.test > n)
    throw InvalidData("split " + std::to_string(cfg.train) + "/" + std::to_string(cfg.test) +
                      " needs more than the " + std::to_string(n) + " available rows");
  auto take = [&](std::size_t from, std::size_t count) {
    NamedData part;
    part.covariates = all.covariates;
    part.response = all.response;
    part.X = all.X.middleRows(static_cast<Eigen::Index>(from), static_cast<Eigen::Index>(count));
    part.Y = all.Y.segment(static_cast<Eigen::Index>(from), static_cast<Eigen::Index>(count));
    part.case_numbers.assign(all.case_numbers.begin() + static_cast<std::ptrdiff_t>(from),
                             all.case_numbers.begin() + static_cast<std::ptrdiff_t>(from + count));
    return part;
  };
  const NamedData train = take(0, cfg.train);
  const NamedData test = take(cfg.train, cfg.test);
  const Dataset test_data = test.dataset();

  PipelineResult out;
  out.model = fit_model(train, cfg.estimator, cfg.fit_cfg, cfg.standardize);
  if (!out.model.fit.converged)
    throw NoDescent(out.model.fit.grad_norm, "fit did not converge: " + out.model.fit.diagnostic);
  if (cfg.boot > 0) {
    const Dataset scaled(out.model.transform.apply(train.X), train.Y);
    out.bootstrap = bootstrap_se(scaled, make_fitter(cfg.estimator, cfg.fit_cfg, out.model.fit),
                                 out.model.fit.beta_hat.beta, cfg.boot, cfg.seed, cfg.threads);
  }
  out.y_test = test_data.Y();
  out.y_hat.resize(test_data.n());
  for (Eigen::Index i = 0; i < test_data.n(); ++i) {
    const Prediction p = out.model.predict_raw(test_data.X().row(i).transpose());
    out.y_hat[i] = p.y_hat;
    out.extrapolated.push_back(p.extrapolated);
  }
  out.test_cases = test.case_numbers;
  out.metrics = prediction_metrics(out.y_test, out.y_hat);
  return out;
}

inline PipelineResult bodyfat_pipeline(const RunConfig& cfg) {
  return run_pipeline(select_columns(read_csv(cfg.input), cfg.response, cfg.covariates,
                                     cfg.drop_rows),
                      cfg);
}

// ---------------------------------------------------------------------------
// Configuration

struct SettingSpec {
  std::string_view key;
  std::string_view fallback;
  std::string_view help;
};

inline constexpr SettingSpec kSettings[] = {
    {"input", "", "input CSV file"},
    {"response", "", "response column name"},
    {"covariates", "", "comma-separated covariate columns (empty: all others)"},
    {"drop_rows", "", "comma-separated 1-based data rows to delete"},
    {"standardize", "true", "standardize covariates on the training rows"},
    {"estimator", "lpre", "lpre, ls or linear"},
    {"kernel", "gaussian", "gaussian or epanechnikov"},
    {"seed", "20240601", "random seed"},
    {"boot", "500", "bootstrap resamples"},
    {"train", "200", "training rows (file order)"},
    {"test", "50", "test rows following the training rows"},
    {"fit", "", "fit artifact JSON"},
    {"n", "100", "simulated sample size"},
    {"reps", "200", "simulation replications"},
    {"errors", "lognormal,loguniform,feff", "error laws to simulate"},
    {"estimators", "lpre,ls,linear", "estimators to simulate"},
    {"normalize_linear", "true", "scale Linear coefficients to unit norm before metrics"},
    {"max_outer", "500", "outer iteration cap"},
    {"max_inner", "50", "Newton iteration cap"},
    {"tol_beta", "1e-08", "outer convergence tolerance"},
    {"tol_grad", "1e-08", "gradient tolerance"},
    {"ridge", "1e-08", "ridge added to the information matrix"},
    {"gcv_grid_size", "20", "number of GCV bandwidth candidates"},
    {"anderson_memory", "0", "outer acceleration memory (0 disables)"},
};

inline bool known_setting(std::string_view key) {
  for (const auto& s : kSettings)
    if (s.key == key) return true;
  return false;
}

inline const SettingSpec& setting_spec(std::string_view key) {
  for (const auto& s : kSettings)
    if (s.key == key) return s;
  throw UsageError("unknown setting '" + std::string(key) + "'");
}

/// Flat key=value settings. Later layers win.
class Settings {
 public:
  void set(const std::string& key, std::string value) {
    if (!known_setting(key)) throw UsageError("unknown setting '" + key + "'");
    values_[key] = std::move(value);
  }

  /// "key = value" lines; '#' starts a comment.
  void merge_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const std::string s = io_detail::trim(line);
      if (s.empty()) continue;
      const auto eq = s.find('=');
      if (eq == std::string::npos)
        throw UsageError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
      set(io_detail::trim(s.substr(0, eq)), io_detail::trim(s.substr(eq + 1)));
    }
  }

  void merge(const Settings& other) {
    for (const auto& [k, v] : other.values_) values_[k] = v;
  }

  std::string get(std::string_view key) const {
    if (auto it = values_.find(std::string(key)); it != values_.end()) return it->second;
    return std::string(setting_spec(key).fallback);
  }

  double get_double(std::string_view key) const {
    const auto v = io_detail::parse_double(get(key));
    if (!v) throw UsageError("setting " + std::string(key) + " must be a number");
    return *v;
  }

  std::uint64_t get_u64(std::string_view key) const {
    const std::string s = get(key);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
      throw UsageError("setting " + std::string(key) + " must be a non-negative integer");
    return v;
  }

  bool get_bool(std::string_view key) const {
    const std::string s = get(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw UsageError("setting " + std::string(key) + " must be true or false");
  }

  std::vector<std::string> get_list(std::string_view key) const {
    const std::string s = get(key);
    if (io_detail::trim(s).empty()) return {};
    return io_detail::split(s, ',');
  }

  /// Effective values of `keys`, sorted by key.
  std::map<std::string, std::string> effective(const std::vector<std::string>& keys) const {
    std::map<std::string, std::string> out;
    for (const auto& k : keys) out[k] = get(k);
    return out;
  }

 private:
  std::map<std::string, std::string> values_;
};

inline FitConfig fit_config_from(const Settings& s) {
  FitConfig cfg;
  try {
    cfg.kernel = kernel_from_name(s.get("kernel"));
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  cfg.max_outer = static_cast<int>(s.get_u64("max_outer"));
  cfg.max_inner = static_cast<int>(s.get_u64("max_inner"));
  cfg.tol_beta = s.get_double("tol_beta");
  cfg.tol_grad = s.get_double("tol_grad");
  cfg.ridge = s.get_double("ridge");
  cfg.gcv_grid_size = s.get_u64("gcv_grid_size");
  cfg.anderson_memory = static_cast<int>(s.get_u64("anderson_memory"));
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

inline Estimator estimator_from(const Settings& s) {
  try {
    return estimator_from_name(s.get("estimator"));
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

inline RunConfig run_config_from(const Settings& s, std::size_t threads) {
  RunConfig cfg;
  cfg.input = s.get("input");
  cfg.response = s.get("response");
  if (cfg.input.empty()) throw UsageError("an input file is required (--input)");
  if (cfg.response.empty()) throw UsageError("a response column is required (--response)");
  cfg.covariates = s.get_list("covariates");
  for (const auto& d : s.get_list("drop_rows")) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(d.data(), d.data() + d.size(), v);
    if (ec != std::errc() || ptr != d.data() + d.size() || v == 0)
      throw UsageError("drop_rows entries must be positive integers, got '" + d + "'");
    cfg.drop_rows.push_back(v);
  }
  cfg.train = s.get_u64("train");
  cfg.test = s.get_u64("test");
  cfg.estimator = estimator_from(s);
  cfg.fit_cfg = fit_config_from(s);
  cfg.boot = s.get_u64("boot");
  cfg.seed = s.get_u64("seed");
  cfg.threads = threads;
  cfg.standardize = s.get_bool("standardize");
  return cfg;
}

inline SimConfig sim_config_from(const Settings& s, std::size_t threads) {
  SimConfig cfg;
  cfg.n = s.get_u64("n");
  cfg.reps = s.get_u64("reps");
  cfg.seed = s.get_u64("seed");
  cfg.fit_cfg = fit_config_from(s);
  cfg.threads = threads;
  cfg.normalize_linear = s.get_bool("normalize_linear");
  try {
    cfg.errors.clear();
    for (const auto& e : s.get_list("errors")) cfg.errors.push_back(error_law_from_name(e));
    cfg.estimators.clear();
    for (const auto& e : s.get_list("estimators"))
      cfg.estimators.push_back(estimator_from_name(e));
    cfg.validate();
  } catch (const UsageError&) {
    throw;
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Emitters

using Json = nlohmann::ordered_json;
using ConfigEcho = std::map<std::string, std::string>;

namespace io_detail {

inline Json to_json(VectorCRef v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Vector vector_from(const Json& a) {
  Vector v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

inline std::string csv_preamble(const ConfigEcho& config) {
  std::string out;
  for (const auto& [k, v] : config) out += "# " + k + "=" + v + "\n";
  return out;
}

inline Json config_json(const ConfigEcho& config) {
  Json j = Json::object();
  for (const auto& [k, v] : config) j[k] = v;
  return j;
}

}  // namespace io_detail

/// Everything needed to evaluate the fitted link later.
inline Json fit_artifact(const FittedModel& m, const Matrix& X_train_scaled,
                         const ConfigEcho& config) {
  using io_detail::to_json;
  const FitResult& f = m.fit;
  Json j;
  j["config"] = io_detail::config_json(config);
  j["estimator"] = std::string(estimator_name(f.estimator));
  j["converged"] = f.converged;
  j["diagnostic"] = f.diagnostic;
  j["response"] = m.response;
  j["covariates"] = m.covariates;
  j["beta_hat"] = to_json(f.beta_hat.beta);
  j["pivot"] = f.beta_hat.pivot + 1;
  j["kernel"] = std::string(f.link.kernel.name());
  j["bandwidths"] = {{"h_opt", f.bandwidths.h_opt}, {"h", f.bandwidths.h}, {"h1", f.bandwidths.h1}};
  j["criterion"] = f.criterion_value;
  j["outer_iterations"] = f.outer_iters;
  j["gradient_norm"] = f.grad_norm;
  if (f.estimator == Estimator::Linear) {
    j["linear_coef"] = to_json(f.linear_coef);
    j["linear_intercept"] = f.linear_intercept;
  }
  j["standardization"] = {{"enabled", m.transform.enabled},
                          {"mean", to_json(m.transform.mean)},
                          {"sd", to_json(m.transform.sd)}};
  j["train_index"] = to_json(f.link.eval_points);
  j["train_logy"] = to_json(f.train_logy);
  j["fitted"] = to_json(m.fitted_values(X_train_scaled));
  return j;
}

inline FittedModel model_from_artifact(const Json& j) {
  try {
    FittedModel m;
    FitResult& f = m.fit;
    f.estimator = estimator_from_name(j.at("estimator").get<std::string>());
    f.converged = j.at("converged").get<bool>();
    m.response = j.at("response").get<std::string>();
    m.covariates = j.at("covariates").get<std::vector<std::string>>();
    f.beta_hat.beta = io_detail::vector_from(j.at("beta_hat"));
    f.beta_hat.pivot = j.at("pivot").get<Eigen::Index>() - 1;
    const auto& bw = j.at("bandwidths");
    f.bandwidths = {bw.at("h_opt").get<double>(), bw.at("h").get<double>(),
                    bw.at("h1").get<double>()};
    f.link.kernel = kernel_from_name(j.at("kernel").get<std::string>());
    f.link.bandwidths = f.bandwidths;
    f.link.eval_points = io_detail::vector_from(j.at("train_index"));
    f.train_logy = io_detail::vector_from(j.at("train_logy"));
    if (f.estimator == Estimator::Linear) {
      f.linear_coef = io_detail::vector_from(j.at("linear_coef"));
      f.linear_intercept = j.at("linear_intercept").get<double>();
    }
    const auto& st = j.at("standardization");
    m.transform.enabled = st.at("enabled").get<bool>();
    m.transform.mean = io_detail::vector_from(st.at("mean"));
    m.transform.sd = io_detail::vector_from(st.at("sd"));
    if (m.covariates.size() != static_cast<std::size_t>(f.beta_hat.dim()))
      throw InvalidData("fit artifact covariates do not match its coefficients");
    return m;
  } catch (const Json::exception& e) {
    throw InvalidData(std::string("malformed fit artifact: ") + e.what());
  }
}

/// name, estimate, se, p_value; se and p_value blank without a bootstrap.
inline std::string coefficient_csv(const FittedModel& m, const BootstrapReport* boot,
                                   const ConfigEcho& config) {
  using io_detail::fmt6;
  std::string out = io_detail::csv_preamble(config);
  out += "name,estimate,se,p_value\n";
  const Vector& b = m.fit.beta_hat.beta;
  for (Eigen::Index j = 0; j < b.size(); ++j) {
    out += m.covariates[static_cast<std::size_t>(j)] + "," + fmt6(b[j]) + ",";
    if (boot) out += fmt6(boot->se[j]) + "," + fmt6(boot->p_values[j]);
    else out += ",";
    out += "\n";
  }
  return out;
}

inline Json bootstrap_json(const BootstrapReport& r, const std::vector<std::string>& names,
                           const ConfigEcho& config) {
  using io_detail::to_json;
  Json j;
  j["config"] = io_detail::config_json(config);
  j["covariates"] = names;
  j["B"] = r.B;
  j["seed"] = r.seed;
  j["n_failed"] = r.n_failed;
  j["estimate"] = to_json(r.estimate);
  j["se"] = to_json(r.se);
  j["p_values"] = to_json(r.p_values);
  Json reps = Json::array();
  for (Eigen::Index i = 0; i < r.replicates.rows(); ++i)
    reps.push_back(to_json(r.replicates.row(i).transpose()));
  j["replicates"] = std::move(reps);
  return j;
}

inline Json metrics_json(const PredictionMetrics& m) {
  return {{"mpe", m.mpe}, {"mppe", m.mppe}, {"mape", m.mape}, {"mspe", m.mspe}};
}

/// One row per estimator x law x component; every value is multiplied by
/// 100.
inline std::string simulation_csv(const SimReport& r, const ConfigEcho& config) {
  using io_detail::fmt6;
  std::string out = io_detail::csv_preamble(config);
  out += "# values x100\n";
  out += "estimator,law,component,bias,se,rmse,ee_mean,mse_mean,ase_mean,n_ok,n_failed\n";
  for (const auto& c : r.cells) {
    for (Eigen::Index j = 0; j < c.bias.size(); ++j) {
      out += std::string(estimator_name(c.estimator)) + "," +
             std::string(error_law_name(c.law)) + ",beta" + std::to_string(j + 1) + "," +
             fmt6(100 * c.bias[j]) + "," + (c.se_defined ? fmt6(100 * c.se[j]) : "") + "," +
             fmt6(100 * c.rmse[j]) + "," + fmt6(100 * c.ee_mean) + "," +
             fmt6(100 * c.mse_mean) + "," + (c.ase_mean ? fmt6(100 * *c.ase_mean) : "") +
             "," + std::to_string(c.n_ok) + "," + std::to_string(c.n_failed) + "\n";
    }
  }
  return out;
}

inline Json simulation_json(const SimReport& r, const ConfigEcho& config) {
  using io_detail::to_json;
  Json j;
  j["config"] = io_detail::config_json(config);
  j["beta0"] = to_json(r.config.beta0.beta);
  Json cells = Json::array();
  for (const auto& c : r.cells) {
    Json cj;
    cj["estimator"] = std::string(estimator_name(c.estimator));
    cj["law"] = std::string(error_law_name(c.law));
    cj["n_ok"] = c.n_ok;
    cj["n_failed"] = c.n_failed;
    cj["bias"] = to_json(c.bias);
    cj["se"] = to_json(c.se);
    cj["se_defined"] = c.se_defined;
    cj["rmse"] = to_json(c.rmse);
    cj["ee_mean"] = c.ee_mean;
    cj["mse_mean"] = c.mse_mean;
    cj["ase_mean"] = c.ase_mean ? Json(*c.ase_mean) : Json(nullptr);
    Json reps = Json::array();
    for (const auto& rec : c.reps) {
      Json rj;
      rj["rep"] = rec.rep;
      rj["seed"] = rec.seed;
      rj["ok"] = rec.ok;
      if (rec.ok) {
        rj["beta_hat"] = to_json(rec.beta_hat);
        rj["ee"] = rec.ee;
        rj["mse"] = rec.mse;
        rj["ase"] = rec.ase ? Json(*rec.ase) : Json(nullptr);
      } else {
        rj["failure"] = rec.failure;
      }
      reps.push_back(std::move(rj));
    }
    cj["reps"] = std::move(reps);
    cells.push_back(std::move(cj));
  }
  j["cells"] = std::move(cells);
  return j;
}

// ---------------------------------------------------------------------------
// Self checks

struct CheckReport {
  double c_quadrature = 0.0;
  double c_bessel = 0.0;
  struct Moment {
    ErrorLaw law;
    double mean;
    double bound;
    bool ok;
  };
  std::vector<Moment> moments;
  double gradient_rel_err = 0.0;
  double hessian_rel_err = 0.0;

  bool ok() const {
    bool good = std::abs(c_quadrature / 0.5941 - 1.0) <= 5e-4 &&
                std::abs(c_quadrature / c_bessel - 1.0) <= 1e-10 &&
                gradient_rel_err <= 1e-6 && hessian_rel_err <= 1e-6;
    for (const auto& m : moments) good = good && m.ok;
    return good;
  }
};

/// 1 / integral_0^inf exp(-x - 1/x + 2 - log x) dx.
inline double feff_normalization_quadrature() {
  boost::math::quadrature::exp_sinh<double> integrator;
  const double integral = integrator.integrate([](double x) {
    if (!(x > 0)) return 0.0;
    return std::exp(-x - 1.0 / x + 2.0 - std::log(x));
  });
  return 1.0 / integral;
}

/// Mean of eps - 1/eps over N draws and the 4 sd / sqrt(N) bound.
inline CheckReport::Moment moment_diagnostic(ErrorLaw law, std::size_t N, std::uint64_t seed) {
  Rng rng(seed);
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const double e = sample_error(law, rng);
    const double d = e - 1.0 / e;
    sum += d;
    sum2 += d * d;
  }
  const double k = static_cast<double>(N);
  const double mean = sum / k;
  const double sd = std::sqrt(std::max(0.0, (sum2 - k * mean * mean) / (k - 1.0)));
  const double bound = 4.0 * sd / std::sqrt(k);
  return {law, mean, bound, std::abs(mean) <= bound};
}

/// Largest relative error of the LPRE estimating function and information
/// matrix against central differences of the frozen criterion along
/// beta + J d, over `instances` random problems.
inline std::pair<double, double> derivative_self_test(std::size_t instances, Eigen::Index n,
                                                      Eigen::Index p, std::uint64_t seed) {
  double grad_err = 0.0, hess_err = 0.0;
  for (std::size_t t = 0; t < instances; ++t) {
    Rng rng(mix_seed(seed, t));
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix X(n, p);
    Vector Y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < p; ++j) X(i, j) = normal(rng);
      Y[i] = std::exp(0.5 * normal(rng));
    }
    const Dataset data(X, Y);
    Vector v(p);
    for (Eigen::Index j = 0; j < p; ++j) v[j] = normal(rng);
    const UnitIndexCoef coef = make_unit_coef(v);
    LinkFit link;
    link.eval_points = X * coef.beta;
    link.g_hat.resize(n);
    link.g_deriv_hat.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      link.g_hat[i] = 0.3 * normal(rng);
      link.g_deriv_hat[i] = 1.0 + 0.5 * normal(rng);
    }
    const Matrix J = jacobian(reduce(coef));
    const Eigen::Index q = J.cols();
    // D(d) with the lift replaced by its tangent beta + J d.
    auto D = [&](const Vector& d) {
      const Vector r = data.log_y() - link.g_hat -
                       link.g_deriv_hat.cwiseProduct(X * (coef.beta + J * d) - link.eval_points);
      double s = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) s += LpreLoss::value(r[i]);
      return s / static_cast<double>(n);
    };
    auto grad = [&](const Vector& d) {
      const Vector r = data.log_y() - link.g_hat -
                       link.g_deriv_hat.cwiseProduct(X * (coef.beta + J * d) - link.eval_points);
      Vector w(n);
      for (Eigen::Index i = 0; i < n; ++i) w[i] = LpreLoss::slope(r[i]) * link.g_deriv_hat[i];
      return Vector(J.transpose() * (X.transpose() * w) / static_cast<double>(n));
    };
    const double h = 1e-5;
    Vector fd_grad(q);
    Matrix fd_hess(q, q);
    for (Eigen::Index k = 0; k < q; ++k) {
      Vector e = Vector::Zero(q);
      e[k] = h;
      fd_grad[k] = (D(e) - D(-e)) / (2 * h);
      fd_hess.col(k) = (grad(e) - grad(-e)) / (2 * h);
    }
    const Vector Q = estimating_fn(data, coef, link);
    const Matrix B = info_matrix(data, coef, link);
    grad_err = std::max(grad_err, (Q + fd_grad).norm() / std::max(1e-12, fd_grad.norm()));
    hess_err = std::max(hess_err, (B - fd_hess).norm() / std::max(1e-12, fd_hess.norm()));
  }
  return {grad_err, hess_err};
}

inline CheckReport run_checks(std::uint64_t seed) {
  CheckReport r;
  r.c_quadrature = feff_normalization_quadrature();
  r.c_bessel = feff_normalization();
  for (ErrorLaw law : {ErrorLaw::LogNormal, ErrorLaw::LogUniform, ErrorLaw::Feff})
    r.moments.push_back(
        moment_diagnostic(law, 100000, mix_seed(seed, static_cast<std::uint64_t>(law))));
  std::tie(r.gradient_rel_err, r.hessian_rel_err) = derivative_self_test(50, 30, 4, seed);
  return r;
}

// ---------------------------------------------------------------------------
// Command line

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNoConvergence = 3 };

namespace cli_detail {

const std::vector<std::string> kFitKeys{"max_outer", "max_inner", "tol_beta", "tol_grad",
                                        "ridge", "gcv_grid_size", "anderson_memory", "kernel"};

inline std::vector<std::string> keys_for(const std::string& cmd) {
  std::vector<std::string> keys;
  auto add = [&](std::initializer_list<std::string> ks) { keys.insert(keys.end(), ks); };
  if (cmd == "fit" || cmd == "bootstrap" || cmd == "pipeline") {
    add({"input", "response", "covariates", "drop_rows", "standardize", "estimator"});
    keys.insert(keys.end(), kFitKeys.begin(), kFitKeys.end());
  }
  if (cmd == "bootstrap" || cmd == "pipeline") add({"boot", "seed"});
  if (cmd == "pipeline") add({"train", "test"});
  if (cmd == "predict") add({"fit", "input"});
  if (cmd == "simulate") {
    add({"n", "reps", "errors", "estimators", "seed", "normalize_linear"});
    keys.insert(keys.end(), kFitKeys.begin(), kFitKeys.end());
  }
  if (cmd == "check") add({"seed"});
  return keys;
}

inline std::string flag_name(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return "--" + key;
}

inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e)) return kExitUsage;
  if (dynamic_cast<const NoDescent*>(&e) || dynamic_cast<const TooManyFailures*>(&e) ||
      dynamic_cast<const AbortedRun*>(&e) || dynamic_cast<const SingularInformation*>(&e) ||
      dynamic_cast<const NoValidBandwidth*>(&e) || dynamic_cast<const DegenerateDesign*>(&e) ||
      dynamic_cast<const OutsideBall*>(&e) || dynamic_cast<const SamplerFault*>(&e))
    return kExitNoConvergence;
  return kExitData;
}

struct Job {
  std::string command;
  Settings settings;
  std::filesystem::path output = ".";
  std::size_t threads = 1;

  ConfigEcho echo() const { return settings.effective(keys_for(command)); }
};

inline void write_json(const std::filesystem::path& path, const Json& j) {
  write_atomic(path, j.dump(2) + "\n");
}

inline int run_fit(const Job& job, bool with_bootstrap, std::ostream& out) {
  const RunConfig cfg = run_config_from(job.settings, job.threads);
  const NamedData nd =
      select_columns(read_csv(cfg.input), cfg.response, cfg.covariates, cfg.drop_rows);
  const FittedModel m = fit_model(nd, cfg.estimator, cfg.fit_cfg, cfg.standardize);
  const Matrix Xs = m.transform.apply(nd.X);
  const ConfigEcho echo = job.echo();
  std::optional<BootstrapReport> boot;
  if (with_bootstrap && m.fit.converged) {
    const Dataset scaled(Xs, nd.Y);
    boot = bootstrap_se(scaled, make_fitter(cfg.estimator, cfg.fit_cfg, m.fit),
                        m.fit.beta_hat.beta, cfg.boot, cfg.seed, cfg.threads);
    write_json(job.output / "bootstrap.json", bootstrap_json(*boot, m.covariates, echo));
  }
  write_json(job.output / "fit.json", fit_artifact(m, Xs, echo));
  write_atomic(job.output / "coefficients.csv",
               coefficient_csv(m, boot ? &*boot : nullptr, echo));
  if (!m.fit.converged) {
    std::cerr << "error: fit did not converge: " << m.fit.diagnostic << "\n";
    return kExitNoConvergence;
  }
  out << coefficient_csv(m, boot ? &*boot : nullptr, {});
  return kExitOk;
}

inline int run_predict(const Job& job, std::ostream& out) {
  const std::string fit_path = job.settings.get("fit");
  const std::string input = job.settings.get("input");
  if (fit_path.empty()) throw UsageError("a fit artifact is required (--fit)");
  if (input.empty()) throw UsageError("an input file is required (--input)");
  std::ifstream in(fit_path);
  if (!in) throw IoError("cannot open " + fit_path);
  Json art;
  try {
    art = Json::parse(in);
  } catch (const Json::exception& e) {
    throw InvalidData(std::string("fit artifact is not valid JSON: ") + e.what());
  }
  const FittedModel m = model_from_artifact(art);
  const CsvTable table = read_csv(input);
  const bool has_response = table.column(m.response).has_value();
  NamedData nd;
  if (has_response) {
    nd = select_columns(table, m.response, m.covariates);
  } else {
    // Covariates only; route through select_columns with a dummy response.
    CsvTable t = table;
    t.header.push_back("\x01response");
    for (auto& row : t.rows) row.push_back("1");
    nd = select_columns(t, "\x01response", m.covariates);
  }
  if (has_response) nd.dataset();  // reports non-positive responses by row

  const Eigen::Index n = nd.X.rows();
  Vector y_hat(n);
  std::string csv = io_detail::csv_preamble(job.echo());
  csv += has_response ? "row,y,y_hat,extrapolated\n" : "row,y_hat,extrapolated\n";
  for (Eigen::Index i = 0; i < n; ++i) {
    const Prediction p = m.predict_raw(nd.X.row(i).transpose());
    y_hat[i] = p.y_hat;
    csv += std::to_string(nd.case_numbers[static_cast<std::size_t>(i)]) + ",";
    if (has_response) csv += io_detail::fmt6(nd.Y[i]) + ",";
    csv += io_detail::fmt6(p.y_hat) + "," + (p.extrapolated ? "1" : "0") + "\n";
  }
  write_atomic(job.output / "predictions.csv", csv);
  Json pj;
  pj["config"] = io_detail::config_json(job.echo());
  pj["y_hat"] = io_detail::to_json(y_hat);
  if (has_response) {
    const PredictionMetrics pm = prediction_metrics(nd.Y, y_hat);
    pj["metrics"] = metrics_json(pm);
    out << "MPE=" << io_detail::fmt6(pm.mpe) << " MPPE=" << io_detail::fmt6(pm.mppe)
        << " MAPE=" << io_detail::fmt6(pm.mape) << " MSPE=" << io_detail::fmt6(pm.mspe) << "\n";
  }
  write_json(job.output / "predictions.json", pj);
  return kExitOk;
}

inline int run_simulate(const Job& job, std::ostream& out) {
  const SimConfig cfg = sim_config_from(job.settings, job.threads);
  const SimReport report = run_simulation(cfg);
  const ConfigEcho echo = job.echo();
  write_atomic(job.output / "simulation.csv", simulation_csv(report, echo));
  write_json(job.output / "simulation.json", simulation_json(report, echo));
  for (const auto& c : report.cells) {
    out << estimator_name(c.estimator) << "/" << error_law_name(c.law) << ": ok=" << c.n_ok
        << " failed=" << c.n_failed << " EE=" << io_detail::fmt6(c.ee_mean)
        << " MSE=" << io_detail::fmt6(c.mse_mean);
    if (c.ase_mean) out << " ASE=" << io_detail::fmt6(*c.ase_mean);
    out << "\n";
  }
  return kExitOk;
}

inline int run_pipeline_cmd(const Job& job, std::ostream& out) {
  const RunConfig cfg = run_config_from(job.settings, job.threads);
  const NamedData nd =
      select_columns(read_csv(cfg.input), cfg.response, cfg.covariates, cfg.drop_rows);
  const PipelineResult r = run_pipeline(nd, cfg);
  const ConfigEcho echo = job.echo();
  const Matrix Xs = r.model.transform.apply(
      Matrix(nd.X.topRows(static_cast<Eigen::Index>(cfg.train))));
  write_json(job.output / "fit.json", fit_artifact(r.model, Xs, echo));
  const BootstrapReport* boot = r.bootstrap ? &*r.bootstrap : nullptr;
  write_atomic(job.output / "coefficients.csv", coefficient_csv(r.model, boot, echo));
  if (boot) write_json(job.output / "bootstrap.json", bootstrap_json(*boot, r.model.covariates, echo));
  std::string csv = io_detail::csv_preamble(echo) + "row,y,y_hat,extrapolated\n";
  for (Eigen::Index i = 0; i < r.y_test.size(); ++i)
    csv += std::to_string(r.test_cases[static_cast<std::size_t>(i)]) + "," +
           io_detail::fmt6(r.y_test[i]) + "," + io_detail::fmt6(r.y_hat[i]) + "," +
           (r.extrapolated[static_cast<std::size_t>(i)] ? "1" : "0") + "\n";
  write_atomic(job.output / "predictions.csv", csv);
  Json mj;
  mj["config"] = io_detail::config_json(echo);
  mj["metrics"] = metrics_json(r.metrics);
  write_json(job.output / "metrics.json", mj);
  out << coefficient_csv(r.model, boot, {});
  out << "MPE=" << io_detail::fmt6(r.metrics.mpe) << " MPPE=" << io_detail::fmt6(r.metrics.mppe)
      << " MAPE=" << io_detail::fmt6(r.metrics.mape)
      << " MSPE=" << io_detail::fmt6(r.metrics.mspe) << "\n";
  return kExitOk;
}

inline int run_check(const Job& job, std::ostream& out) {
  const CheckReport r = run_checks(job.settings.get_u64("seed"));
  char buf[160];
  std::snprintf(buf, sizeof buf, "normalization constant c = %.10f (quadrature), %.10f (Bessel)\n",
                r.c_quadrature, r.c_bessel);
  out << buf;
  for (const auto& m : r.moments) {
    std::snprintf(buf, sizeof buf, "E(eps - 1/eps) %-10s mean=% .3e bound=%.3e %s\n",
                  std::string(error_law_name(m.law)).c_str(), m.mean, m.bound,
                  m.ok ? "ok" : "FAILED");
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "estimating function vs finite differences: rel err %.2e\n",
                r.gradient_rel_err);
  out << buf;
  std::snprintf(buf, sizeof buf, "information matrix vs finite differences: rel err %.2e\n",
                r.hessian_rel_err);
  out << buf;
  out << (r.ok() ? "all checks passed\n" : "some checks FAILED\n");
  return r.ok() ? kExitOk : kExitNoConvergence;
}

}  // namespace cli_detail

/// Entry point of the command line tool. Returns the process exit code.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  using namespace cli_detail;
  CLI::App app{"Least product relative error estimation for multiplicative single-index models"};
  app.require_subcommand(1);

  struct Bound {
    std::string key;
    std::string value;
    CLI::Option* opt = nullptr;
  };
  std::map<std::string, std::vector<std::unique_ptr<Bound>>> bound;
  std::map<std::string, std::string> config_path;
  std::map<std::string, std::string> output_dir;
  std::map<std::string, std::size_t> threads;
  std::map<std::string, std::vector<std::string>> generic;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"fit", "fit a model to a CSV file"},
      {"bootstrap", "fit and add bootstrap standard errors and p-values"},
      {"predict", "predict from a fit artifact"},
      {"simulate", "run the Monte Carlo benchmark"},
      {"pipeline", "train/test split, fit, bootstrap and prediction metrics"},
      {"check", "normalization constant, moment and derivative self-checks"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    config_path[name];
    output_dir[name] = ".";
    threads[name] = 1;
    sub->add_option("--config", config_path[name], "key = value settings file");
    sub->add_option("--output", output_dir[name], "output directory");
    sub->add_option("--threads", threads[name], "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--set", generic[name], "key=value setting override");
    for (const auto& key : keys_for(name)) {
      auto b = std::make_unique<Bound>();
      b->key = key;
      std::string flag = flag_name(key);
      if (key == "drop_rows") flag += ",--drop";
      b->opt = sub->add_option(flag, b->value, std::string(setting_spec(key).help));
      bound[name].push_back(std::move(b));
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  Job job;
  for (const auto& [name, help] : commands)
    if (app.got_subcommand(name)) job.command = name;
  try {
    if (!config_path[job.command].empty()) job.settings.merge_file(config_path[job.command]);
    for (const auto& kv : generic[job.command]) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
      job.settings.set(io_detail::trim(kv.substr(0, eq)), io_detail::trim(kv.substr(eq + 1)));
    }
    for (const auto& b : bound[job.command])
      if (b->opt->count() > 0) job.settings.set(b->key, b->value);
    job.output = output_dir[job.command];
    job.threads = threads[job.command];

    if (job.command == "fit") return run_fit(job, false, out);
    if (job.command == "bootstrap") return run_fit(job, true, out);
    if (job.command == "predict") return run_predict(job, out);
    if (job.command == "simulate") return run_simulate(job, out);
    if (job.command == "pipeline") return run_pipeline_cmd(job, out);
    return run_check(job, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

}  // namespace lpre
