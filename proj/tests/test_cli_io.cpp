#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "lpre/cli_io.hpp"
#include "test_support.hpp"

using namespace lpre;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("lpre_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter_++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
  static inline int counter_ = 0;
};

void write_file(const fs::path& p, const std::string& s) {
  std::ofstream out(p);
  out << s;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes a benchmark-model CSV with columns y, x1, x2, x3.
void write_benchmark_csv(const fs::path& p, std::size_t n, std::uint64_t seed) {
  const Dataset d = gen_data(n, benchmark_beta0(), ErrorLaw::LogNormal, seed);
  std::ofstream out(p);
  out.precision(17);
  out << "y,x1,x2,x3\n";
  for (Eigen::Index i = 0; i < d.n(); ++i)
    out << d.Y()[i] << "," << d.X()(i, 0) << "," << d.X()(i, 1) << "," << d.X()(i, 2) << "\n";
}

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "lpre");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST(LoadCsv, WellFormedFile) {
  TempDir dir;
  write_file(dir / "a.csv", "y,x\n1.5,0.1\n2.0,0.4\n0.7,-1\n");
  const Dataset d = load_csv(dir / "a.csv", "y", {"x"});
  EXPECT_EQ(d.n(), 3);
  EXPECT_EQ(d.p(), 1);
  EXPECT_DOUBLE_EQ(d.Y()[2], 0.7);
  EXPECT_DOUBLE_EQ(d.X()(1, 0), 0.4);
}

TEST(LoadCsv, ColumnOrderFollowsRequest) {
  TempDir dir;
  write_file(dir / "a.csv", "a,y,b\n1,2,3\n4,5,6\n7,8,9\n");
  const Dataset d = load_csv(dir / "a.csv", "y", {"b", "a"});
  EXPECT_EQ(d.X()(0, 0), 3.0);
  EXPECT_EQ(d.X()(0, 1), 1.0);
}

TEST(LoadCsv, ZeroResponseNamesTheRow) {
  TempDir dir;
  write_file(dir / "a.csv", "y,x\n1.5,0.1\n0,0.4\n0.7,-1\n2,3\n");
  try {
    load_csv(dir / "a.csv", "y", {"x"});
    FAIL() << "expected NonPositiveResponse";
  } catch (const NonPositiveResponse& e) {
    EXPECT_EQ(e.row(), 2u);
  }
  // Dropping the offending case first makes the file usable.
  EXPECT_EQ(load_csv(dir / "a.csv", "y", {"x"}, {2}).n(), 3);
}

TEST(LoadCsv, MissingColumnAndBadNumber) {
  TempDir dir;
  write_file(dir / "a.csv", "y,x\n1.5,0.1\n2,abc\n");
  try {
    load_csv(dir / "a.csv", "y", {"height"});
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("height"), std::string::npos);
  }
  try {
    load_csv(dir / "a.csv", "y", {"x"});
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 2u);
    EXPECT_EQ(e.col(), 2u);
  }
  write_file(dir / "b.csv", "y,x\n1.5\n");
  EXPECT_THROW(load_csv(dir / "b.csv", "y", {"x"}), ParseError);
}

TEST(Metrics, PerfectPredictionsScoreZero) {
  const Eigen::Vector3d y(1.0, 2.5, 7.0);
  const PredictionMetrics m = prediction_metrics(y, y);
  EXPECT_EQ(m.mpe, 0.0);
  EXPECT_EQ(m.mppe, 0.0);
  EXPECT_EQ(m.mape, 0.0);
  EXPECT_EQ(m.mspe, 0.0);
}

TEST(Metrics, SinglePointByHand) {
  Vector y(1), yh(1);
  y << 1.0;
  yh << 2.0;
  const PredictionMetrics m = prediction_metrics(y, yh);
  EXPECT_DOUBLE_EQ(m.mpe, 1.0);
  EXPECT_DOUBLE_EQ(m.mppe, 0.5);
  EXPECT_DOUBLE_EQ(m.mape, 1.5);
  EXPECT_DOUBLE_EQ(m.mspe, 1.0);
}

TEST(Metrics, SymmetricUnderSwap) {
  Rng rng(81);
  const Vector y = lpre::testing::normal_vector(25, rng).array().exp();
  const Vector yh = lpre::testing::normal_vector(25, rng).array().exp();
  const PredictionMetrics a = prediction_metrics(y, yh);
  const PredictionMetrics b = prediction_metrics(yh, y);
  EXPECT_DOUBLE_EQ(a.mpe, b.mpe);
  EXPECT_NEAR(a.mppe, b.mppe, 1e-15);
  EXPECT_NEAR(a.mape, b.mape, 1e-15);
  EXPECT_DOUBLE_EQ(a.mspe, b.mspe);
}

TEST(Metrics, EvenCountMedianAveragesMiddlePair) {
  EXPECT_DOUBLE_EQ(median({4.0, 1.0, 3.0, 2.0}), 2.5);
  EXPECT_DOUBLE_EQ(median({5.0, 1.0, 3.0}), 3.0);
  const Eigen::Vector4d y(1, 1, 1, 1), yh(2, 3, 4, 5);
  EXPECT_DOUBLE_EQ(prediction_metrics(y, yh).mpe, 2.5);
}

TEST(Pipeline, DropsAndSplitsInFileOrder) {
  TempDir dir;
  write_benchmark_csv(dir / "d.csv", 252, 82);
  RunConfig cfg;
  cfg.input = (dir / "d.csv").string();
  cfg.response = "y";
  cfg.drop_rows = {42, 183};
  cfg.boot = 0;
  const NamedData all =
      select_columns(read_csv(cfg.input), cfg.response, cfg.covariates, cfg.drop_rows);
  EXPECT_EQ(all.Y.size(), 250);
  EXPECT_EQ(all.case_numbers[41], 43u);
  const PipelineResult r = bodyfat_pipeline(cfg);
  EXPECT_EQ(r.y_test.size(), 50);
  EXPECT_EQ(r.test_cases.front(), 203u);
  EXPECT_EQ(r.test_cases.back(), 252u);
  EXPECT_TRUE(r.model.transform.enabled);
  EXPECT_GE(r.metrics.mpe, 0.0);

  cfg.drop_rows.clear();
  cfg.train = 202;
  EXPECT_EQ(bodyfat_pipeline(cfg).test_cases.back(), 252u);
  cfg.train = 203;
  EXPECT_THROW(bodyfat_pipeline(cfg), InvalidData);
}

TEST(Settings, FlagsOverrideConfigFile) {
  TempDir dir;
  write_file(dir / "c.conf", "# simulation\nreps = 7\nseed=5\nerrors = feff\n");
  Settings s;
  s.merge_file(dir / "c.conf");
  Settings flags;
  flags.set("seed", "11");
  s.merge(flags);
  EXPECT_EQ(s.get_u64("reps"), 7u);
  EXPECT_EQ(s.get_u64("seed"), 11u);
  EXPECT_EQ(s.get("n"), "100");
  const SimConfig cfg = sim_config_from(s, 1);
  ASSERT_EQ(cfg.errors.size(), 1u);
  EXPECT_EQ(cfg.errors[0], ErrorLaw::Feff);
  write_file(dir / "bad.conf", "colour = blue\n");
  Settings t;
  EXPECT_THROW(t.merge_file(dir / "bad.conf"), UsageError);
}

TEST(Cli, SimulateIsByteIdenticalAndEchoesConfig) {
  TempDir dir;
  write_file(dir / "sim.conf", "reps = 1\nn = 40\nseed = 3\n");
  const auto conf = (dir / "sim.conf").string();
  const CliRun a = run_cli({"simulate", "--config", conf, "--output", (dir / "a").string()});
  const CliRun b = run_cli({"simulate", "--config", conf, "--output", (dir / "b").string(),
                            "--threads", "2"});
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(read_file(dir / "a/simulation.csv"), read_file(dir / "b/simulation.csv"));
  EXPECT_EQ(read_file(dir / "a/simulation.json"), read_file(dir / "b/simulation.json"));
  const std::string csv = read_file(dir / "a/simulation.csv");
  EXPECT_NE(csv.find("# reps=1"), std::string::npos);
  EXPECT_NE(csv.find("# n=40"), std::string::npos);
  const auto j = Json::parse(read_file(dir / "a/simulation.json"));
  EXPECT_EQ(j["config"]["seed"], "3");

  const CliRun c = run_cli({"simulate", "--config", conf, "--reps", "2", "--output",
                            (dir / "c").string()});
  ASSERT_EQ(c.code, 0) << c.err;
  EXPECT_NE(read_file(dir / "c/simulation.csv").find("# reps=2"), std::string::npos);
}

TEST(Cli, ZeroResponseExitsWithDataError) {
  TempDir dir;
  write_benchmark_csv(dir / "d.csv", 60, 83);
  std::string text = read_file(dir / "d.csv");
  const auto line2 = text.find('\n') + 1;
  const auto line3 = text.find('\n', line2) + 1;
  const auto comma = text.find(',', line3);
  text.replace(line3, comma - line3, "0");
  write_file(dir / "z.csv", text);
  const CliRun r = run_cli({"fit", "--input", (dir / "z.csv").string(), "--response", "y",
                            "--output", dir.path().string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("row 2"), std::string::npos) << r.err;
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run_cli({"fit", "--no-such-flag"}).code, 1);
  EXPECT_EQ(run_cli({}).code, 1);
  EXPECT_EQ(run_cli({"fit"}).code, 1);
  EXPECT_EQ(run_cli({"simulate", "--estimators", "magic"}).code, 1);
  EXPECT_EQ(run_cli({"simulate", "--set", "colour=red"}).code, 1);
}

TEST(Cli, CheckPrintsNormalizationConstant) {
  const CliRun r = run_cli({"check"});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("0.59412"), std::string::npos) << r.out;
}

TEST(Cli, FitThenPredictReproducesFittedValues) {
  TempDir dir;
  write_benchmark_csv(dir / "d.csv", 120, 84);
  const auto out = dir.path().string();
  const CliRun f = run_cli({"fit", "--input", (dir / "d.csv").string(), "--response", "y",
                            "--output", out});
  ASSERT_EQ(f.code, 0) << f.err;
  const CliRun p = run_cli({"predict", "--fit", (dir / "fit.json").string(), "--input",
                            (dir / "d.csv").string(), "--output", out});
  ASSERT_EQ(p.code, 0) << p.err;
  const auto art = Json::parse(read_file(dir / "fit.json"));
  const auto pred = Json::parse(read_file(dir / "predictions.json"));
  ASSERT_EQ(art["fitted"].size(), 120u);
  ASSERT_EQ(pred["y_hat"].size(), 120u);
  for (std::size_t i = 0; i < 120; ++i) {
    const double a = art["fitted"][i].get<double>();
    const double b = pred["y_hat"][i].get<double>();
    EXPECT_NEAR(a / b, 1.0, 1e-10);
  }
  EXPECT_EQ(art["pivot"].get<int>() >= 1, true);
  EXPECT_TRUE(pred.contains("metrics"));
  const std::string coef = read_file(dir / "coefficients.csv");
  EXPECT_NE(coef.find("name,estimate,se,p_value"), std::string::npos);
  EXPECT_NE(coef.find("# estimator=lpre"), std::string::npos);
}

TEST(Cli, BootstrapWritesStandardErrors) {
  TempDir dir;
  write_benchmark_csv(dir / "d.csv", 80, 85);
  const CliRun r = run_cli({"bootstrap", "--input", (dir / "d.csv").string(), "--response", "y",
                            "--boot", "6", "--seed", "4", "--output", dir.path().string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = Json::parse(read_file(dir / "bootstrap.json"));
  EXPECT_EQ(j["B"], 6);
  EXPECT_EQ(j["se"].size(), 3u);
  EXPECT_EQ(j["config"]["boot"], "6");
}
