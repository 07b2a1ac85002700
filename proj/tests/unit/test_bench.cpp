#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "lmesens/bench.hpp"

namespace lmesens {
namespace {

TEST(SpeedupModel, SerialWithLinearCostIsExactlyOne) {
  for (double T : {1.0, 2.0, 24.0, 8760.0, 1e6})
    for (double nbar : {1.0, 7.0, 600.0})
      for (double K : {1.0, 3.0, 10.0}) EXPECT_EQ(speedup_model(T, nbar, K, 1.0, false), 1.0);
}

TEST(SpeedupModel, ParallelSinglePeriodIsOne) {
  EXPECT_DOUBLE_EQ(speedup_model(1.0, 600.0, 10.0, 1.0, true), 1.0);
  EXPECT_DOUBLE_EQ(speedup_model(1.0, 90.0, 10.0, 1.0, true), 1.0);
}

TEST(SpeedupModel, ParallelAsymptotes) {
  EXPECT_NEAR(speedup_model(1e6, 600.0, 10.0, 1.0, true), 61.0, 0.05 * 61.0);
  EXPECT_NEAR(speedup_model(1e6, 90.0, 10.0, 3.0, true), 1000.0, 0.05 * 1000.0);
}

TEST(SpeedupModel, ParallelIsMonotoneAndBounded) {
  for (double beta : {1.0, 1.5, 2.0, 3.0}) {
    const double bound = std::pow(120.0 / 4.0 + 1.0, beta);
    double previous = 0.0;
    for (double T = 1; T < 1e7; T *= 3) {
      const double eta = speedup_model(T, 120.0, 4.0, beta, true);
      EXPECT_GE(eta, previous);
      EXPECT_LE(eta, bound * (1 + 1e-12));
      previous = eta;
    }
  }
}

TEST(SpeedupModel, RejectsOutOfDomainArguments) {
  EXPECT_THROW(speedup_model(0.0, 10.0, 1.0, 1.0, true), DomainError);
  EXPECT_THROW(speedup_model(10.0, -1.0, 1.0, 1.0, true), DomainError);
  EXPECT_THROW(speedup_model(10.0, 10.0, 0.0, 1.0, false), DomainError);
  EXPECT_THROW(speedup_model(10.0, 10.0, 1.0, 0.5, false), DomainError);
  EXPECT_THROW(speedup_model(10.0, 10.0, 1.0, 3.5, false), DomainError);
}

TEST(FitBeta, RecoversConstructedExponents) {
  const std::vector<double> sizes{100, 400, 1600, 6400};
  std::vector<double> linear, cubic;
  for (double s : sizes) linear.push_back(2e-6 * s), cubic.push_back(1e-9 * s * s * s);
  EXPECT_NEAR(fit_beta(sizes, linear), 1.0, 1e-12);
  EXPECT_NEAR(fit_beta(sizes, cubic), 3.0, 1e-12);
}

TEST(FitBeta, NeedsThreeDistinctSizes) {
  EXPECT_THROW(fit_beta({1, 2}, {1, 2}), DomainError);
  EXPECT_THROW(fit_beta({1, 2, 2}, {1, 2, 2}), DomainError);
  EXPECT_THROW(fit_beta({1, 2, 3}, {1, 2}), DimensionError);
  EXPECT_THROW(fit_beta({1, 2, 3}, {1, 0, 2}), DomainError);
  EXPECT_THROW(fit_beta(BenchReport{}), DomainError);
}

BenchReport three_cell_report() {
  BenchReport r;
  r.n_nodes = 4;
  r.n_lines = 5;
  r.n_batteries = 1;
  r.n_bar = 10;
  r.trials = 2;
  r.hardware_threads = 1;
  r.machine = "test-host";
  for (Index T : {24, 96, 336}) {
    BenchCell c;
    c.method = Method::central_rev;
    c.horizon = T;
    c.trial_seconds = {1e-4 * double(T), 2e-4 * double(T)};
    c.trial_min_seconds = 1e-4 * double(T);
    c.stages = {{"factorize", 0.6e-4 * double(T)}, {"adjoint_solve", 0.4e-4 * double(T)}};
    r.cells.push_back(c);
  }
  r.cells.back().speedup = 1.25;
  return r;
}

TEST(FitBeta, ReportOverloadUsesCentralCells) {
  EXPECT_NEAR(fit_beta(three_cell_report()), 1.0, 1e-9);
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::size_t at = 0;
  while (at < text.size()) {
    const std::size_t nl = text.find('\n', at);
    out.push_back(text.substr(at, nl - at));
    at = nl == std::string::npos ? text.size() : nl + 1;
  }
  return out;
}

TEST(EmitReport, EmptyReportIsHeaderOnlyCsv) {
  const auto lines = lines_of(report_to_csv(BenchReport{}));
  ASSERT_EQ(lines.size(), 1u);
  EXPECT_EQ(lines[0], "method,T,parallelism,trial_min_seconds,stage,speedup");
}

TEST(EmitReport, OneCsvRowPerCell) {
  const auto lines = lines_of(report_to_csv(three_cell_report()));
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[1].substr(0, 18), "central-rev,24,1,0");
}

TEST(EmitReport, JsonRoundTrip) {
  const BenchReport r = three_cell_report();
  EXPECT_EQ(parse_report_json(report_to_json(r)), r);
  EXPECT_EQ(parse_report_json(report_to_json(BenchReport{})), BenchReport{});
  EXPECT_THROW(parse_report_json("[1, 2"), ParseError);
}

TEST(EmitReport, WritesFiles) {
  const auto dir = std::filesystem::temp_directory_path();
  const BenchReport r = three_cell_report();
  emit_report(r, ReportFormat::json, dir / "lmesens_report.json");
  emit_report(r, ReportFormat::csv, dir / "lmesens_report.csv");
  std::ifstream json(dir / "lmesens_report.json"), csv(dir / "lmesens_report.csv");
  EXPECT_EQ(parse_report_json(std::string(std::istreambuf_iterator<char>(json), {})), r);
  EXPECT_EQ(std::string(std::istreambuf_iterator<char>(csv), {}), report_to_csv(r));
  EXPECT_THROW(emit_report(r, ReportFormat::csv, dir / "no_such_dir" / "x.csv"), Error);
}

TEST(BenchConfig, ParsesSyntheticSource) {
  const BenchConfig cfg = parse_bench_config(R"({
    "case": {"synthetic": {"nodes": 8, "batteries": 2, "seed": 5}},
    "methods": ["central-rev", "decentral_rev"],
    "horizons": [4, 8], "parallelism": [1, 2], "trials": 3, "beta": 1.2})");
  EXPECT_FALSE(cfg.case_file);
  EXPECT_EQ(cfg.synthetic.nodes, 8);
  EXPECT_EQ(cfg.synthetic.batteries, 2);
  EXPECT_EQ(cfg.synthetic.seed, 5u);
  EXPECT_EQ(cfg.methods, (std::vector<Method>{Method::central_rev, Method::decentral_rev}));
  EXPECT_EQ(cfg.horizons, (std::vector<Index>{4, 8}));
  EXPECT_EQ(cfg.trials, 3);
  EXPECT_DOUBLE_EQ(cfg.beta, 1.2);
}

TEST(BenchConfig, RejectsMalformedDocuments) {
  EXPECT_THROW(parse_bench_config("{"), ParseError);
  EXPECT_THROW(parse_bench_config(R"({"horizons": [2]})"), ParseError);
  EXPECT_THROW(parse_bench_config(R"({"case": {"file": "x.json"}, "trails": 2})"), ParseError);
  EXPECT_THROW(parse_bench_config(R"({"case": {"file": "x.json"}, "trials": 0})"), ParseError);
  EXPECT_THROW(parse_bench_config(R"({"case": {"file": "x.json"}, "horizons": [0]})"), ParseError);
  EXPECT_THROW(parse_bench_config(R"({"case": {"file": "x.json"}, "methods": ["finite-diff"]})"), ParseError);
  EXPECT_THROW(parse_bench_config(R"({"case": {"file": "x.json"}, "methods": ["nope"]})"), ParseError);
  EXPECT_THROW(load_bench_config("/nonexistent/bench.json"), ParseError);
}

TEST(RunBenchmark, SingleCell) {
  BenchConfig cfg;
  cfg.case_file = testing::case2b_path();
  cfg.methods = {Method::central_rev};
  cfg.horizons = {2};
  cfg.trials = 1;
  const BenchReport r = run_benchmark(cfg);
  ASSERT_EQ(r.cells.size(), 1u);
  EXPECT_TRUE(r.errors.empty());
  const BenchCell& cell = r.cells[0];
  EXPECT_EQ(cell.trial_seconds.size(), 1u);
  EXPECT_EQ(cell.trial_min_seconds, cell.trial_seconds[0]);
  EXPECT_FALSE(cell.speedup);
  EXPECT_EQ(r.n_bar, 2 + 1 + 1);
  for (const auto& [name, sec] : cell.stages) EXPECT_NE(name.rfind("assemble", 0), 0u) << name;
}

TEST(RunBenchmark, SpeedupForDecentralCells) {
  BenchConfig cfg;
  cfg.synthetic = SyntheticSource{6, 1, std::nullopt, 3};
  cfg.methods = {Method::central_rev, Method::decentral_rev};
  cfg.horizons = {3, 6};
  cfg.trials = 2;
  const BenchReport r = run_benchmark(cfg);
  ASSERT_EQ(r.cells.size(), 4u);
  for (const BenchCell& c : r.cells) {
    EXPECT_EQ(c.trial_seconds.size(), 2u);
    EXPECT_EQ(c.trial_min_seconds, *std::min_element(c.trial_seconds.begin(), c.trial_seconds.end()));
    if (c.method == Method::decentral_rev) {
      ASSERT_TRUE(c.speedup);
      const auto central = std::find_if(r.cells.begin(), r.cells.end(), [&](const BenchCell& o) {
        return o.method == Method::central_rev && o.horizon == c.horizon;
      });
      EXPECT_DOUBLE_EQ(*c.speedup, central->trial_min_seconds / c.trial_min_seconds);
    } else {
      EXPECT_FALSE(c.speedup);
    }
  }
}

TEST(RunBenchmark, HorizonBeyondCaseFileIsReportedNotFatal) {
  BenchConfig cfg;
  cfg.case_file = testing::case2b_path();
  cfg.methods = {Method::central_rev};
  cfg.horizons = {2, 5};
  cfg.trials = 1;
  const BenchReport r = run_benchmark(cfg);
  EXPECT_EQ(r.cells.size(), 1u);
  EXPECT_EQ(r.errors.size(), 1u);
}

}  // namespace
}  // namespace lmesens
