#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lmesens/lme.hpp"

namespace lmesens {

struct SyntheticSource {
  Index nodes = 20;
  Index batteries = 2;
  std::optional<Index> lines;
  std::uint64_t seed = 1;

  bool operator==(const SyntheticSource&) const = default;
};

/// What to run. With a case file every horizon must be at most the file's
/// horizon, and the first T periods are used.
struct BenchConfig {
  std::optional<std::filesystem::path> case_file;
  SyntheticSource synthetic;
  std::vector<Method> methods{Method::central_rev, Method::decentral_rev};
  std::vector<Index> horizons{24};
  std::vector<std::size_t> parallelism{1};
  int trials = 10;
  double beta = 1.0;
  double reg_eps = 1e-6;
  double tol = 1e-8;

  bool operator==(const BenchConfig&) const = default;
};

/// Throws ParseError on malformed or out-of-domain documents.
BenchConfig parse_bench_config(const std::string& text);
BenchConfig load_bench_config(const std::filesystem::path& path);

struct BenchCell {
  Method method = Method::central_rev;
  Index horizon = 0;
  std::size_t parallelism = 1;
  double trial_min_seconds = 0.0;  // linear algebra only, minimum over trials
  std::vector<double> trial_seconds;
  std::vector<std::pair<std::string, double>> stages;  // of the fastest trial
  // Central time of the same mode and horizon divided by this cell's time;
  // set for decentralized methods only.
  std::optional<double> speedup;

  bool operator==(const BenchCell&) const = default;
};

struct BenchReport {
  std::vector<BenchCell> cells;
  Index n_nodes = 0, n_lines = 0, n_batteries = 0;
  Index n_bar = 0;  // N + M + K
  double beta = 1.0;
  int trials = 0;
  unsigned hardware_threads = 0;
  std::string machine;
  std::vector<std::string> errors;  // horizons that could not be run

  bool operator==(const BenchReport&) const = default;
};

/// Runs every (method, horizon, parallelism) cell `trials` times, serially,
/// timing only factorizations and solves.
BenchReport run_benchmark(const BenchConfig& config);

/// Predicted speedup of the decentralized scheme over the centralized one
/// for factorization cost growing like size^beta. Serial:
///   T^b (nbar + K)^b / (T nbar^b + T^b K^b)
/// parallel (periods handled simultaneously):
///   T^b (nbar + K)^b / (nbar^b + T^b K^b)
double speedup_model(double horizon, double n_bar, double batteries, double beta, bool parallel);

/// Least-squares slope of log(runtime) against log(size). Needs three
/// distinct sizes.
double fit_beta(const std::vector<double>& sizes, const std::vector<double>& runtimes);
/// Same, over the centralized cells of a report with size T (nbar + K).
/// Uses central-rev when present, otherwise central-fwd, at the smallest
/// parallelism.
double fit_beta(const BenchReport& report);

enum class ReportFormat { json, csv };

std::string report_to_csv(const BenchReport& report);
std::string report_to_json(const BenchReport& report);
BenchReport parse_report_json(const std::string& text);
void emit_report(const BenchReport& report, ReportFormat format, const std::filesystem::path& path);

}  // namespace lmesens
