// lmesens: command-line front end.
//
//   lmesens gen   --nodes N --batteries K --horizon T --seed S --out case.json
//   lmesens lme   --case case.json --method central-rev --out lambda.csv [--fd-check]
//   lmesens bench --config bench.json --out report.json --format json
//
// Exit codes: 0 ok, 1 check failure, 2 usage, 3 infeasible, 4 degenerate.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "lmesens/bench.hpp"
#include "lmesens/central.hpp"
#include "lmesens/decentral.hpp"
#include "lmesens/oracle.hpp"

namespace {

using namespace lmesens;

enum Exit { kOk = 0, kCheckFailed = 1, kUsage = 2, kInfeasible = 3, kDegenerate = 4 };

constexpr double kFdRelTolerance = 1e-3;

struct GenArgs {
  Index nodes = 1, batteries = 0, horizon = 1;
  std::uint64_t seed = 1;
  Index lines = -1;
  std::string out;
};

struct LmeArgs {
  std::string case_path;
  std::string method = "central-rev";
  std::size_t parallelism = 1;
  double reg_eps = 1e-6;
  double tol = 1e-8;
  std::string out;
  bool fd_check = false;
  double fd_step = 1e-4;
  std::string dump_kkt;
};

struct BenchArgs {
  std::string config;
  std::string out;
  std::string format = "json";
};

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

std::string lambda_csv(const MatrixXd& lambda) {
  std::ostringstream out;
  out << "node,period,lambda\n";
  char num[40];
  for (Index t = 0; t < lambda.cols(); ++t) {
    for (Index i = 0; i < lambda.rows(); ++i) {
      std::snprintf(num, sizeof num, "%.17g", lambda(i, t));
      out << i + 1 << ',' << t + 1 << ',' << num << '\n';
    }
  }
  return out.str();
}

int run_gen(const GenArgs& a) {
  SyntheticOptions opt;
  opt.n_nodes = a.nodes;
  opt.n_batteries = a.batteries;
  opt.horizon = a.horizon;
  opt.seed = a.seed;
  if (a.lines >= 0) opt.n_lines = a.lines;
  const DispatchCase c = generate_synthetic(opt);
  write_text(a.out, serialize_case(c));
  return kOk;
}

int run_lme(const LmeArgs& a) {
  const Method method = parse_method(a.method);
  if (method == Method::finite_diff) throw DomainError("use --fd-check for the finite difference oracle");
  const DispatchCase c = load_case(a.case_path);
  const DispatchSolution sol = solve_dispatch(c, a.reg_eps, a.tol);

  const KktSystem kkt = assemble_kkt(c, sol, a.reg_eps);
  if (!a.dump_kkt.empty()) {
    std::ofstream dump(a.dump_kkt);
    if (!dump) throw Error("cannot write " + a.dump_kkt);
    write_coordinate(dump, kkt.d1F);
  }

  const DecentralOptions options{a.reg_eps, a.tol, a.parallelism};
  LmeResult result;
  switch (method) {
    case Method::central_fwd: result = lme_forward_central(c, sol, kkt, a.parallelism); break;
    case Method::central_rev: result = lme_reverse_central(c, sol, kkt); break;
    case Method::decentral_fwd: result = lme_forward_decentral(c, sol, options); break;
    default: result = lme_reverse_decentral(c, sol, options); break;
  }
  if (result.degeneracy_flag)
    std::cerr << "warning: solution is degenerate (a bound multiplier and its slack are both ~0)\n";
  write_text(a.out, lambda_csv(result.lambda));

  if (!a.fd_check) return kOk;
  FiniteDifferenceOptions fd;
  fd.step = a.fd_step;
  fd.reg_eps = a.reg_eps;
  fd.tol = a.tol;
  fd.parallelism = a.parallelism;
  const LmeResult oracle = lme_finite_difference(c, fd);
  const LmeComparison cmp = compare_lme(result, oracle);
  std::fprintf(stderr,
               "fd-check: compared %ld entries (%ld degenerate skipped), max_abs_diff %.3e, "
               "max_rel_diff %.3e, worst (node %ld, period %ld)\n",
               long(cmp.compared), long(oracle.degenerate_entries.count()), cmp.max_abs_diff,
               cmp.max_rel_diff, long(cmp.worst_node + 1), long(cmp.worst_period + 1));
  if (cmp.max_rel_diff > kFdRelTolerance) {
    std::cerr << "fd-check: FAILED (tolerance " << kFdRelTolerance << ")\n";
    return kCheckFailed;
  }
  std::cerr << "fd-check: ok\n";
  return kOk;
}

int run_bench(const BenchArgs& a) {
  BenchConfig cfg;
  try {
    cfg = load_bench_config(a.config);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  const BenchReport report = run_benchmark(cfg);
  for (const auto& err : report.errors) std::cerr << "bench: " << err << '\n';
  const ReportFormat format = a.format == "csv" ? ReportFormat::csv : ReportFormat::json;
  if (a.out.empty() || a.out == "-")
    std::cout << (format == ReportFormat::csv ? report_to_csv(report) : report_to_json(report));
  else
    emit_report(report, format, a.out);
  return report.errors.empty() ? kOk : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Locational marginal emissions by implicit differentiation of DC-OPF"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Write a random synthetic case");
  gen_cmd->add_option("--nodes", gen.nodes, "Number of nodes")->required()->check(CLI::PositiveNumber);
  gen_cmd->add_option("--batteries", gen.batteries, "Number of batteries")->default_val(0);
  gen_cmd->add_option("--horizon", gen.horizon, "Number of periods")->required()->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen.seed, "Random seed")->default_val(1);
  gen_cmd->add_option("--lines", gen.lines, "Total number of lines (default N - 1 + N/2)");
  gen_cmd->add_option("--out", gen.out, "Output case file ('-' for stdout)")->required();

  LmeArgs lme;
  auto* lme_cmd = app.add_subcommand("lme", "Compute locational marginal emissions");
  lme_cmd->add_option("--case", lme.case_path, "Case file")->required();
  lme_cmd->add_option("--method", lme.method, "Differentiation method")
      ->check(CLI::IsMember({"central-fwd", "central-rev", "decentral-fwd", "decentral-rev"}))
      ->default_val("central-rev");
  lme_cmd->add_option("--parallelism", lme.parallelism, "Worker threads")->check(CLI::PositiveNumber)->default_val(1);
  lme_cmd->add_option("--reg-eps", lme.reg_eps, "Quadratic regularization")->check(CLI::PositiveNumber)->default_val(1e-6);
  lme_cmd->add_option("--tol", lme.tol, "KKT residual tolerance")->check(CLI::PositiveNumber)->default_val(1e-8);
  lme_cmd->add_option("--out", lme.out, "Output CSV ('-' or omitted for stdout)");
  lme_cmd->add_flag("--fd-check", lme.fd_check, "Compare against central finite differences");
  lme_cmd->add_option("--fd-step", lme.fd_step, "Relative finite difference step")->check(CLI::PositiveNumber)->default_val(1e-4);
  lme_cmd->add_option("--dump-kkt", lme.dump_kkt, "Write d1F as 'row col value' lines");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Run a benchmark configuration");
  bench_cmd->add_option("--config", bench.config, "Benchmark config (JSON)")->required();
  bench_cmd->add_option("--out", bench.out, "Report file ('-' or omitted for stdout)");
  bench_cmd->add_option("--format", bench.format, "Report format")->check(CLI::IsMember({"json", "csv"}))->default_val("json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*gen_cmd) return run_gen(gen);
    if (*lme_cmd) return run_lme(lme);
    return run_bench(bench);
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return kInfeasible;
  } catch (const DegenerateError& e) {
    std::cerr << "degenerate: " << e.what();
    if (e.period() >= 0) std::cerr << " (period " << e.period() + 1 << ")";
    std::cerr << '\n';
    return kDegenerate;
  } catch (const ValidationError& e) {
    std::cerr << "invalid case:\n";
    for (const auto& v : e.violations()) std::cerr << "  " << v.code << ": " << v.message << '\n';
    return kUsage;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kCheckFailed;
  }
}
