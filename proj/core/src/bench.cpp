#include "lmesens/bench.hpp"

#include <unistd.h>

#include <Eigen/QR>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <sstream>
#include <thread>

#include "lmesens/central.hpp"
#include "lmesens/decentral.hpp"

namespace lmesens {

namespace {

using Json = nlohmann::ordered_json;

bool is_central(Method m) { return m == Method::central_fwd || m == Method::central_rev; }
bool is_forward(Method m) { return m == Method::central_fwd || m == Method::decentral_fwd; }

std::string host_name() {
  char buf[256] = {};
  if (gethostname(buf, sizeof(buf) - 1) != 0) return "unknown";
  return buf;
}

DispatchCase first_periods(const DispatchCase& c, Index horizon) {
  if (horizon > c.horizon)
    throw DomainError("horizon " + std::to_string(horizon) + " exceeds the case horizon " +
                      std::to_string(c.horizon));
  DispatchCase out = c;
  out.horizon = horizon;
  out.cost = c.cost.leftCols(horizon);
  out.demand = c.demand.leftCols(horizon);
  out.g_max = c.g_max.leftCols(horizon);
  out.emissions_rate = c.emissions_rate.leftCols(horizon);
  return out;
}

LmeResult run_method(Method method, const DispatchCase& c, const DispatchSolution& sol,
                     const KktSystem& kkt, std::size_t parallelism, const BenchConfig& config) {
  const DecentralOptions options{config.reg_eps, config.tol, parallelism};
  switch (method) {
    case Method::central_fwd:
      return lme_forward_central(c, sol, kkt, parallelism);
    case Method::central_rev:
      return lme_reverse_central(c, sol, kkt);
    case Method::decentral_fwd:
      return lme_forward_decentral(c, sol, options);
    case Method::decentral_rev:
      return lme_reverse_decentral(c, sol, options);
    case Method::finite_diff:
      break;
  }
  throw DomainError("the finite difference oracle is not a benchmark method");
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace

BenchConfig parse_bench_config(const std::string& text) {
  BenchConfig cfg;
  try {
    const Json j = Json::parse(text);
    if (!j.is_object()) throw ParseError("bench config must be a JSON object");
    static const std::vector<std::string> known{"case",  "methods", "horizons", "parallelism",
                                                "trials", "beta",   "reg_eps",  "tol"};
    for (const auto& [key, value] : j.items()) {
      if (std::find(known.begin(), known.end(), key) == known.end())
        throw ParseError("unknown key \"" + key + "\" in bench config");
    }
    if (!j.contains("case")) throw ParseError("missing key \"case\" in bench config");
    const Json& source = j.at("case");
    if (source.contains("file")) {
      cfg.case_file = source.at("file").get<std::string>();
    } else if (source.contains("synthetic")) {
      const Json& s = source.at("synthetic");
      cfg.synthetic.nodes = s.at("nodes").get<Index>();
      cfg.synthetic.batteries = get_or<Index>(s, "batteries", 0);
      if (s.contains("lines")) cfg.synthetic.lines = s.at("lines").get<Index>();
      cfg.synthetic.seed = get_or<std::uint64_t>(s, "seed", 1);
    } else {
      throw ParseError("\"case\" needs either \"file\" or \"synthetic\"");
    }
    if (j.contains("methods")) {
      cfg.methods.clear();
      for (const auto& m : j.at("methods")) cfg.methods.push_back(parse_method(m.get<std::string>()));
    }
    if (j.contains("horizons")) cfg.horizons = j.at("horizons").get<std::vector<Index>>();
    if (j.contains("parallelism")) cfg.parallelism = j.at("parallelism").get<std::vector<std::size_t>>();
    cfg.trials = get_or(j, "trials", cfg.trials);
    cfg.beta = get_or(j, "beta", cfg.beta);
    cfg.reg_eps = get_or(j, "reg_eps", cfg.reg_eps);
    cfg.tol = get_or(j, "tol", cfg.tol);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bench config: ") + e.what());
  } catch (const DomainError& e) {
    throw ParseError(std::string("bench config: ") + e.what());
  }

  if (cfg.trials < 1) throw ParseError("bench config: trials must be at least 1");
  if (cfg.horizons.empty() || cfg.methods.empty() || cfg.parallelism.empty())
    throw ParseError("bench config: methods, horizons and parallelism must be nonempty");
  for (Index h : cfg.horizons)
    if (h < 1) throw ParseError("bench config: horizons must be at least 1");
  for (std::size_t p : cfg.parallelism)
    if (p < 1) throw ParseError("bench config: parallelism must be at least 1");
  for (Method m : cfg.methods)
    if (m == Method::finite_diff) throw ParseError("bench config: finite-diff cannot be benchmarked");
  if (!(cfg.reg_eps > 0.0) || !(cfg.tol > 0.0)) throw ParseError("bench config: reg_eps and tol must be positive");
  return cfg;
}

BenchConfig load_bench_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open bench config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  BenchConfig cfg = parse_bench_config(buf.str());
  if (cfg.case_file && cfg.case_file->is_relative()) cfg.case_file = path.parent_path() / *cfg.case_file;
  return cfg;
}

BenchReport run_benchmark(const BenchConfig& config) {
  if (config.trials < 1) throw DomainError("trials must be at least 1");
  BenchReport report;
  report.beta = config.beta;
  report.trials = config.trials;
  report.hardware_threads = std::thread::hardware_concurrency();
  report.machine = host_name();

  std::optional<DispatchCase> file_case;
  if (config.case_file) file_case = load_case(*config.case_file);

  for (Index horizon : config.horizons) {
    try {
      DispatchCase c;
      if (file_case) {
        c = first_periods(*file_case, horizon);
      } else {
        SyntheticOptions opt;
        opt.n_nodes = config.synthetic.nodes;
        opt.n_batteries = config.synthetic.batteries;
        opt.n_lines = config.synthetic.lines;
        opt.horizon = horizon;
        opt.seed = config.synthetic.seed;
        c = generate_synthetic(opt);
      }
      report.n_nodes = c.n_nodes();
      report.n_lines = c.n_lines();
      report.n_batteries = c.n_batteries();
      report.n_bar = c.n_nodes() + c.n_lines() + c.n_batteries();

      const DispatchSolution sol = solve_dispatch(c, config.reg_eps, config.tol);
      const KktSystem kkt = assemble_kkt(c, sol, config.reg_eps);

      const std::size_t first_cell = report.cells.size();
      for (Method method : config.methods) {
        for (std::size_t par : config.parallelism) {
          BenchCell cell;
          cell.method = method;
          cell.horizon = horizon;
          cell.parallelism = par;
          cell.trial_min_seconds = std::numeric_limits<double>::infinity();
          for (int trial = 0; trial < config.trials; ++trial) {
            const LmeResult r = run_method(method, c, sol, kkt, par, config);
            const double seconds = r.linear_solve_seconds();
            cell.trial_seconds.push_back(seconds);
            if (seconds < cell.trial_min_seconds) {
              cell.trial_min_seconds = seconds;
              cell.stages = r.timings;
            }
          }
          report.cells.push_back(std::move(cell));
        }
      }

      for (std::size_t i = first_cell; i < report.cells.size(); ++i) {
        BenchCell& cell = report.cells[i];
        if (is_central(cell.method)) continue;
        double baseline = std::numeric_limits<double>::infinity();
        for (std::size_t j = first_cell; j < report.cells.size(); ++j) {
          const BenchCell& other = report.cells[j];
          if (is_central(other.method) && is_forward(other.method) == is_forward(cell.method))
            baseline = std::min(baseline, other.trial_min_seconds);
        }
        if (std::isfinite(baseline) && cell.trial_min_seconds > 0.0)
          cell.speedup = baseline / cell.trial_min_seconds;
      }
    } catch (const Error& e) {
      report.errors.push_back("T=" + std::to_string(horizon) + ": " + e.what());
    }
  }
  return report;
}

double speedup_model(double horizon, double n_bar, double batteries, double beta, bool parallel) {
  if (!(horizon > 0.0) || !(n_bar > 0.0) || !(batteries > 0.0))
    throw DomainError("speedup model needs positive T, nbar and K");
  if (!(beta >= 1.0 && beta <= 3.0)) throw DomainError("beta must lie in [1, 3]");
  const double top = std::pow(n_bar + batteries, beta);
  if (parallel) {
    const double tb = std::pow(horizon, beta);
    return tb * top / (std::pow(n_bar, beta) + tb * std::pow(batteries, beta));
  }
  // Serial form with one factor of T cancelled, so beta = 1 gives exactly 1.
  const double tb1 = std::pow(horizon, beta - 1.0);
  return tb1 * top / (std::pow(n_bar, beta) + tb1 * std::pow(batteries, beta));
}

double fit_beta(const std::vector<double>& sizes, const std::vector<double>& runtimes) {
  if (sizes.size() != runtimes.size()) throw DimensionError("sizes and runtimes differ in length");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (!(sizes[i] > 0.0) || !(runtimes[i] > 0.0)) throw DomainError("sizes and runtimes must be positive");
    x.push_back(std::log(sizes[i]));
    y.push_back(std::log(runtimes[i]));
  }
  std::vector<double> distinct = x;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 3) throw DomainError("fit_beta needs at least three distinct sizes");

  const Index n = Index(x.size());
  Eigen::MatrixXd a(n, 2);
  Eigen::VectorXd b(n);
  for (Index i = 0; i < n; ++i) {
    a(i, 0) = 1.0;
    a(i, 1) = x[i];
    b[i] = y[i];
  }
  const Eigen::Vector2d coef = a.colPivHouseholderQr().solve(b);
  return coef[1];
}

double fit_beta(const BenchReport& report) {
  for (Method method : {Method::central_rev, Method::central_fwd}) {
    std::size_t par = std::numeric_limits<std::size_t>::max();
    for (const auto& cell : report.cells)
      if (cell.method == method) par = std::min(par, cell.parallelism);
    std::vector<double> sizes, runtimes;
    for (const auto& cell : report.cells) {
      if (cell.method != method || cell.parallelism != par) continue;
      sizes.push_back(double(cell.horizon) * double(report.n_bar + report.n_batteries));
      runtimes.push_back(cell.trial_min_seconds);
    }
    if (!sizes.empty()) return fit_beta(sizes, runtimes);
  }
  throw DomainError("fit_beta needs centralized runtimes in the report");
}

std::string report_to_csv(const BenchReport& report) {
  std::ostringstream out;
  out << "method,T,parallelism,trial_min_seconds,stage,speedup\n";
  char num[64];
  for (const auto& cell : report.cells) {
    std::snprintf(num, sizeof num, "%.17g", cell.trial_min_seconds);
    out << method_name(cell.method) << ',' << cell.horizon << ',' << cell.parallelism << ',' << num << ',';
    for (std::size_t i = 0; i < cell.stages.size(); ++i) {
      std::snprintf(num, sizeof num, "%.17g", cell.stages[i].second);
      out << (i ? ";" : "") << cell.stages[i].first << '=' << num;
    }
    out << ',';
    if (cell.speedup) {
      std::snprintf(num, sizeof num, "%.17g", *cell.speedup);
      out << num;
    }
    out << '\n';
  }
  return out.str();
}

std::string report_to_json(const BenchReport& report) {
  Json j;
  j["metadata"] = {{"n_nodes", report.n_nodes},
                   {"n_lines", report.n_lines},
                   {"n_batteries", report.n_batteries},
                   {"n_bar", report.n_bar},
                   {"beta", report.beta},
                   {"trials", report.trials},
                   {"hardware_threads", report.hardware_threads},
                   {"machine", report.machine}};
  j["cells"] = Json::array();
  for (const auto& cell : report.cells) {
    Json c;
    c["method"] = std::string(method_name(cell.method));
    c["T"] = cell.horizon;
    c["parallelism"] = cell.parallelism;
    c["trial_min_seconds"] = cell.trial_min_seconds;
    c["trial_seconds"] = cell.trial_seconds;
    c["stages"] = Json::array();
    for (const auto& [name, sec] : cell.stages) c["stages"].push_back({{"name", name}, {"seconds", sec}});
    c["speedup"] = cell.speedup ? Json(*cell.speedup) : Json(nullptr);
    j["cells"].push_back(std::move(c));
  }
  j["errors"] = report.errors;
  return j.dump(2) + "\n";
}

BenchReport parse_report_json(const std::string& text) {
  BenchReport r;
  try {
    const Json j = Json::parse(text);
    const Json& m = j.at("metadata");
    r.n_nodes = m.at("n_nodes").get<Index>();
    r.n_lines = m.at("n_lines").get<Index>();
    r.n_batteries = m.at("n_batteries").get<Index>();
    r.n_bar = m.at("n_bar").get<Index>();
    r.beta = m.at("beta").get<double>();
    r.trials = m.at("trials").get<int>();
    r.hardware_threads = m.at("hardware_threads").get<unsigned>();
    r.machine = m.at("machine").get<std::string>();
    for (const auto& c : j.at("cells")) {
      BenchCell cell;
      cell.method = parse_method(c.at("method").get<std::string>());
      cell.horizon = c.at("T").get<Index>();
      cell.parallelism = c.at("parallelism").get<std::size_t>();
      cell.trial_min_seconds = c.at("trial_min_seconds").get<double>();
      cell.trial_seconds = c.at("trial_seconds").get<std::vector<double>>();
      for (const auto& s : c.at("stages"))
        cell.stages.emplace_back(s.at("name").get<std::string>(), s.at("seconds").get<double>());
      if (!c.at("speedup").is_null()) cell.speedup = c.at("speedup").get<double>();
      r.cells.push_back(std::move(cell));
    }
    r.errors = j.at("errors").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bench report: ") + e.what());
  } catch (const DomainError& e) {
    throw ParseError(std::string("bench report: ") + e.what());
  }
  return r;
}

void emit_report(const BenchReport& report, ReportFormat format, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write report to " + path.string());
  out << (format == ReportFormat::csv ? report_to_csv(report) : report_to_json(report));
  if (!out) throw Error("failed writing report to " + path.string());
}

}  // namespace lmesens
