#include "lmesens/lme.hpp"

#include <array>

namespace lmesens {

namespace {

constexpr std::array<std::pair<Method, std::string_view>, 5> kNames{{
    {Method::central_fwd, "central-fwd"},
    {Method::central_rev, "central-rev"},
    {Method::decentral_fwd, "decentral-fwd"},
    {Method::decentral_rev, "decentral-rev"},
    {Method::finite_diff, "finite-diff"},
}};

}  // namespace

std::string_view method_name(Method method) {
  for (const auto& [m, name] : kNames)
    if (m == method) return name;
  return "unknown";
}

Method parse_method(std::string_view name) {
  std::string key(name);
  std::replace(key.begin(), key.end(), '_', '-');
  for (const auto& [m, n] : kNames)
    if (n == key) return m;
  throw DomainError("unknown method \"" + std::string(name) + "\"");
}

double LmeResult::linear_solve_seconds() const {
  double total = 0.0;
  for (const auto& [stage, seconds] : timings)
    if (!stage.starts_with("assemble")) total += seconds;
  return total;
}

double LmeResult::stage_seconds(std::string_view stage) const {
  double total = 0.0;
  for (const auto& [name, seconds] : timings)
    if (name == stage) total += seconds;
  return total;
}

LmeResult make_lme_result(Method method, Index n_nodes, Index horizon) {
  LmeResult r;
  r.method = method;
  r.lambda = MatrixXd::Zero(n_nodes, horizon);
  r.degenerate_entries = BoolMatrix::Constant(n_nodes, horizon, false);
  r.evaluated = BoolMatrix::Constant(n_nodes, horizon, true);
  return r;
}

}  // namespace lmesens
