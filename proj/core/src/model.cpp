#include "lmesens/model.hpp"

#include <cmath>
#include <queue>
#include <sstream>

namespace lmesens {

ValidationError::ValidationError(std::vector<Violation> violations)
    : Error([&] {
        std::ostringstream out;
        out << "invalid case (" << violations.size() << " violation"
            << (violations.size() == 1 ? "" : "s") << ")";
        for (const auto& v : violations) out << "; " << v.code << ": " << v.message;
        return out.str();
      }()),
      violations_(std::move(violations)) {}

SparseMatrix Network::line_incidence() const {
  SparseMatrix a(n_nodes, n_lines());
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(2 * line_from.size());
  for (Index m = 0; m < n_lines(); ++m) {
    entries.emplace_back(line_from[m], m, 1.0);
    entries.emplace_back(line_to[m], m, -1.0);
  }
  a.setFromTriplets(entries.begin(), entries.end());
  return a;
}

SparseMatrix Network::battery_incidence() const {
  SparseMatrix b(n_nodes, n_batteries());
  std::vector<Eigen::Triplet<double>> entries;
  for (Index k = 0; k < n_batteries(); ++k) entries.emplace_back(battery_node[k], k, 1.0);
  b.setFromTriplets(entries.begin(), entries.end());
  return b;
}

namespace {

// Exact elementwise equality; NaN never compares equal.
bool same(const MatrixXd& a, const MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

}  // namespace

bool Network::operator==(const Network& other) const {
  return n_nodes == other.n_nodes && line_from == other.line_from &&
         line_to == other.line_to && same(susceptance, other.susceptance) &&
         same(f_max, other.f_max) && battery_node == other.battery_node &&
         same(p_max, other.p_max) && same(s_max, other.s_max) &&
         same(s_init, other.s_init) && same(s_final, other.s_final);
}

bool DispatchCase::operator==(const DispatchCase& other) const {
  return network == other.network && horizon == other.horizon && same(cost, other.cost) &&
         same(demand, other.demand) && same(g_max, other.g_max) &&
         same(emissions_rate, other.emissions_rate);
}

std::vector<Violation> validate_case(const DispatchCase& c) {
  std::vector<Violation> out;
  auto add = [&](std::string code, std::string message, long index = -1) {
    out.push_back({std::move(code), std::move(message), index});
  };

  const Network& net = c.network;
  const Index n = net.n_nodes;
  const Index m = net.n_lines();
  const Index k = net.n_batteries();

  if (n < 1) add("no_nodes", "n_nodes must be at least 1");
  if (c.horizon < 1) add("no_periods", "horizon must be at least 1");

  auto check_vector = [&](const VectorXd& v, Index expected, const char* name) {
    if (v.size() != expected) {
      add("dimension_mismatch", std::string(name) + " has " + std::to_string(v.size()) +
                                    " entries, expected " + std::to_string(expected));
      return false;
    }
    return true;
  };
  const bool lines_ok = static_cast<Index>(net.line_to.size()) == m &&
                        check_vector(net.susceptance, m, "susceptance") &&
                        check_vector(net.f_max, m, "f_max");
  if (static_cast<Index>(net.line_to.size()) != m)
    add("dimension_mismatch", "line_from and line_to differ in length");
  const bool batteries_ok = check_vector(net.p_max, k, "p_max") &&
                            check_vector(net.s_max, k, "s_max") &&
                            check_vector(net.s_init, k, "s_init") &&
                            check_vector(net.s_final, k, "s_final");

  if (lines_ok) {
    for (Index l = 0; l < m; ++l) {
      if (net.line_from[l] < 0 || net.line_from[l] >= n || net.line_to[l] < 0 ||
          net.line_to[l] >= n) {
        add("line_endpoint_out_of_range", "line " + std::to_string(l) + " references a missing node", l);
      } else if (net.line_from[l] == net.line_to[l]) {
        add("line_self_loop", "line " + std::to_string(l) + " starts and ends at the same node", l);
      }
      if (!(net.susceptance[l] > 0.0) || !std::isfinite(net.susceptance[l]))
        add("nonpositive_susceptance", "line " + std::to_string(l) + " susceptance must be > 0", l);
      if (!(net.f_max[l] >= 0.0) || !std::isfinite(net.f_max[l]))
        add("negative_f_max", "line " + std::to_string(l) + " f_max must be >= 0", l);
    }
  }
  if (batteries_ok) {
    for (Index b = 0; b < k; ++b) {
      const std::string id = "battery " + std::to_string(b);
      if (net.battery_node[b] < 0 || net.battery_node[b] >= n)
        add("battery_node_out_of_range", id + " references a missing node", b);
      if (!(net.p_max[b] >= 0.0) || !std::isfinite(net.p_max[b]))
        add("negative_p_max", id + " p_max must be >= 0", b);
      if (!(net.s_max[b] >= 0.0) || !std::isfinite(net.s_max[b]))
        add("negative_s_max", id + " s_max must be >= 0", b);
      if (!(net.s_init[b] >= 0.0 && net.s_init[b] <= net.s_max[b]))
        add("s_init_out_of_range", id + " s_init must lie in [0, s_max]", b);
      if (!(net.s_final[b] >= 0.0 && net.s_final[b] <= net.s_max[b]))
        add("s_final_out_of_range", id + " s_final must lie in [0, s_max]", b);
    }
  }

  auto check_series = [&](const MatrixXd& x, const char* name, bool nonnegative) {
    if (x.rows() != n || x.cols() != c.horizon) {
      add("dimension_mismatch", std::string(name) + " is " + std::to_string(x.rows()) + "x" +
                                    std::to_string(x.cols()) + ", expected " + std::to_string(n) +
                                    "x" + std::to_string(c.horizon));
      return;
    }
    for (Index j = 0; j < x.cols(); ++j) {
      for (Index i = 0; i < x.rows(); ++i) {
        const double v = x(i, j);
        if (!std::isfinite(v)) {
          add("nonfinite_value", std::string(name) + " has a non-finite entry", i + n * j);
        } else if (nonnegative && v < 0.0) {
          add(std::string("negative_") + name,
              std::string(name) + " entry (" + std::to_string(i) + ", " + std::to_string(j) +
                  ") is negative",
              i + n * j);
        }
      }
    }
  };
  check_series(c.cost, "cost", false);
  check_series(c.demand, "demand", true);
  check_series(c.g_max, "g_max", true);
  check_series(c.emissions_rate, "emissions_rate", false);
  return out;
}

void require_valid(const DispatchCase& dispatch_case) {
  auto violations = validate_case(dispatch_case);
  if (!violations.empty()) throw ValidationError(std::move(violations));
}

bool is_connected(const Network& network) {
  if (network.n_nodes <= 1) return true;
  std::vector<std::vector<Index>> adjacency(network.n_nodes);
  for (Index m = 0; m < network.n_lines(); ++m) {
    adjacency[network.line_from[m]].push_back(network.line_to[m]);
    adjacency[network.line_to[m]].push_back(network.line_from[m]);
  }
  std::vector<bool> seen(network.n_nodes, false);
  std::queue<Index> frontier;
  frontier.push(0);
  seen[0] = true;
  Index reached = 1;
  while (!frontier.empty()) {
    const Index u = frontier.front();
    frontier.pop();
    for (Index v : adjacency[u]) {
      if (!seen[v]) {
        seen[v] = true;
        ++reached;
        frontier.push(v);
      }
    }
  }
  return reached == network.n_nodes;
}

}  // namespace lmesens
