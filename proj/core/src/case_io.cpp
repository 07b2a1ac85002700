#include <fstream>
#include <json.hpp>
#include <sstream>

#include "lmesens/model.hpp"

namespace lmesens {

namespace {

using Json = nlohmann::ordered_json;

const Json& require_key(const Json& object, const char* key, const std::string& where) {
  if (!object.is_object()) throw ParseError(where + " must be an object");
  auto it = object.find(key);
  if (it == object.end()) throw ParseError("missing key \"" + std::string(key) + "\" in " + where);
  return *it;
}

double as_number(const Json& value, const std::string& where) {
  if (!value.is_number()) throw ParseError(where + " must be a number");
  return value.get<double>();
}

Index as_count(const Json& value, const std::string& where) {
  if (!value.is_number_integer()) throw ParseError(where + " must be an integer");
  return value.get<Index>();
}

// Shape mismatches against (n_nodes, horizon) are left to validate_case so
// they surface as dimension violations, not parse failures.
MatrixXd read_series(const Json& root, const char* key) {
  const Json& value = require_key(root, key, "case");
  if (!value.is_array()) throw ParseError(std::string(key) + " must be an array of rows");
  const Index rows = static_cast<Index>(value.size());
  const Index cols = rows > 0 && value[0].is_array() ? static_cast<Index>(value[0].size()) : 0;
  MatrixXd out(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const Json& row = value[i];
    if (!row.is_array())
      throw ParseError(std::string(key) + " row " + std::to_string(i + 1) + " must be an array");
    if (static_cast<Index>(row.size()) != cols) {
      throw ValidationError({{"dimension_mismatch",
                              std::string(key) + " row " + std::to_string(i + 1) + " has " +
                                  std::to_string(row.size()) + " entries, expected " +
                                  std::to_string(cols),
                              static_cast<long>(i)}});
    }
    for (Index j = 0; j < cols; ++j)
      out(i, j) = as_number(row[j], std::string(key) + "[" + std::to_string(i + 1) + "][" +
                                        std::to_string(j + 1) + "]");
  }
  return out;
}

Json write_series(const MatrixXd& x) {
  Json rows = Json::array();
  for (Index i = 0; i < x.rows(); ++i) {
    Json row = Json::array();
    for (Index j = 0; j < x.cols(); ++j) row.push_back(x(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

DispatchCase parse_case(const std::string& text) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed case document: ") + e.what());
  }

  DispatchCase c;
  Network& net = c.network;
  net.n_nodes = as_count(require_key(root, "n_nodes", "case"), "n_nodes");
  c.horizon = as_count(require_key(root, "horizon", "case"), "horizon");

  const Json& lines = require_key(root, "lines", "case");
  if (!lines.is_array()) throw ParseError("lines must be an array");
  const Index m = static_cast<Index>(lines.size());
  net.susceptance.resize(m);
  net.f_max.resize(m);
  for (Index l = 0; l < m; ++l) {
    const std::string where = "lines[" + std::to_string(l) + "]";
    net.line_from.push_back(as_count(require_key(lines[l], "from", where), where + ".from") - 1);
    net.line_to.push_back(as_count(require_key(lines[l], "to", where), where + ".to") - 1);
    net.susceptance[l] = as_number(require_key(lines[l], "susceptance", where), where + ".susceptance");
    net.f_max[l] = as_number(require_key(lines[l], "f_max", where), where + ".f_max");
  }

  const Json& batteries = require_key(root, "batteries", "case");
  if (!batteries.is_array()) throw ParseError("batteries must be an array");
  const Index k = static_cast<Index>(batteries.size());
  net.p_max.resize(k);
  net.s_max.resize(k);
  net.s_init.resize(k);
  net.s_final.resize(k);
  for (Index b = 0; b < k; ++b) {
    const std::string where = "batteries[" + std::to_string(b) + "]";
    const Json& item = batteries[b];
    net.battery_node.push_back(as_count(require_key(item, "node", where), where + ".node") - 1);
    net.p_max[b] = as_number(require_key(item, "p_max", where), where + ".p_max");
    net.s_max[b] = as_number(require_key(item, "s_max", where), where + ".s_max");
    net.s_init[b] = as_number(require_key(item, "s_init", where), where + ".s_init");
    net.s_final[b] = as_number(require_key(item, "s_final", where), where + ".s_final");
  }

  c.cost = read_series(root, "cost");
  c.demand = read_series(root, "demand");
  c.g_max = read_series(root, "g_max");
  c.emissions_rate = read_series(root, "emissions_rate");

  require_valid(c);
  return c;
}

std::string serialize_case(const DispatchCase& c) {
  const Network& net = c.network;
  Json root;
  root["n_nodes"] = net.n_nodes;
  root["horizon"] = c.horizon;
  Json lines = Json::array();
  for (Index l = 0; l < net.n_lines(); ++l) {
    lines.push_back(Json{{"from", net.line_from[l] + 1},
                         {"to", net.line_to[l] + 1},
                         {"susceptance", net.susceptance[l]},
                         {"f_max", net.f_max[l]}});
  }
  root["lines"] = std::move(lines);
  Json batteries = Json::array();
  for (Index b = 0; b < net.n_batteries(); ++b) {
    batteries.push_back(Json{{"node", net.battery_node[b] + 1},
                             {"p_max", net.p_max[b]},
                             {"s_max", net.s_max[b]},
                             {"s_init", net.s_init[b]},
                             {"s_final", net.s_final[b]}});
  }
  root["batteries"] = std::move(batteries);
  root["cost"] = write_series(c.cost);
  root["demand"] = write_series(c.demand);
  root["g_max"] = write_series(c.g_max);
  root["emissions_rate"] = write_series(c.emissions_rate);
  return root.dump(2) + "\n";
}

DispatchCase load_case(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open case file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_case(buffer.str());
}

void save_case(const DispatchCase& dispatch_case, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write case file " + path.string());
  out << serialize_case(dispatch_case);
  if (!out) throw Error("failed writing case file " + path.string());
}

}  // namespace lmesens
