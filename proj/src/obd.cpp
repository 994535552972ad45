#include "cael/obd.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace cael::obd {

namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, delim)) fields.push_back(field);
  if (!line.empty() && line.back() == delim) fields.emplace_back();
  return fields;
}

std::string strip(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& cell, long row, const std::string& col) {
  const std::string v = strip(cell);
  if (v.empty()) {
    throw ParseError("empty cell in column '" + col + "' at row " +
                     std::to_string(row));
  }
  char* end = nullptr;
  errno = 0;
  const double x = std::strtod(v.c_str(), &end);
  if (errno != 0 || end == v.c_str() || *end != '\0') {
    throw ParseError("non-numeric cell '" + v + "' in column '" + col +
                     "' at row " + std::to_string(row));
  }
  return x;
}

long parse_int(const std::string& cell, long row, const std::string& col) {
  const double x = parse_double(cell, row, col);
  const long i = static_cast<long>(x);
  if (static_cast<double>(i) != x) {
    throw ParseError("non-integer cell '" + strip(cell) + "' in column '" +
                     col + "' at row " + std::to_string(row));
  }
  return i;
}

}  // namespace

int ColumnMapping::encoded_dim() const {
  int d = 0;
  for (const ContextColumn& c : context_columns) d += c.width();
  return d;
}

void ColumnMapping::validate() const {
  if (context_columns.empty()) {
    throw SchemaError("mapping declares no context columns");
  }
  std::vector<std::string> names{action_column, reward_column,
                                 propensity_column};
  for (const ContextColumn& c : context_columns) names.push_back(c.name);
  std::sort(names.begin(), names.end());
  if (std::adjacent_find(names.begin(), names.end()) != names.end()) {
    throw SchemaError("mapping column names are not distinct");
  }
  for (const ContextColumn& c : context_columns) {
    if (c.categorical && c.levels.empty()) {
      throw SchemaError("categorical column '" + c.name +
                        "' declares no levels");
    }
  }
  if (context_dim && *context_dim != encoded_dim()) {
    throw SchemaError("declared context_dim " + std::to_string(*context_dim) +
                      " does not match encoded width " +
                      std::to_string(encoded_dim()));
  }
}

ColumnMapping ColumnMapping::from_json(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text, nullptr, false);
  if (j.is_discarded()) throw SchemaError("mapping is not valid JSON");
  ColumnMapping m;
  m.action_column = j.value("action_column", m.action_column);
  m.reward_column = j.value("reward_column", m.reward_column);
  m.propensity_column = j.value("propensity_column", m.propensity_column);
  if (j.contains("delimiter")) {
    const std::string d = j.at("delimiter").get<std::string>();
    if (d.size() != 1) throw SchemaError("delimiter must be one character");
    m.delimiter = d[0];
  }
  m.has_header = j.value("has_header", true);
  if (j.contains("num_actions")) m.num_actions = j.at("num_actions").get<int>();
  if (j.contains("context_dim")) m.context_dim = j.at("context_dim").get<int>();
  if (!j.contains("context_columns")) {
    throw SchemaError("mapping is missing context_columns");
  }
  for (const auto& cj : j.at("context_columns")) {
    ContextColumn c;
    if (cj.is_string()) {
      c.name = cj.get<std::string>();
    } else {
      c.name = cj.at("name").get<std::string>();
      c.categorical = cj.value("type", "numeric") == "categorical";
      if (c.categorical && cj.contains("levels")) {
        for (const auto& l : cj.at("levels")) {
          c.levels.push_back(l.get<std::string>());
        }
      }
    }
    m.context_columns.push_back(std::move(c));
  }
  m.validate();
  return m;
}

ColumnMapping ColumnMapping::from_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open mapping file: " + path);
  std::stringstream buf;
  buf << is.rdbuf();
  return from_json(buf.str());
}

std::string ColumnMapping::to_json() const {
  nlohmann::json j;
  j["action_column"] = action_column;
  j["reward_column"] = reward_column;
  j["propensity_column"] = propensity_column;
  j["delimiter"] = std::string(1, delimiter);
  j["has_header"] = has_header;
  if (num_actions) j["num_actions"] = *num_actions;
  if (context_dim) j["context_dim"] = *context_dim;
  j["context_columns"] = nlohmann::json::array();
  for (const ContextColumn& c : context_columns) {
    nlohmann::json cj;
    cj["name"] = c.name;
    cj["type"] = c.categorical ? "categorical" : "numeric";
    if (c.categorical) cj["levels"] = c.levels;
    j["context_columns"].push_back(std::move(cj));
  }
  return j.dump(2);
}

ColumnMapping default_obd_mapping() {
  ColumnMapping m;
  m.action_column = "item_id";
  m.reward_column = "click";
  m.propensity_column = "propensity_score";
  m.num_actions = 240;
  m.context_columns.push_back({"position", false, {}});
  for (int i = 0; i < 4; ++i) {
    // Vocabularies depend on the slice; callers fill them in.
    m.context_columns.push_back(
        {"user_feature_" + std::to_string(i), true, {}});
  }
  return m;
}

ContextVector encode_context(const std::vector<std::string>& raw_fields,
                             const ColumnMapping& mapping) {
  if (raw_fields.size() != mapping.context_columns.size()) {
    throw SchemaError("raw field count does not match mapping");
  }
  ContextVector x;
  x.reserve(static_cast<std::size_t>(mapping.encoded_dim()));
  for (std::size_t c = 0; c < raw_fields.size(); ++c) {
    const ContextColumn& col = mapping.context_columns[c];
    if (!col.categorical) {
      x.push_back(parse_double(raw_fields[c], -1, col.name));
      continue;
    }
    const std::string v = strip(raw_fields[c]);
    std::size_t block = x.size();
    x.resize(block + col.levels.size(), 0.0);
    for (std::size_t l = 0; l < col.levels.size(); ++l) {
      if (col.levels[l] == v) {
        x[block + l] = 1.0;
        break;
      }
    }
    // Unknown level: block stays all zero by design of the encoding.
  }
  if (mapping.context_dim &&
      static_cast<int>(x.size()) != *mapping.context_dim) {
    throw SchemaError("encoded context length " + std::to_string(x.size()) +
                      " does not match declared context_dim");
  }
  return x;
}

Dataset load_csv(const std::string& path, const ColumnMapping& mapping,
                 std::optional<long> max_rows) {
  mapping.validate();
  std::ifstream is(path);
  if (!is) throw IoError("cannot open data file: " + path);

  std::string line;
  std::vector<int> context_idx(mapping.context_columns.size(), -1);
  int action_idx = -1, reward_idx = -1, propensity_idx = -1;

  if (mapping.has_header) {
    if (!std::getline(is, line)) throw DataError("file is empty: " + path);
    const std::vector<std::string> header = split_line(line, mapping.delimiter);
    std::unordered_map<std::string, int> pos;
    for (std::size_t i = 0; i < header.size(); ++i) {
      pos[strip(header[i])] = static_cast<int>(i);
    }
    auto find = [&](const std::string& name) {
      auto it = pos.find(name);
      if (it == pos.end()) {
        throw SchemaError("missing column '" + name + "' in " + path);
      }
      return it->second;
    };
    action_idx = find(mapping.action_column);
    reward_idx = find(mapping.reward_column);
    propensity_idx = find(mapping.propensity_column);
    for (std::size_t c = 0; c < mapping.context_columns.size(); ++c) {
      context_idx[c] = find(mapping.context_columns[c].name);
    }
  } else {
    // Positional layout: contexts first, then action, reward, propensity.
    for (std::size_t c = 0; c < mapping.context_columns.size(); ++c) {
      context_idx[c] = static_cast<int>(c);
    }
    action_idx = static_cast<int>(mapping.context_columns.size());
    reward_idx = action_idx + 1;
    propensity_idx = action_idx + 2;
  }

  Dataset data;
  data.context_dim = mapping.encoded_dim();
  long row = mapping.has_header ? 1 : 0;
  int max_action = -1;
  std::vector<std::string> raw(mapping.context_columns.size());
  while (std::getline(is, line)) {
    ++row;
    if (strip(line).empty()) continue;
    if (max_rows && static_cast<long>(data.samples.size()) >= *max_rows) break;
    const std::vector<std::string> fields = split_line(line, mapping.delimiter);
    const int needed = std::max(
        {action_idx, reward_idx, propensity_idx,
         *std::max_element(context_idx.begin(), context_idx.end())});
    if (static_cast<int>(fields.size()) <= needed) {
      throw ParseError("row " + std::to_string(row) + " has " +
                       std::to_string(fields.size()) + " fields, need " +
                       std::to_string(needed + 1));
    }
    LoggedSample s;
    const long action =
        parse_int(fields[static_cast<std::size_t>(action_idx)], row,
                  mapping.action_column);
    if (action < 0) {
      throw DataError("negative action id at row " + std::to_string(row));
    }
    s.action = static_cast<int>(action);
    max_action = std::max(max_action, s.action);
    s.reward = parse_double(fields[static_cast<std::size_t>(reward_idx)], row,
                            mapping.reward_column);
    s.behavior_propensity =
        parse_double(fields[static_cast<std::size_t>(propensity_idx)], row,
                     mapping.propensity_column);
    if (!(s.behavior_propensity > 0.0)) {
      throw DataError("propensity <= 0 at row " + std::to_string(row));
    }
    for (std::size_t c = 0; c < context_idx.size(); ++c) {
      raw[c] = fields[static_cast<std::size_t>(context_idx[c])];
    }
    s.context = encode_context(raw, mapping);
    data.samples.push_back(std::move(s));
  }
  if (data.samples.empty()) {
    throw DataError("no data rows in " + path);
  }
  data.num_actions = mapping.num_actions ? *mapping.num_actions
                                         : max_action + 1;
  if (max_action >= data.num_actions) {
    throw DataError("action id " + std::to_string(max_action) +
                    " exceeds declared num_actions " +
                    std::to_string(data.num_actions));
  }
  data.validate();
  return data;
}

void save_csv(const Dataset& data, const std::string& path) {
  data.validate();
  std::ofstream os(path);
  if (!os) throw IoError("cannot open file for writing: " + path);
  for (int j = 0; j < data.context_dim; ++j) {
    os << 'x' << j << ',';
  }
  os << "action,reward,propensity\n";
  char buf[32];
  auto fmt = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (const LoggedSample& s : data.samples) {
    for (double v : s.context) os << fmt(v) << ',';
    os << s.action << ',' << fmt(s.reward) << ','
       << fmt(s.behavior_propensity) << '\n';
  }
  if (!os) throw IoError("failed writing " + path);
}

ColumnMapping default_numeric_mapping(int context_dim) {
  if (context_dim < 1) throw InvalidArgument("context_dim must be positive");
  ColumnMapping m;
  m.action_column = "action";
  m.reward_column = "reward";
  m.propensity_column = "propensity";
  for (int j = 0; j < context_dim; ++j) {
    m.context_columns.push_back({"x" + std::to_string(j), false, {}});
  }
  return m;
}

estimators::ActionProbs load_action_probs_csv(const std::string& path, int K,
                                              std::optional<long> max_rows) {
  if (K < 1) throw InvalidArgument("K must be positive");
  std::ifstream is(path);
  if (!is) throw IoError("cannot open target probability file: " + path);
  std::string line;
  if (!std::getline(is, line)) throw DataError("file is empty: " + path);
  // A header is optional; detect it by trying to parse the first cell.
  bool first_is_header = false;
  {
    const std::vector<std::string> fields = split_line(line, ',');
    if (!fields.empty()) {
      char* end = nullptr;
      const std::string v = strip(fields[0]);
      std::strtod(v.c_str(), &end);
      first_is_header = end == v.c_str() || *end != '\0';
    }
  }
  estimators::ActionProbs probs;
  probs.K = K;
  long row = 0;
  auto take_row = [&](const std::string& text, long rownum) {
    const std::vector<std::string> fields = split_line(text, ',');
    if (static_cast<int>(fields.size()) != K) {
      throw SchemaError("target probability row " + std::to_string(rownum) +
                        " has " + std::to_string(fields.size()) +
                        " columns, expected " + std::to_string(K));
    }
    std::vector<double> p(static_cast<std::size_t>(K));
    for (int a = 0; a < K; ++a) {
      p[static_cast<std::size_t>(a)] =
          parse_double(fields[static_cast<std::size_t>(a)], rownum, "prob");
    }
    check_simplex(p);
    probs.p.insert(probs.p.end(), p.begin(), p.end());
    ++probs.n;
  };
  if (!first_is_header) {
    ++row;
    take_row(line, row);
  }
  while (std::getline(is, line)) {
    ++row;
    if (strip(line).empty()) continue;
    if (max_rows && probs.n >= *max_rows) break;
    take_row(line, row);
  }
  if (probs.n == 0) throw DataError("no probability rows in " + path);
  return probs;
}

}  // namespace cael::obd
