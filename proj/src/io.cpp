// Apache License, Version 2.0, refer to LICENSE.txt

#include "efdmp/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <system_error>

#include <fmt/format.h>

#include "efdmp/error.hpp"

namespace efdmp {

using nlohmann::json;

std::string format_double(double value) { return fmt::format("{}", value); }

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char ch = line[k];
    if (quoted) {
      if (ch == '"') {
        if (k + 1 < line.size() && line[k + 1] == '"') {
          current.push_back('"');
          ++k;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else if (ch != '\r') {
      current.push_back(ch);
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

std::optional<double> parse_number(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty()) return std::nullopt;
  double value = 0.0;
  const char* begin = t.data();
  const char* end = t.data() + t.size();
  if (*begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

std::string quote_if_needed(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

struct PendingUnit {
  std::string id;
  struct Row {
    double time;
    double value;
    std::size_t line;
  };
  std::vector<Row> rows;
  std::optional<double> volume;
};

}  // namespace

FunctionalDataset read_dataset_csv(std::istream& in, const std::string& source) {
  const auto fail = [&](std::size_t line, const std::string& what) {
    throw Error(ErrorKind::Parse, fmt::format("{}:{}: {}", source, line, what));
  };

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) fail(1, "missing header");
  ++line_no;
  const std::vector<std::string> header = split_csv_line(line);
  std::map<std::string, std::size_t> column;
  for (std::size_t k = 0; k < header.size(); ++k) column[trim(header[k])] = k;
  for (const char* required : {"unit_id", "time", "value"}) {
    if (!column.count(required)) fail(1, fmt::format("header lacks column '{}'", required));
  }
  const std::size_t id_col = column["unit_id"];
  const std::size_t time_col = column["time"];
  const std::size_t value_col = column["value"];
  const std::optional<std::size_t> volume_col =
      column.count("volume") ? std::optional<std::size_t>(column["volume"]) : std::nullopt;

  std::vector<PendingUnit> pending;
  std::map<std::string, std::size_t> index;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty() || trim(line) == "\r") continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      fail(line_no, fmt::format("expected {} fields, found {}", header.size(), fields.size()));
    }
    const std::string id = trim(fields[id_col]);
    if (id.empty()) fail(line_no, "empty unit_id");
    const auto time = parse_number(fields[time_col]);
    if (!time) fail(line_no, fmt::format("invalid time '{}'", fields[time_col]));
    const auto value = parse_number(fields[value_col]);
    if (!value) fail(line_no, fmt::format("invalid value '{}'", fields[value_col]));

    auto [it, inserted] = index.try_emplace(id, pending.size());
    if (inserted) pending.push_back(PendingUnit{id, {}, std::nullopt});
    PendingUnit& unit = pending[it->second];
    unit.rows.push_back({*time, *value, line_no});
    if (volume_col && !trim(fields[*volume_col]).empty()) {
      const auto volume = parse_number(fields[*volume_col]);
      if (!volume || *volume < 0.0) fail(line_no, fmt::format("invalid volume '{}'", fields[*volume_col]));
      unit.volume = unit.volume.value_or(0.0) + *volume;
    }
  }
  if (pending.empty()) fail(line_no, "no observations");

  std::vector<Unit> units;
  units.reserve(pending.size());
  for (PendingUnit& p : pending) {
    std::stable_sort(p.rows.begin(), p.rows.end(),
                     [](const PendingUnit::Row& a, const PendingUnit::Row& b) { return a.time < b.time; });
    Unit u;
    u.id = p.id;
    u.volume = p.volume;
    for (std::size_t s = 0; s < p.rows.size(); ++s) {
      if (s > 0 && p.rows[s].time == p.rows[s - 1].time) {
        fail(p.rows[s].line, fmt::format("unit '{}' repeats time {} (also on line {})", p.id,
                                         format_double(p.rows[s].time), p.rows[s - 1].line));
      }
      u.grid.push_back(p.rows[s].time);
      u.values.push_back(p.rows[s].value);
    }
    units.push_back(std::move(u));
  }
  try {
    return FunctionalDataset(std::move(units));
  } catch (const Error& e) {
    throw Error(e.kind(), source + ": " + e.detail());
  }
}

FunctionalDataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, fmt::format("cannot open data file '{}'", path.string()));
  return read_dataset_csv(in, path.string());
}

void write_dataset_csv(std::ostream& out, const FunctionalDataset& data) {
  const bool volumes = std::any_of(data.units().begin(), data.units().end(),
                                   [](const Unit& u) { return u.volume.has_value(); });
  out << (volumes ? "unit_id,time,value,volume\n" : "unit_id,time,value\n");
  for (const Unit& u : data.units()) {
    const std::string id = quote_if_needed(u.id);
    for (std::size_t s = 0; s < u.grid.size(); ++s) {
      out << id << ',' << format_double(u.grid[s]) << ',' << format_double(u.values[s]);
      if (volumes) {
        out << ',';
        if (s == 0 && u.volume) out << format_double(*u.volume);
      }
      out << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Config documents

namespace {

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorKind::Parse, what); }

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) config_error(where + " must be an object");
  for (const auto& item : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return item.key() == k; })) {
      config_error(fmt::format("{}: unknown key '{}'", where, item.key()));
    }
  }
}

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) config_error(fmt::format("{}: missing key '{}'", where, key));
  return *it;
}

double number(const json& value, const std::string& where) {
  if (!value.is_number()) config_error(where + " must be a number");
  return value.get<double>();
}

int integer(const json& value, const std::string& where) {
  if (!value.is_number_integer()) config_error(where + " must be an integer");
  return value.get<int>();
}

std::vector<double> number_list(const json& value, const std::string& where) {
  if (!value.is_array()) config_error(where + " must be an array");
  std::vector<double> out;
  for (std::size_t k = 0; k < value.size(); ++k) out.push_back(number(value[k], fmt::format("{}[{}]", where, k)));
  return out;
}

json term_to_json(const BasisTerm& term) {
  if (std::holds_alternative<Constant>(term)) return {{"kind", "constant"}};
  if (const auto* p = std::get_if<Power>(&term)) return {{"kind", "power"}, {"exponent", p->exponent}};
  if (const auto* c = std::get_if<Cosine>(&term)) return {{"kind", "cosine"}, {"angular_rate", c->angular_rate}};
  if (const auto* s = std::get_if<Sine>(&term)) return {{"kind", "sine"}, {"angular_rate", s->angular_rate}};
  const auto& b = std::get<BSplineBlock>(term);
  return {{"kind", "bspline"},
          {"degree", b.degree},
          {"interior_knots", b.interior_knots},
          {"boundary", {b.lower, b.upper}},
          {"count", b.count}};
}

BasisTerm term_from_json(const json& doc, const std::string& where) {
  if (!doc.is_object()) config_error(where + " must be an object");
  const json& kind_value = require(doc, "kind", where);
  if (!kind_value.is_string()) config_error(where + ".kind must be a string");
  const std::string kind = kind_value.get<std::string>();
  if (kind == "constant") {
    check_keys(doc, {"kind"}, where);
    return Constant{};
  }
  if (kind == "power") {
    check_keys(doc, {"kind", "exponent"}, where);
    return Power{integer(require(doc, "exponent", where), where + ".exponent")};
  }
  if (kind == "cosine" || kind == "sine") {
    check_keys(doc, {"kind", "angular_rate"}, where);
    const double rate = number(require(doc, "angular_rate", where), where + ".angular_rate");
    if (kind == "cosine") return Cosine{rate};
    return Sine{rate};
  }
  if (kind == "bspline") {
    check_keys(doc, {"kind", "degree", "interior_knots", "boundary", "count"}, where);
    BSplineBlock b;
    b.degree = integer(require(doc, "degree", where), where + ".degree");
    if (doc.contains("interior_knots")) b.interior_knots = number_list(doc["interior_knots"], where + ".interior_knots");
    const std::vector<double> boundary = number_list(require(doc, "boundary", where), where + ".boundary");
    if (boundary.size() != 2) config_error(where + ".boundary must have two entries");
    b.lower = boundary[0];
    b.upper = boundary[1];
    b.count = doc.contains("count") ? integer(doc["count"], where + ".count")
                                    : static_cast<int>(b.interior_knots.size()) + b.degree + 1;
    return b;
  }
  config_error(fmt::format("{}: unknown basis kind '{}'", where, kind));
}

Eigen::MatrixXd matrix_from_json(const json& value, Eigen::Index dim, const std::string& where) {
  if (value.is_number()) {
    return Eigen::MatrixXd::Identity(dim, dim) * value.get<double>();
  }
  if (!value.is_array()) config_error(where + " must be a number or an array of rows");
  const auto rows = static_cast<Eigen::Index>(value.size());
  Eigen::MatrixXd m(rows, rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const std::vector<double> row = number_list(value[r], fmt::format("{}[{}]", where, r));
    if (static_cast<Eigen::Index>(row.size()) != rows) {
      throw Error(ErrorKind::DimensionMismatch, fmt::format("{} row {} has {} entries, expected {}", where, r,
                                                            row.size(), rows));
    }
    for (Eigen::Index c = 0; c < rows; ++c) m(r, c) = row[c];
  }
  return m;
}

}  // namespace

json basis_to_json(const BasisSpec& spec) {
  json terms = json::array();
  for (const BasisTerm& term : spec.terms) terms.push_back(term_to_json(term));
  return terms;
}

BasisSpec basis_from_json(const json& doc) {
  if (!doc.is_array()) config_error("basis must be an array of terms");
  BasisSpec spec;
  for (std::size_t k = 0; k < doc.size(); ++k) spec.terms.push_back(term_from_json(doc[k], fmt::format("basis[{}]", k)));
  return spec;
}

json config_to_json(const ModelConfig& cfg) {
  json classes = json::array();
  for (const ClassConfig& cls : cfg.classes) {
    json cov = json::array();
    for (Eigen::Index r = 0; r < cls.prior_cov.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < cls.prior_cov.cols(); ++c) row.push_back(cls.prior_cov(r, c));
      cov.push_back(std::move(row));
    }
    classes.push_back({{"alpha", cls.alpha},
                       {"c", cls.c},
                       {"h_max", cls.h_max},
                       {"basis", basis_to_json(cls.basis)},
                       {"prior_mean", std::vector<double>(cls.prior_mean.begin(), cls.prior_mean.end())},
                       {"prior_cov", std::move(cov)}});
  }
  json doc = {{"classes", std::move(classes)}, {"a_sigma", cfg.a_sigma}, {"b_sigma", cfg.b_sigma}};
  if (cfg.noise_precision) doc["noise_precision"] = *cfg.noise_precision;
  return doc;
}

ModelConfig config_from_json(const json& doc) {
  check_keys(doc, {"classes", "a_sigma", "b_sigma", "noise_precision", "description"}, "config");
  ModelConfig cfg;
  cfg.a_sigma = number(require(doc, "a_sigma", "config"), "a_sigma");
  cfg.b_sigma = number(require(doc, "b_sigma", "config"), "b_sigma");
  if (doc.contains("noise_precision")) cfg.noise_precision = number(doc["noise_precision"], "noise_precision");
  const json& classes = require(doc, "classes", "config");
  if (!classes.is_array()) config_error("classes must be an array");
  for (std::size_t l = 0; l < classes.size(); ++l) {
    const std::string where = fmt::format("classes[{}]", l);
    const json& entry = classes[l];
    check_keys(entry, {"alpha", "c", "h_max", "basis", "prior_mean", "prior_cov", "name"}, where);
    ClassConfig cls;
    cls.alpha = number(require(entry, "alpha", where), where + ".alpha");
    cls.c = number(require(entry, "c", where), where + ".c");
    cls.h_max = integer(require(entry, "h_max", where), where + ".h_max");
    cls.basis = basis_from_json(require(entry, "basis", where));
    const auto dim = static_cast<Eigen::Index>(cls.basis.dimension());
    const json& mean = require(entry, "prior_mean", where);
    if (mean.is_number()) {
      cls.prior_mean = Eigen::VectorXd::Constant(dim, mean.get<double>());
    } else {
      const std::vector<double> values = number_list(mean, where + ".prior_mean");
      cls.prior_mean = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
    }
    cls.prior_cov = matrix_from_json(require(entry, "prior_cov", where), dim, where + ".prior_cov");
    cfg.classes.push_back(std::move(cls));
  }
  return cfg;
}

ModelConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, fmt::format("cannot open config file '{}'", path.string()));
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, fmt::format("{}: {}", path.string(), e.what()));
  }
  try {
    return config_from_json(doc);
  } catch (const Error& e) {
    throw Error(e.kind(), fmt::format("{}: {}", path.string(), e.detail()));
  }
}

void save_config(const std::filesystem::path& path, const ModelConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, fmt::format("cannot write config file '{}'", path.string()));
  out << config_to_json(cfg).dump(2) << '\n';
}

void write_labels_csv(std::ostream& out, const LabelTable& table) {
  if (table.unit_ids.size() != table.labels.size()) {
    throw Error(ErrorKind::LengthMismatch, "label table ids and labels differ in length");
  }
  out << "unit_id,label\n";
  for (std::size_t i = 0; i < table.labels.size(); ++i) {
    out << quote_if_needed(table.unit_ids[i]) << ',' << table.labels[i] << '\n';
  }
}

LabelTable read_labels_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, fmt::format("cannot open labels file '{}'", path.string()));
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw Error(ErrorKind::Parse, path.string() + ":1: missing header");
  const auto header = split_csv_line(line);
  if (header.size() != 2 || trim(header[0]) != "unit_id" || trim(header[1]) != "label") {
    throw Error(ErrorKind::Parse, path.string() + ":1: expected header 'unit_id,label'");
  }
  LabelTable table;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    int label = 0;
    const std::string text = fields.size() == 2 ? trim(fields[1]) : std::string();
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), label);
    if (fields.size() != 2 || text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
      throw Error(ErrorKind::Parse, fmt::format("{}:{}: expected 'unit_id,integer label'", path.string(), line_no));
    }
    table.unit_ids.push_back(trim(fields[0]));
    table.labels.push_back(label);
  }
  return table;
}

}  // namespace efdmp
