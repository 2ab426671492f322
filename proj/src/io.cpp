#include "mixrates/io.hpp"

#include "mixrates/error.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace mixrates::io {

namespace {

using nlohmann::json;

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& text, double& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  if (t == "nan" || t == "NaN") {
    out = std::numeric_limits<double>::quiet_NaN();
    return true;
  }
  const char* first = t.data();
  const char* last = t.data() + t.size();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last;
}

template <typename Int>
Int parse_int(const std::string& text, const char* field) {
  const std::string t = trim(text);
  Int value{};
  const auto res = std::from_chars(t.data(), t.data() + t.size(), value);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw Error(ErrorKind::ParseError, std::string("field ") + field + ": '" + text + "' is not an integer");
  }
  return value;
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Vector vector_from(const json& j, const char* what) {
  if (!j.is_array() || j.empty()) throw Error(ErrorKind::ParseError, std::string(what) + " must be a nonempty array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw Error(ErrorKind::ParseError, std::string(what) + " entries must be numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

Matrix matrix_from(const json& j, const char* what) {
  if (!j.is_array() || j.empty()) throw Error(ErrorKind::ParseError, std::string(what) + " must be a nonempty array");
  const auto rows = static_cast<Eigen::Index>(j.size());
  Matrix m(rows, rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Vector row = vector_from(j[static_cast<std::size_t>(r)], what);
    if (row.size() != rows) throw Error(ErrorKind::ParseError, std::string(what) + " must be square");
    m.row(r) = row.transpose();
  }
  return m;
}

json measure_json(const MixingMeasure& g) {
  json doc;
  doc["weights"] = g.weights();
  json means = json::array();
  for (const Atom& a : g.atoms()) means.push_back(std::vector<double>(a.mean.data(), a.mean.data() + a.mean.size()));
  doc["means"] = std::move(means);
  if (g.has_atom_covariances()) {
    json covs = json::array();
    for (const Atom& a : g.atoms()) covs.push_back(matrix_json(*a.covariance));
    doc["covariances"] = std::move(covs);
  }
  if (g.shared_covariance()) doc["shared_covariance"] = matrix_json(*g.shared_covariance());
  return doc;
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

void write_records_csv(std::ostream& out, std::span<const ExperimentRecord> records) {
  out << kRecordHeader << '\n';
  for (const ExperimentRecord& r : records) {
    out << r.model << ',' << r.k << ',' << r.k0 << ',' << r.n << ',' << r.replicate << ',' << r.seed << ','
        << r.loss_name << ',' << format_double(r.loss_value) << ',' << r.em_iters << ','
        << (r.converged ? "true" : "false") << ',' << format_double(r.wall_ms) << '\n';
  }
}

std::vector<ExperimentRecord> read_records_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != kRecordHeader) {
    throw Error(ErrorKind::ParseError, std::string("records CSV must start with the header ") + kRecordHeader);
  }
  std::vector<ExperimentRecord> records;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> f = split(trim(line), ',');
    if (f.size() != 11) {
      throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": expected 11 fields");
    }
    ExperimentRecord r;
    r.model = trim(f[0]);
    r.k = parse_int<int>(f[1], "k");
    r.k0 = parse_int<int>(f[2], "k0");
    r.n = parse_int<int>(f[3], "n");
    r.replicate = parse_int<int>(f[4], "replicate");
    r.seed = parse_int<std::uint64_t>(f[5], "seed");
    r.loss_name = trim(f[6]);
    if (!parse_double(f[7], r.loss_value)) {
      throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": bad loss_value");
    }
    r.em_iters = parse_int<int>(f[8], "em_iters");
    const std::string conv = trim(f[9]);
    if (conv != "true" && conv != "false") {
      throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": converged must be true or false");
    }
    r.converged = conv == "true";
    if (!parse_double(f[10], r.wall_ms)) {
      throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": bad wall_ms");
    }
    records.push_back(std::move(r));
  }
  return records;
}

DataMatrix read_data_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split(trim(line), ',');
    std::vector<double> row;
    bool numeric = true;
    for (const std::string& f : fields) {
      double v;
      if (!parse_double(f, v) || !std::isfinite(v)) {
        numeric = false;
        break;
      }
      row.push_back(v);
    }
    if (!numeric) {
      if (rows.empty() && width == 0) {  // header
        width = fields.size();
        continue;
      }
      throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + " is not numeric");
    }
    if (width == 0) width = row.size();
    if (row.size() != width) {
      throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + " has " + std::to_string(row.size()) +
                                             " fields, expected " + std::to_string(width));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorKind::ParseError, "data file has no observations");
  DataMatrix data(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < width; ++j) data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return data;
}

void write_data_csv(std::ostream& out, const DataMatrix& data) {
  for (Eigen::Index c = 0; c < data.cols(); ++c) out << (c ? "," : "") << 'x' << (c + 1);
  out << '\n';
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    for (Eigen::Index c = 0; c < data.cols(); ++c) out << (c ? "," : "") << format_double(data(r, c));
    out << '\n';
  }
}

std::string measure_to_json(const MixingMeasure& g, int indent) { return measure_json(g).dump(indent) + "\n"; }

MixingMeasure measure_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("weights") || !doc.contains("means")) {
    throw Error(ErrorKind::ParseError, "measure document needs 'weights' and 'means'");
  }
  const Vector w = vector_from(doc["weights"], "weights");
  const json& means = doc["means"];
  if (!means.is_array() || means.size() != static_cast<std::size_t>(w.size())) {
    throw Error(ErrorKind::ParseError, "'means' must have one entry per weight");
  }
  const json* covs = doc.contains("covariances") ? &doc["covariances"] : nullptr;
  if (covs && (!covs->is_array() || covs->size() != means.size())) {
    throw Error(ErrorKind::ParseError, "'covariances' must have one entry per weight");
  }
  std::vector<Atom> atoms;
  for (std::size_t j = 0; j < means.size(); ++j) {
    Vector mu = vector_from(means[j], "means");
    if (covs) {
      atoms.emplace_back(std::move(mu), matrix_from((*covs)[j], "covariances"));
    } else {
      atoms.emplace_back(std::move(mu));
    }
  }
  std::optional<Matrix> shared;
  if (doc.contains("shared_covariance")) shared = matrix_from(doc["shared_covariance"], "shared_covariance");
  return MixingMeasure(std::move(atoms), std::vector<double>(w.data(), w.data() + w.size()), std::move(shared));
}

std::string fit_result_to_json(const FitResult& result) {
  json doc = measure_json(result.measure);
  doc["iterations"] = result.iterations;
  doc["converged"] = result.converged;
  doc["objective"] = result.objective_trace.empty() ? 0.0 : result.objective_trace.back();
  return doc.dump(2) + "\n";
}

std::string slope_summary_json(const SlopeFit& fit) {
  json doc;
  doc["slope"] = fit.slope;
  doc["intercept"] = fit.intercept;
  doc["slope_se"] = fit.slope_se;
  doc["excluded"] = fit.excluded;
  json per_n = json::array();
  for (const SampleSizeStats& s : fit.per_n) {
    per_n.push_back({{"n", s.n}, {"count", s.count}, {"mean", s.mean}, {"sd", s.sd}, {"error_bar", 2.0 * s.sd}});
  }
  doc["per_n"] = std::move(per_n);
  return doc.dump(2) + "\n";
}

std::string slope_summary_text(const SlopeFit& fit) {
  std::ostringstream out;
  out << "slope " << format_double(fit.slope) << '\n'
      << "intercept " << format_double(fit.intercept) << '\n'
      << "slope_se " << format_double(fit.slope_se) << '\n'
      << "excluded " << fit.excluded << '\n';
  for (const SampleSizeStats& s : fit.per_n) {
    out << "n " << s.n << " count " << s.count << " mean " << format_double(s.mean) << " sd " << format_double(s.sd)
        << '\n';
  }
  return out.str();
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::ParseError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + path.string());
  out << contents;
}

}  // namespace mixrates::io
