#include "diffnoise/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace diffnoise {

namespace {

std::string format_double(double v) {
  // Shortest representation that reads back to the same double.
  char buf[32];
  const auto end = std::to_chars(buf, buf + sizeof(buf), v).ptr;
  return std::string(buf, end);
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\"");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\"");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

bool parse_double(const std::string& cell, double& out) {
  if (cell.empty()) return false;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

bool is_index(const std::string& s) {
  return !s.empty() && s.find_first_not_of("0123456789") == std::string::npos;
}

}  // namespace

void write_csv(std::ostream& out, double h, const Matrix& values) {
  out << 't';
  for (Eigen::Index c = 0; c < values.cols(); ++c) out << ",y" << c + 1;
  out << '\n';
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    out << format_double(static_cast<double>(i) * h);
    for (Eigen::Index c = 0; c < values.cols(); ++c) out << ',' << format_double(values(i, c));
    out << '\n';
  }
}

void write_csv(const std::string& path, double h, const Matrix& values) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  write_csv(out, h, values);
  if (!out) throw Error("failed writing '" + path + "'");
}

ColumnSpec ColumnSpec::parse(const std::string& comma_list) {
  ColumnSpec spec;
  if (comma_list.empty()) return spec;
  for (const std::string& cell : split_line(comma_list)) {
    if (cell.empty()) throw InvalidArgument("empty entry in column list '" + comma_list + "'");
    spec.columns.push_back(cell);
  }
  return spec;
}

ObservationSeries read_csv(std::istream& in, double h, const ColumnSpec& spec) {
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw InvalidArgument("read_csv: step h must be positive and finite");
  }
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::vector<long> line_numbers;
  std::size_t width = 0;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells = split_line(line);
    std::vector<double> row(cells.size());
    std::size_t bad = cells.size();
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (!parse_double(cells[c], row[c])) {
        bad = c;
        break;
      }
    }
    if (rows.empty() && header.empty() && bad < cells.size()) {
      header = std::move(cells);
      width = header.size();
      continue;
    }
    if (bad < cells.size()) {
      throw InvalidArgument("read_csv: non-numeric cell '" + cells[bad] + "' at line " +
                            std::to_string(line_no) + ", column " + std::to_string(bad + 1));
    }
    if (width == 0) width = row.size();
    if (row.size() != width) {
      throw InvalidArgument("read_csv: line " + std::to_string(line_no) + " has " +
                            std::to_string(row.size()) + " columns, expected " +
                            std::to_string(width));
    }
    rows.push_back(std::move(row));
    line_numbers.push_back(line_no);
  }
  if (rows.size() < 2) {
    throw DegenerateDataError("read_csv: need at least 2 data rows, got " +
                              std::to_string(rows.size()));
  }

  std::vector<std::size_t> selected;
  if (spec.columns.empty()) {
    std::size_t first = 0;
    if (!header.empty() && width > 1 && (header[0] == "t" || header[0] == "time")) first = 1;
    for (std::size_t c = first; c < width; ++c) selected.push_back(c);
  } else {
    for (const std::string& name : spec.columns) {
      std::size_t index = width;
      if (is_index(name)) {
        index = std::stoul(name);
      } else {
        if (header.empty()) {
          throw InvalidArgument("read_csv: column '" + name + "' requested by name but the file "
                                "has no header row");
        }
        for (std::size_t c = 0; c < header.size(); ++c) {
          if (header[c] == name) {
            index = c;
            break;
          }
        }
      }
      if (index >= width) {
        throw InvalidArgument("read_csv: no column '" + name + "'");
      }
      selected.push_back(index);
    }
  }

  Matrix values(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(selected.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < selected.size(); ++c) {
      const double v = rows[i][selected[c]];
      if (!std::isfinite(v)) {
        throw InvalidArgument("read_csv: non-finite value at line " +
                              std::to_string(line_numbers[i]) + ", column " +
                              std::to_string(selected[c] + 1));
      }
      values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = v;
    }
  }
  return ObservationSeries(h, std::move(values));
}

ObservationSeries ingest_csv(const std::string& path, double h, const ColumnSpec& spec) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  return read_csv(in, h, spec);
}

// ---------------------------------------------------------------- JSON

Json to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Json to_json(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(to_json(Vector(m.row(r).transpose())));
  return out;
}

Json to_json(const Box& box) { return {{"lower", to_json(box.lower)}, {"upper", to_json(box.upper)}}; }

Json to_json(const SamplingScheme& s) {
  return {{"n", s.n},         {"h", s.h},           {"tau", s.tau},
          {"p", s.p},         {"k", s.k},           {"delta", s.delta},
          {"unused", s.unused()}, {"k_delta_sq", s.k_delta_sq()}};
}

Json to_json(const OptimizerReport& report) {
  Json starts = Json::array();
  for (const StartReport& s : report.starts) {
    starts.push_back({{"start", to_json(s.start)},
                      {"point", to_json(s.point)},
                      {"start_value", s.start_value},
                      {"value", s.value},
                      {"iterations", s.iterations},
                      {"restarts", s.restarts},
                      {"converged", s.converged}});
  }
  return {{"iterations", report.iterations},
          {"evaluations", report.evaluations},
          {"converged", report.converged},
          {"at_lower", report.at_lower},
          {"at_upper", report.at_upper},
          {"hit_boundary", report.hit_boundary()},
          {"starts", starts}};
}

Json to_json(const EstimationResult& result) {
  Json out = {{"scheme", to_json(result.scheme)},
              {"lambda_hat", to_json(result.lambda_hat)},
              {"theta_eps_hat", to_json(result.theta_eps_hat)},
              {"alpha_hat", to_json(result.alpha_hat)},
              {"beta_hat", to_json(result.beta_hat)},
              {"h1_value", result.h1_value},
              {"h2_value", result.h2_value},
              {"alpha_report", to_json(result.alpha_report)},
              {"beta_report", to_json(result.beta_report)}};
  if (result.cov) {
    out["cov"] = {{"labels", result.cov_labels},
                  {"order", "row-major"},
                  {"rates", {"sqrt(n)", "sqrt(k)", "sqrt(n*h)"}},
                  {"matrix", to_json(*result.cov)},
                  {"standard_errors", to_json(standard_errors(result))}};
  }
  return out;
}

Json to_json(const NoiseTestResult& r) {
  const double z_level = upper_critical_value(r.level);
  return {{"z", r.z},
          {"p_value", r.p_value},
          {"level", r.level},
          {"critical_value", z_level},
          {"reject", r.reject},
          {"n", r.scheme.n},
          {"p", r.scheme.p},
          {"k", r.scheme.k},
          {"tau", r.scheme.tau},
          {"numerator_full", r.numerator_full},
          {"numerator_halved", r.numerator_halved},
          {"normalizer", r.normalizer}};
}

Json to_json(const LgaResult& r) {
  return {{"alpha", to_json(r.alpha)},
          {"beta", to_json(r.beta)},
          {"value", r.value},
          {"profiled", r.profiled},
          {"report", to_json(r.report)}};
}

Vector vector_from_json(const Json& j, const std::string& what) {
  if (!j.is_array()) throw InvalidArgument(what + ": expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw InvalidArgument(what + ": entry " + std::to_string(i) + " is not a number");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

Matrix matrix_from_json(const Json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw InvalidArgument(what + ": expected an array of rows");
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const Vector row = vector_from_json(j[r], what + " row " + std::to_string(r));
    if (static_cast<std::size_t>(row.size()) != cols) {
      throw InvalidArgument(what + ": rows have different lengths");
    }
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

Box box_from_json(const Json& j, const std::string& what) {
  if (!j.is_object() || !j.contains("lower") || !j.contains("upper")) {
    throw InvalidArgument(what + ": expected {\"lower\": [...], \"upper\": [...]}");
  }
  return Box(vector_from_json(j["lower"], what + ".lower"),
             vector_from_json(j["upper"], what + ".upper"));
}

ModelSpec ModelConfig::model() const { return make_ou_model(d, alpha_box, beta_box); }

OuCoefficients ModelConfig::coefficients() const {
  if (!has_truth()) throw InvalidArgument("model config gives no true parameters");
  return ou_coefficients(d, alpha, beta);
}

ModelConfig model_config_from_json(const Json& j) {
  if (!j.is_object()) throw InvalidArgument("model: expected an object");
  ModelConfig c;
  c.family = j.value("family", std::string("ou"));
  if (c.family != "ou") {
    throw InvalidArgument("model: unknown family '" + c.family + "' (available: ou)");
  }
  c.d = j.value("d", 0);
  if (c.d < 1 && j.contains("diffusion_matrix")) {
    c.d = static_cast<int>(j["diffusion_matrix"].size());
  }
  if (c.d < 1) throw InvalidArgument("model: 'd' must be a positive integer");
  c.alpha_box = j.contains("alpha_box") ? box_from_json(j["alpha_box"], "model.alpha_box")
                                        : default_ou_alpha_box(c.d);
  c.beta_box = j.contains("beta_box") ? box_from_json(j["beta_box"], "model.beta_box")
                                      : default_ou_beta_box(c.d);

  if (j.contains("alpha")) c.alpha = vector_from_json(j["alpha"], "model.alpha");
  if (j.contains("beta")) c.beta = vector_from_json(j["beta"], "model.beta");
  if (j.contains("diffusion_matrix")) {
    c.alpha = ou_alpha(matrix_from_json(j["diffusion_matrix"], "model.diffusion_matrix"));
  }
  if (j.contains("drift_matrix")) {
    const Matrix b = matrix_from_json(j["drift_matrix"], "model.drift_matrix");
    const Vector intercept = j.contains("drift_intercept")
                                 ? vector_from_json(j["drift_intercept"], "model.drift_intercept")
                                 : Vector::Zero(c.d);
    c.beta = ou_beta(b, intercept);
  }
  if (c.alpha.size() > 0 && c.alpha.size() != ou_alpha_dim(c.d)) {
    throw InvalidArgument("model: alpha must have " + std::to_string(ou_alpha_dim(c.d)) + " entries");
  }
  if (c.beta.size() > 0 && c.beta.size() != ou_beta_dim(c.d)) {
    throw InvalidArgument("model: beta must have " + std::to_string(ou_beta_dim(c.d)) + " entries");
  }
  c.model().validate();
  return c;
}

Json to_json(const ModelConfig& c) {
  Json out = {{"family", c.family},
              {"d", c.d},
              {"alpha_box", to_json(c.alpha_box)},
              {"beta_box", to_json(c.beta_box)}};
  if (c.alpha.size() > 0) out["alpha"] = to_json(c.alpha);
  if (c.beta.size() > 0) out["beta"] = to_json(c.beta);
  return out;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  try {
    return Json::parse(in, nullptr, true, true);
  } catch (const Json::exception& e) {
    throw InvalidArgument("'" + path + "' is not valid JSON: " + e.what());
  }
}

}  // namespace diffnoise
