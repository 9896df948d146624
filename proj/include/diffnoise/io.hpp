#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "diffnoise/estimators.hpp"
#include "diffnoise/noise_test.hpp"
#include "diffnoise/ou.hpp"

namespace diffnoise {

using Json = nlohmann::json;

/// Writes `t,y1,...,yd` with one row per grid point, 17 significant digits.
void write_csv(std::ostream& out, double h, const Matrix& values);
void write_csv(const std::string& path, double h, const Matrix& values);

/// Which CSV columns become observation components. Entries are 0-based
/// column indices ("0", "2") or header names ("u", "v"); names require a
/// header row. Empty: every column except a leading `t`/`time` column.
struct ColumnSpec {
  std::vector<std::string> columns;

  static ColumnSpec parse(const std::string& comma_list);
};

/// Reads equally spaced numeric rows. A first row containing any non-numeric
/// cell is treated as a header. Errors report 1-based line and column.
ObservationSeries read_csv(std::istream& in, double h, const ColumnSpec& spec = {});
ObservationSeries ingest_csv(const std::string& path, double h, const ColumnSpec& spec = {});

Json to_json(const Vector& v);
Json to_json(const Matrix& m);  // array of rows
Json to_json(const Box& box);
Json to_json(const SamplingScheme& scheme);
Json to_json(const OptimizerReport& report);
Json to_json(const EstimationResult& result);
Json to_json(const NoiseTestResult& result);
Json to_json(const LgaResult& result);

Vector vector_from_json(const Json& j, const std::string& what);
Matrix matrix_from_json(const Json& j, const std::string& what);
Box box_from_json(const Json& j, const std::string& what);

/// Model block of a config file. Only the built-in `"family": "ou"` is
/// available from config; the true parameters are optional and may be given
/// either as coefficient matrices or as (α, β) vectors:
///
///   {"family": "ou", "d": 2,
///    "diffusion_matrix": [[1, 0.1], [0.1, 1]],
///    "drift_matrix": [[-1, -0.1], [-0.1, -1]], "drift_intercept": [1, 1],
///    "alpha_box": {"lower": [...], "upper": [...]}, "beta_box": {...}}
struct ModelConfig {
  std::string family = "ou";
  int d = 1;
  Box alpha_box;
  Box beta_box;
  Vector alpha;  // empty when not given
  Vector beta;

  ModelSpec model() const;
  bool has_truth() const { return alpha.size() > 0 && beta.size() > 0; }
  OuCoefficients coefficients() const;
};

ModelConfig model_config_from_json(const Json& j);
Json to_json(const ModelConfig& config);

Json read_json_file(const std::string& path);

}  // namespace diffnoise
