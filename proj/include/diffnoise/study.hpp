#pragma once

#include <optional>
#include <string>
#include <vector>

#include "diffnoise/io.hpp"

namespace diffnoise {

enum class SimulationBackend { exact_ou, euler };

/// One entry of the noise grid.
struct NoiseLevel {
  std::string label;
  Matrix lambda;
};

struct StudyConfig {
  ModelConfig model;
  Vector x0;
  long n = 100000;
  /// Step h; when not positive, h = n^(−h_exponent).
  double h = 0.0;
  double h_exponent = 0.7;
  std::vector<double> taus{1.8, 1.9, 2.0};
  std::vector<NoiseLevel> noise_levels;
  long replications = 100;
  std::uint64_t seed = 1;
  bool adaptive = true;
  bool lga = true;
  bool noise_test = true;
  std::vector<double> levels{0.05, 0.01, 0.001};
  SimulationBackend backend = SimulationBackend::exact_ou;
  EulerOptions euler;
  NoiseLaw noise_law = NoiseLaw::gaussian;
  int threads = 0;  // 0: hardware concurrency
  bool with_cov = false;
  EstimatorOptions estimator;

  double step() const;
  void validate() const;
};

StudyConfig study_config_from_json(const Json& j);
Json to_json(const StudyConfig& config);

/// Grid of Λ = scale·I_d; a zero scale is labelled "O".
std::vector<NoiseLevel> scaled_identity_levels(int d, const std::vector<double>& scales);

/// Raw outcome of one (replication, noise level, τ, estimator) cell. LGA
/// cells carry no τ because LGA does not use the block scheme.
struct ReplicationRecord {
  long replication = 0;
  int noise_index = 0;
  std::optional<double> tau;
  std::string estimator;  // "adaptive", "lga" or "test"
  bool ok = false;
  std::string error;
  Vector theta_eps;
  Vector alpha;
  Vector beta;
  double z = 0.0;
  double p_value = 0.0;
};

Json to_json(const ReplicationRecord& record);
ReplicationRecord replication_record_from_json(const Json& j);

struct CoordinateSummary {
  int noise_index = 0;
  std::optional<double> tau;
  std::string estimator;
  std::string parameter;
  double truth = 0.0;
  double mean = 0.0;
  double rmse = 0.0;
  long count = 0;
};

struct RejectionSummary {
  int noise_index = 0;
  double tau = 0.0;
  double level = 0.0;
  double rate = 0.0;  // fraction of successful tests with Zₙ > z_level
  long count = 0;
};

struct StudyReport {
  StudyConfig config;
  std::vector<ReplicationRecord> records;
  std::vector<CoordinateSummary> estimates;
  std::vector<RejectionSummary> rejections;
  long failures = 0;
  double wall_seconds = 0.0;
  double seconds_per_replication = 0.0;
};

/// Runs every replication; replication r draws the latent path from stream r
/// of one key and the noise from stream r of another, so results do not depend
/// on the thread count. Failures are recorded per cell and the study goes on.
StudyReport run_study(const StudyConfig& config);

/// Tables from raw records: mean, RMSE = sqrt(mean squared deviation from the
/// truth) and rejection rates. Fills everything but the runtime fields.
StudyReport summarize(const StudyConfig& config, std::vector<ReplicationRecord> records);

/// Report as JSON; `with_runtime` adds the wall-clock fields, which are the
/// only part that differs between identical runs.
Json to_json(const StudyReport& report, bool with_runtime = true);

/// Writes report.json, replications.jsonl, estimates.csv and rejections.csv.
void write_study_outputs(const StudyReport& report, const std::string& directory);

std::vector<ReplicationRecord> read_replications_jsonl(const std::string& path);

}  // namespace diffnoise
