// Command-line front end: simulate, estimate, test, study.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "diffnoise/study.hpp"

namespace {

using namespace diffnoise;

constexpr int kExitFailure = 1;
constexpr int kExitDegenerate = 2;
constexpr int kExitNonConvergence = 3;

/// Accepts either a bare model block or a document with a "model" member.
ModelConfig load_model(const std::string& path, int d) {
  if (path.empty()) {
    ModelConfig c;
    c.d = d;
    c.alpha_box = default_ou_alpha_box(d);
    c.beta_box = default_ou_beta_box(d);
    return c;
  }
  const Json j = read_json_file(path);
  ModelConfig c = model_config_from_json(j.contains("model") ? j["model"] : j);
  if (c.d != d) {
    throw InvalidArgument("model in '" + path + "' is " + std::to_string(c.d) +
                          "-dimensional but the data have " + std::to_string(d) + " columns");
  }
  return c;
}

void emit(const Json& j, const std::string& out_path) {
  if (out_path.empty() || out_path == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw Error("cannot open '" + out_path + "' for writing");
  out << j.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive estimation for diffusions observed with noise"};
  app.require_subcommand(1);

  std::string config_path;
  std::string input_path;
  std::string out_path;
  std::string columns;
  std::string latent_out;
  double h = 0.0;
  double tau = 1.9;
  double level = 0.05;
  std::uint64_t seed = 0;
  long replication = 0;
  int threads = 0;
  bool with_cov = false;
  bool lga = false;

  auto* simulate = app.add_subcommand("simulate", "Simulate a noisy OU path and write CSV");
  simulate->add_option("--config", config_path, "Study config (model, x0, n, h, first noise level)")
      ->required()
      ->check(CLI::ExistingFile);
  simulate->add_option("--seed", seed, "Master seed (default: config seed)");
  simulate->add_option("--replication", replication, "Replication stream index")
      ->check(CLI::NonNegativeNumber);
  simulate->add_option("--out", out_path, "Observation CSV (default stdout)");
  simulate->add_option("--latent-out", latent_out, "Also write the noise-free path");

  auto* estimate = app.add_subcommand("estimate", "Estimate (Λ, α, β) from a CSV series");
  auto* test = app.add_subcommand("test", "Test for observation noise on a CSV series");
  for (CLI::App* sub : {estimate, test}) {
    sub->set_help_flag("--help", "Print this help message and exit");
    sub->add_option("--input", input_path, "CSV file")->required()->check(CLI::ExistingFile);
    sub->add_option("--h", h, "Sampling step in model time units")->required()
        ->check(CLI::PositiveNumber);
    sub->add_option("--columns", columns, "Comma-separated column indices or header names");
    sub->add_option("--tau", tau, "Scheme parameter in (1, 2]")->capture_default_str();
    sub->add_option("--out", out_path, "JSON output file (default stdout)");
  }
  estimate->add_option("--config", config_path, "Model config (default: OU with wide boxes)")
      ->check(CLI::ExistingFile);
  estimate->add_flag("--with-cov", with_cov, "Attach the plug-in asymptotic covariance");
  estimate->add_flag("--lga", lga, "Also run the raw-increment LGA estimator");
  test->add_option("--level", level, "Test level")->capture_default_str();

  auto* study = app.add_subcommand("study", "Run a Monte Carlo study from a JSON config");
  study->add_option("--config", config_path, "Study config")->required()->check(CLI::ExistingFile);
  study->add_option("--seed", seed, "Master seed (default: config seed)");
  study->add_option("--threads", threads, "Worker threads (default: config or all cores)");
  study->add_option("--out", out_path, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) {
      StudyConfig config = study_config_from_json(read_json_file(config_path));
      if (simulate->count("--seed") > 0) config.seed = seed;
      const double step = config.step();
      const StreamSeed path_seed{mix_seed(config.seed, 1), static_cast<std::uint64_t>(replication)};
      const StreamSeed noise_seed{mix_seed(config.seed, 2), static_cast<std::uint64_t>(replication)};
      const LatentPath path =
          config.backend == SimulationBackend::exact_ou
              ? simulate_ou_exact(config.model.coefficients(), config.x0, config.n, step, path_seed)
              : simulate_path(config.model.model(), config.model.alpha, config.model.beta,
                              config.x0, config.n, step, path_seed, config.euler);
      const ObservationSeries obs =
          contaminate(path, NoiseSpec(config.noise_levels.front().lambda, config.noise_law),
                      noise_seed);
      if (!latent_out.empty()) write_csv(latent_out, step, path.values);
      if (out_path.empty() || out_path == "-") {
        write_csv(std::cout, step, obs.values);
      } else {
        write_csv(out_path, step, obs.values);
      }
    } else if (*estimate) {
      const ObservationSeries obs = ingest_csv(input_path, h, ColumnSpec::parse(columns));
      const ModelConfig model_config = load_model(config_path, obs.dim());
      const ModelSpec model = model_config.model();
      const SamplingScheme scheme = derive_scheme(obs.n(), h, tau);
      Json out = to_json(estimate_adaptive(obs, scheme, model, with_cov));
      if (lga) out["lga"] = to_json(estimate_lga(obs, model));
      emit(out, out_path);
    } else if (*test) {
      const ObservationSeries obs = ingest_csv(input_path, h, ColumnSpec::parse(columns));
      const SamplingScheme scheme = derive_scheme(obs.n(), h, tau);
      emit(to_json(noise_test(obs, scheme, level)), out_path);
    } else if (*study) {
      StudyConfig config = study_config_from_json(read_json_file(config_path));
      if (study->count("--seed") > 0) config.seed = seed;
      if (study->count("--threads") > 0) config.threads = threads;
      const StudyReport report = run_study(config);
      write_study_outputs(report, out_path);
      Json summary = to_json(report);
      summary.erase("config");
      std::cout << summary.dump(2) << '\n';
    }
  } catch (const ConvergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNonConvergence;
  } catch (const DegenerateDataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDegenerate;
  } catch (const SingularMatrixError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDegenerate;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return 0;
}
