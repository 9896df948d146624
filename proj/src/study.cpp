#include "diffnoise/study.hpp"

#include <atomic>
#include <chrono>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <thread>

#include "diffnoise/detail/summation.hpp"

namespace diffnoise {

namespace {

constexpr std::uint64_t kPathSalt = 1;
constexpr std::uint64_t kNoiseSalt = 2;

std::string backend_name(SimulationBackend b) {
  return b == SimulationBackend::exact_ou ? "exact_ou" : "euler";
}

SimulationBackend backend_from_string(const std::string& s) {
  if (s == "exact_ou") return SimulationBackend::exact_ou;
  if (s == "euler") return SimulationBackend::euler;
  throw InvalidArgument("unknown simulation backend '" + s + "' (exact_ou, euler)");
}

std::string scale_label(double scale) {
  if (scale == 0.0) return "O";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g*I", scale);
  return buf;
}

Json optional_tau(const std::optional<double>& tau) { return tau ? Json(*tau) : Json(nullptr); }

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

std::string csv_number(double v) {
  if (!std::isfinite(v)) return "";
  // Shortest representation that reads back to the same double.
  char buf[32];
  const auto end = std::to_chars(buf, buf + sizeof(buf), v).ptr;
  return std::string(buf, end);
}

/// Everything produced for one replication, in a fixed order.
std::vector<ReplicationRecord> run_replication(const StudyConfig& config, const ModelSpec& model,
                                               const std::vector<SamplingScheme>& schemes,
                                               long rep) {
  std::vector<ReplicationRecord> out;
  const double h = config.step();
  LatentPath path;
  std::string path_error;
  try {
    const StreamSeed path_seed{mix_seed(config.seed, kPathSalt), static_cast<std::uint64_t>(rep)};
    if (config.backend == SimulationBackend::exact_ou) {
      path = simulate_ou_exact(config.model.coefficients(), config.x0, config.n, h, path_seed);
    } else {
      path = simulate_path(model, config.model.alpha, config.model.beta, config.x0, config.n, h,
                           path_seed, config.euler);
    }
  } catch (const std::exception& e) {
    path_error = std::string("simulation: ") + e.what();
  }

  for (int lvl = 0; lvl < static_cast<int>(config.noise_levels.size()); ++lvl) {
    const NoiseLevel& noise_level = config.noise_levels[static_cast<std::size_t>(lvl)];
    auto make = [&](const std::string& estimator, std::optional<double> tau) {
      ReplicationRecord r;
      r.replication = rep;
      r.noise_index = lvl;
      r.tau = tau;
      r.estimator = estimator;
      return r;
    };

    ObservationSeries obs;
    std::string obs_error = path_error;
    if (obs_error.empty()) {
      try {
        const StreamSeed noise_seed{mix_seed(config.seed, kNoiseSalt),
                                    static_cast<std::uint64_t>(rep)};
        obs = contaminate(path, NoiseSpec(noise_level.lambda, config.noise_law), noise_seed);
      } catch (const std::exception& e) {
        obs_error = std::string("contamination: ") + e.what();
      }
    }

    EstimatorOptions options = config.estimator;
    if (options.noise_fourth_moments.size() == 0) {
      options.noise_fourth_moments = Vector::Constant(model.d, fourth_moment(config.noise_law));
    }
    for (const SamplingScheme& scheme : schemes) {
      if (config.adaptive) {
        ReplicationRecord r = make("adaptive", scheme.tau);
        if (!obs_error.empty()) {
          r.error = obs_error;
        } else {
          try {
            const EstimationResult est =
                estimate_adaptive(obs, scheme, model, config.with_cov, options);
            r.theta_eps = est.theta_eps_hat;
            r.alpha = est.alpha_hat;
            r.beta = est.beta_hat;
            r.ok = true;
          } catch (const std::exception& e) {
            r.error = e.what();
          }
        }
        out.push_back(std::move(r));
      }
      if (config.noise_test) {
        ReplicationRecord r = make("test", scheme.tau);
        if (!obs_error.empty()) {
          r.error = obs_error;
        } else {
          try {
            const NoiseTestResult t = noise_test(obs, scheme, config.levels.front());
            r.z = t.z;
            r.p_value = t.p_value;
            r.ok = true;
          } catch (const std::exception& e) {
            r.error = e.what();
          }
        }
        out.push_back(std::move(r));
      }
    }
    if (config.lga) {
      ReplicationRecord r = make("lga", std::nullopt);
      if (!obs_error.empty()) {
        r.error = obs_error;
      } else {
        try {
          const LgaResult lga = estimate_lga(obs, model, options);
          r.alpha = lga.alpha;
          r.beta = lga.beta;
          r.ok = true;
        } catch (const std::exception& e) {
          r.error = e.what();
        }
      }
      out.push_back(std::move(r));
    }
  }
  return out;
}

void add_summaries(std::vector<CoordinateSummary>& out, const std::vector<ReplicationRecord>& records,
                   int noise_index, std::optional<double> tau, const std::string& estimator,
                   const std::vector<std::string>& labels, const Vector& truth, bool with_noise) {
  const Eigen::Index q = with_noise ? 0 : truth.size() - static_cast<Eigen::Index>(labels.size());
  for (std::size_t c = 0; c < labels.size(); ++c) {
    const Eigen::Index idx = static_cast<Eigen::Index>(c) + q;
    detail::CompensatedSum sum;
    detail::CompensatedSum sq;
    long count = 0;
    for (const ReplicationRecord& r : records) {
      if (!r.ok || r.noise_index != noise_index || r.estimator != estimator || r.tau != tau) continue;
      Vector est(r.theta_eps.size() + r.alpha.size() + r.beta.size());
      est << r.theta_eps, r.alpha, r.beta;
      const Eigen::Index pos = with_noise ? idx : idx - q;
      const double v = est[pos];
      sum.add(v);
      sq.add((v - truth[idx]) * (v - truth[idx]));
      ++count;
    }
    CoordinateSummary s;
    s.noise_index = noise_index;
    s.tau = tau;
    s.estimator = estimator;
    s.parameter = labels[c];
    s.truth = truth[idx];
    s.count = count;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    s.mean = count > 0 ? sum.value() / static_cast<double>(count) : nan;
    s.rmse = count > 0 ? std::sqrt(sq.value() / static_cast<double>(count)) : nan;
    out.push_back(std::move(s));
  }
}

}  // namespace

// ---------------------------------------------------------------- config

double StudyConfig::step() const {
  if (h > 0.0) return h;
  return std::pow(static_cast<double>(n), -h_exponent);
}

void StudyConfig::validate() const {
  const ModelSpec spec = model.model();
  if (!model.has_truth()) throw InvalidArgument("study: the model block must give true parameters");
  if (x0.size() != model.d) throw InvalidArgument("study: x0 must have d entries");
  if (replications < 1) throw InvalidArgument("study: replications must be >= 1");
  if (n < 4) throw InvalidArgument("study: n must be >= 4");
  const double step_h = step();
  if (!(step_h > 0.0 && step_h < 1.0)) throw InvalidArgument("study: h must lie in (0, 1)");
  if (noise_levels.empty()) throw InvalidArgument("study: noise grid is empty");
  for (const NoiseLevel& lvl : noise_levels) {
    NoiseSpec spec_noise(lvl.lambda, noise_law);
    if (spec_noise.dim() != model.d) {
      throw InvalidArgument("study: noise level '" + lvl.label + "' is not d x d");
    }
  }
  if ((adaptive || noise_test) && taus.empty()) throw InvalidArgument("study: tau list is empty");
  for (double tau : taus) derive_scheme(n, step_h, tau);
  if (levels.empty()) throw InvalidArgument("study: test level list is empty");
  for (double lvl : levels) upper_critical_value(lvl);
  if (euler.substeps < 1) throw InvalidArgument("study: substeps must be >= 1");
  if (!adaptive && !lga && !noise_test) throw InvalidArgument("study: nothing to run");
}

std::vector<NoiseLevel> scaled_identity_levels(int d, const std::vector<double>& scales) {
  std::vector<NoiseLevel> out;
  for (double s : scales) {
    out.push_back({scale_label(s), s * Matrix::Identity(d, d)});
  }
  return out;
}

StudyConfig study_config_from_json(const Json& j) {
  if (!j.is_object()) throw InvalidArgument("study config: expected an object");
  StudyConfig c;
  if (!j.contains("model")) throw InvalidArgument("study config: missing 'model'");
  c.model = model_config_from_json(j["model"]);
  c.x0 = j.contains("x0") ? vector_from_json(j["x0"], "x0") : Vector::Ones(c.model.d);
  c.n = j.value("n", c.n);
  c.h = j.value("h", 0.0);
  c.h_exponent = j.value("h_exponent", c.h_exponent);
  if (j.contains("taus")) c.taus = j["taus"].get<std::vector<double>>();
  if (j.contains("noise_levels")) {
    for (const Json& lvl : j["noise_levels"]) {
      if (lvl.is_number()) {
        const double s = lvl.get<double>();
        c.noise_levels.push_back({scale_label(s), s * Matrix::Identity(c.model.d, c.model.d)});
      } else if (lvl.is_object() && lvl.contains("matrix")) {
        c.noise_levels.push_back({lvl.value("label", std::string("custom")),
                                  matrix_from_json(lvl["matrix"], "noise_levels.matrix")});
      } else if (lvl.is_object() && lvl.contains("scale")) {
        const double s = lvl["scale"].get<double>();
        c.noise_levels.push_back({lvl.value("label", scale_label(s)),
                                  s * Matrix::Identity(c.model.d, c.model.d)});
      } else {
        throw InvalidArgument("study config: noise level must be a number or an object with "
                              "'scale' or 'matrix'");
      }
    }
  } else {
    c.noise_levels = scaled_identity_levels(c.model.d, {0.0});
  }
  c.replications = j.value("replications", c.replications);
  c.seed = j.value("seed", c.seed);
  if (j.contains("estimators")) {
    const auto names = j["estimators"].get<std::vector<std::string>>();
    c.adaptive = c.lga = false;
    for (const std::string& name : names) {
      if (name == "adaptive") {
        c.adaptive = true;
      } else if (name == "lga") {
        c.lga = true;
      } else {
        throw InvalidArgument("study config: unknown estimator '" + name + "' (adaptive, lga)");
      }
    }
  }
  c.noise_test = j.value("noise_test", c.noise_test);
  if (j.contains("levels")) c.levels = j["levels"].get<std::vector<double>>();
  c.backend = backend_from_string(j.value("backend", backend_name(c.backend)));
  c.euler.substeps = j.value("substeps", c.euler.substeps);
  c.euler.burn_in = j.value("burn_in", c.euler.burn_in);
  c.noise_law = noise_law_from_string(j.value("noise_law", to_string(c.noise_law)));
  c.threads = j.value("threads", c.threads);
  c.with_cov = j.value("with_cov", c.with_cov);
  if (j.contains("optimizer")) {
    const Json& o = j["optimizer"];
    const std::string method = o.value("method", std::string("nelder_mead"));
    if (method == "nelder_mead") {
      c.estimator.method = OptimizerMethod::nelder_mead;
    } else if (method == "quasi_newton") {
      c.estimator.method = OptimizerMethod::quasi_newton;
    } else {
      throw InvalidArgument("study config: unknown optimizer method '" + method + "'");
    }
    c.estimator.random_starts = o.value("random_starts", c.estimator.random_starts);
    c.estimator.tol = o.value("tol", c.estimator.tol);
    c.estimator.max_iters = o.value("max_iters", c.estimator.max_iters);
  }
  c.validate();
  return c;
}

Json to_json(const StudyConfig& c) {
  Json levels = Json::array();
  for (const NoiseLevel& lvl : c.noise_levels) {
    levels.push_back({{"label", lvl.label}, {"matrix", to_json(lvl.lambda)}});
  }
  std::vector<std::string> estimators;
  if (c.adaptive) estimators.emplace_back("adaptive");
  if (c.lga) estimators.emplace_back("lga");
  Json out = {{"model", to_json(c.model)},
          {"x0", to_json(c.x0)},
          {"n", c.n},
          {"step", c.step()},
          {"taus", c.taus},
          {"noise_levels", levels},
          {"replications", c.replications},
          {"seed", c.seed},
          {"estimators", estimators},
          {"noise_test", c.noise_test},
          {"levels", c.levels},
          {"backend", backend_name(c.backend)},
          {"substeps", c.euler.substeps},
          {"burn_in", c.euler.burn_in},
          {"noise_law", to_string(c.noise_law)},
          {"with_cov", c.with_cov},
          {"optimizer",
           {{"method", c.estimator.method == OptimizerMethod::nelder_mead ? "nelder_mead"
                                                                         : "quasi_newton"},
            {"random_starts", c.estimator.random_starts},
            {"tol", c.estimator.tol},
            {"max_iters", c.estimator.max_iters}}}};
  if (c.h > 0.0) {
    out["h"] = c.h;
  } else {
    out["h_exponent"] = c.h_exponent;
  }
  return out;
}

// ---------------------------------------------------------------- records

Json to_json(const ReplicationRecord& r) {
  Json out = {{"replication", r.replication},
              {"noise_index", r.noise_index},
              {"tau", optional_tau(r.tau)},
              {"estimator", r.estimator},
              {"ok", r.ok}};
  if (!r.ok) {
    out["error"] = r.error;
    return out;
  }
  if (r.estimator == "test") {
    out["z"] = r.z;
    out["p_value"] = r.p_value;
  } else {
    out["theta_eps"] = to_json(r.theta_eps);
    out["alpha"] = to_json(r.alpha);
    out["beta"] = to_json(r.beta);
  }
  return out;
}

ReplicationRecord replication_record_from_json(const Json& j) {
  ReplicationRecord r;
  r.replication = j.at("replication").get<long>();
  r.noise_index = j.at("noise_index").get<int>();
  if (!j.at("tau").is_null()) r.tau = j["tau"].get<double>();
  r.estimator = j.at("estimator").get<std::string>();
  r.ok = j.at("ok").get<bool>();
  r.error = j.value("error", std::string());
  if (r.ok && r.estimator == "test") {
    r.z = j.at("z").get<double>();
    r.p_value = j.at("p_value").get<double>();
  } else if (r.ok) {
    r.theta_eps = vector_from_json(j.at("theta_eps"), "theta_eps");
    r.alpha = vector_from_json(j.at("alpha"), "alpha");
    r.beta = vector_from_json(j.at("beta"), "beta");
  }
  return r;
}

// ---------------------------------------------------------------- running

StudyReport run_study(const StudyConfig& config) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  const ModelSpec model = config.model.model();
  std::vector<SamplingScheme> schemes;
  for (double tau : config.taus) schemes.push_back(derive_scheme(config.n, config.step(), tau));

  const long reps = config.replications;
  std::vector<std::vector<ReplicationRecord>> per_rep(static_cast<std::size_t>(reps));
  std::atomic<long> next{0};
  auto worker = [&] {
    for (long rep = next++; rep < reps; rep = next++) {
      per_rep[static_cast<std::size_t>(rep)] = run_replication(config, model, schemes, rep);
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const long threads =
      std::min<long>(reps, config.threads > 0 ? config.threads : static_cast<long>(hw));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (long t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  std::vector<ReplicationRecord> records;
  for (auto& rep_records : per_rep) {
    for (auto& r : rep_records) records.push_back(std::move(r));
  }
  StudyReport report = summarize(config, std::move(records));
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  report.seconds_per_replication = report.wall_seconds / static_cast<double>(reps);
  return report;
}

StudyReport summarize(const StudyConfig& config, std::vector<ReplicationRecord> records) {
  StudyReport report;
  report.config = config;
  report.records = std::move(records);
  const int d = config.model.d;
  const int m1 = ou_alpha_dim(d);
  const int m2 = ou_beta_dim(d);
  const std::vector<std::string> all_labels = covariance_labels(d, m1, m2);
  const std::vector<std::string> drift_diffusion_labels(all_labels.begin() + d * (d + 1) / 2,
                                                        all_labels.end());

  for (const ReplicationRecord& r : report.records) {
    if (!r.ok) ++report.failures;
  }
  for (int lvl = 0; lvl < static_cast<int>(config.noise_levels.size()); ++lvl) {
    Vector truth(all_labels.size());
    truth << vech(config.noise_levels[static_cast<std::size_t>(lvl)].lambda), config.model.alpha,
        config.model.beta;
    if (config.adaptive) {
      for (double tau : config.taus) {
        add_summaries(report.estimates, report.records, lvl, tau, "adaptive", all_labels, truth,
                      true);
      }
    }
    if (config.lga) {
      add_summaries(report.estimates, report.records, lvl, std::nullopt, "lga",
                    drift_diffusion_labels, truth, false);
    }
    if (config.noise_test) {
      for (double tau : config.taus) {
        for (double level : config.levels) {
          const double z_level = upper_critical_value(level);
          long count = 0;
          long rejected = 0;
          for (const ReplicationRecord& r : report.records) {
            if (!r.ok || r.estimator != "test" || r.noise_index != lvl || r.tau != tau) continue;
            ++count;
            if (r.z > z_level) ++rejected;
          }
          RejectionSummary s;
          s.noise_index = lvl;
          s.tau = tau;
          s.level = level;
          s.count = count;
          s.rate = count > 0 ? static_cast<double>(rejected) / static_cast<double>(count)
                             : std::numeric_limits<double>::quiet_NaN();
          report.rejections.push_back(s);
        }
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------- output

Json to_json(const StudyReport& report, bool with_runtime) {
  const auto& levels = report.config.noise_levels;
  Json estimates = Json::array();
  for (const CoordinateSummary& s : report.estimates) {
    estimates.push_back({{"noise", levels[static_cast<std::size_t>(s.noise_index)].label},
                         {"noise_index", s.noise_index},
                         {"tau", optional_tau(s.tau)},
                         {"estimator", s.estimator},
                         {"parameter", s.parameter},
                         {"truth", s.truth},
                         {"mean", number_or_null(s.mean)},
                         {"rmse", number_or_null(s.rmse)},
                         {"count", s.count}});
  }
  Json rejections = Json::array();
  for (const RejectionSummary& s : report.rejections) {
    rejections.push_back({{"noise", levels[static_cast<std::size_t>(s.noise_index)].label},
                          {"noise_index", s.noise_index},
                          {"tau", s.tau},
                          {"level", s.level},
                          {"rate", number_or_null(s.rate)},
                          {"count", s.count}});
  }
  Json schemes = Json::array();
  for (double tau : report.config.taus) {
    schemes.push_back(to_json(derive_scheme(report.config.n, report.config.step(), tau)));
  }
  Json out = {{"config", to_json(report.config)},
              {"schemes", schemes},
              {"estimates", estimates},
              {"rejections", rejections},
              {"records", static_cast<long>(report.records.size())},
              {"failures", report.failures}};
  if (with_runtime) {
    out["runtime"] = {{"wall_seconds", report.wall_seconds},
                      {"seconds_per_replication", report.seconds_per_replication}};
  }
  return out;
}

void write_study_outputs(const StudyReport& report, const std::string& directory) {
  namespace fs = std::filesystem;
  fs::create_directories(directory);
  const fs::path dir(directory);
  auto open = [](const fs::path& p) {
    std::ofstream out(p);
    if (!out) throw Error("cannot open '" + p.string() + "' for writing");
    return out;
  };

  {
    std::ofstream out = open(dir / "report.json");
    out << to_json(report).dump(2) << '\n';
  }
  {
    std::ofstream out = open(dir / "replications.jsonl");
    for (const ReplicationRecord& r : report.records) out << to_json(r).dump() << '\n';
  }
  const auto& levels = report.config.noise_levels;
  {
    std::ofstream out = open(dir / "estimates.csv");
    out << "noise,tau,estimator,parameter,truth,mean,rmse,count\n";
    for (const CoordinateSummary& s : report.estimates) {
      out << levels[static_cast<std::size_t>(s.noise_index)].label << ','
          << (s.tau ? csv_number(*s.tau) : "") << ',' << s.estimator << ',' << s.parameter << ','
          << csv_number(s.truth) << ',' << csv_number(s.mean) << ',' << csv_number(s.rmse) << ','
          << s.count << '\n';
    }
  }
  {
    std::ofstream out = open(dir / "rejections.csv");
    out << "noise,tau,level,rate,count\n";
    for (const RejectionSummary& s : report.rejections) {
      out << levels[static_cast<std::size_t>(s.noise_index)].label << ',' << csv_number(s.tau)
          << ',' << csv_number(s.level) << ',' << csv_number(s.rate) << ',' << s.count << '\n';
    }
  }
}

std::vector<ReplicationRecord> read_replications_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  std::vector<ReplicationRecord> out;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(replication_record_from_json(Json::parse(line)));
    } catch (const Json::exception& e) {
      throw InvalidArgument(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace diffnoise
