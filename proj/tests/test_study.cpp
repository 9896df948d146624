#include <doctest.h>

#include <filesystem>

#include "diffnoise/study.hpp"
#include "support.hpp"

using namespace diffnoise;

namespace {

StudyConfig small_config() {
  StudyConfig c;
  c.model.d = 2;
  c.model.alpha_box = testing::ou_alpha_box();
  c.model.beta_box = testing::ou_beta_box();
  c.model.alpha = testing::ou_alpha_true();
  c.model.beta = testing::ou_beta_true();
  c.x0 = testing::ou_x0();
  c.n = 5000;
  c.taus = {1.9, 2.0};
  c.noise_levels = scaled_identity_levels(2, {0.0, 1e-4});
  c.replications = 4;
  c.seed = 99;
  c.threads = 1;
  return c;
}

}  // namespace

TEST_CASE("single replication bookkeeping") {
  StudyConfig c = small_config();
  c.replications = 1;
  c.adaptive = false;
  c.noise_test = false;
  c.noise_levels = scaled_identity_levels(2, {0.0});
  const StudyReport r = run_study(c);
  REQUIRE(r.records.size() == 1);
  const ReplicationRecord& rec = r.records.front();
  CHECK(rec.estimator == "lga");
  CHECK(rec.ok);
  REQUIRE(r.estimates.size() == 9);
  for (std::size_t i = 0; i < 9; ++i) {
    const double est = i < 3 ? rec.alpha[static_cast<Eigen::Index>(i)]
                             : rec.beta[static_cast<Eigen::Index>(i - 3)];
    CHECK(r.estimates[i].count == 1);
    CHECK(r.estimates[i].mean == est);
    CHECK(r.estimates[i].rmse == doctest::Approx(std::abs(est - r.estimates[i].truth)).epsilon(1e-15));
  }
}

TEST_CASE("reports are reproducible and independent of the thread count") {
  StudyConfig c = small_config();
  const StudyReport a = run_study(c);
  const StudyReport b = run_study(c);
  c.threads = 3;
  const StudyReport threaded = run_study(c);
  CHECK(to_json(a, false).dump() == to_json(b, false).dump());
  CHECK(to_json(a, false).dump() == to_json(threaded, false).dump());
  CHECK(a.failures == 0);
  // 4 reps × 2 levels × (2 τ × (adaptive + test) + lga)
  CHECK(a.records.size() == 4 * 2 * 5);
}

TEST_CASE("tables are recomputable from the per-replication dump") {
  const StudyConfig c = small_config();
  const StudyReport r = run_study(c);
  const auto dir = std::filesystem::temp_directory_path() / "diffnoise_study_test";
  write_study_outputs(r, dir.string());
  for (const char* f : {"report.json", "replications.jsonl", "estimates.csv", "rejections.csv"}) {
    CHECK(std::filesystem::exists(dir / f));
  }
  const StudyReport again = summarize(c, read_replications_jsonl((dir / "replications.jsonl").string()));
  REQUIRE(again.estimates.size() == r.estimates.size());
  for (std::size_t i = 0; i < r.estimates.size(); ++i) {
    CHECK(std::abs(again.estimates[i].mean - r.estimates[i].mean) <=
          1e-12 * std::max(1.0, std::abs(r.estimates[i].mean)));
    CHECK(std::abs(again.estimates[i].rmse - r.estimates[i].rmse) <=
          1e-12 * std::max(1.0, r.estimates[i].rmse));
  }
  for (std::size_t i = 0; i < r.rejections.size(); ++i) {
    CHECK(again.rejections[i].rate == r.rejections[i].rate);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("RMSE dominates the bias") {
  const StudyReport r = run_study(small_config());
  for (const CoordinateSummary& s : r.estimates) {
    CHECK(s.rmse >= 0.0);
    const double bias2 = (s.mean - s.truth) * (s.mean - s.truth);
    CHECK(s.rmse * s.rmse >= bias2 * (1.0 - 1e-9));
  }
}

TEST_CASE("rejection rates do not decrease along the noise grid") {
  StudyConfig c = small_config();
  c.n = 20000;
  c.adaptive = false;
  c.lga = false;
  c.taus = {1.8};
  c.noise_levels = scaled_identity_levels(2, {0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4});
  c.replications = 60;
  const StudyReport r = run_study(c);
  for (double level : c.levels) {
    double last = -1.0;
    for (const RejectionSummary& s : r.rejections) {
      if (s.level != level) continue;
      CHECK(s.rate >= last);
      last = s.rate;
    }
    CHECK(last == 1.0);
  }
}

TEST_CASE("failed cells are recorded and the study continues") {
  StudyConfig c = small_config();
  c.replications = 2;
  c.estimator.max_iters = 2;
  c.noise_test = true;
  const StudyReport r = run_study(c);
  CHECK(r.failures > 0);
  bool saw_error = false;
  for (const ReplicationRecord& rec : r.records) {
    if (rec.estimator == "test") CHECK(rec.ok);
    if (!rec.ok) saw_error = saw_error || rec.error.find("converge") != std::string::npos;
  }
  CHECK(saw_error);
}

TEST_CASE("study config parsing") {
  const Json j = Json::parse(R"({
    "model": {"family": "ou", "d": 2, "alpha": [1, 0.1, 1], "beta": [-1, -0.1, -0.1, -1, 1, 1]},
    "n": 10000, "h_exponent": 0.7, "taus": [1.8],
    "noise_levels": [0, 1e-4, {"label": "aniso", "matrix": [[1e-4, 0], [0, 2e-4]]}],
    "replications": 3, "seed": 5, "estimators": ["adaptive"], "backend": "euler", "substeps": 4
  })");
  const StudyConfig c = study_config_from_json(j);
  CHECK(c.noise_levels.size() == 3);
  CHECK(c.noise_levels[0].label == "O");
  CHECK(c.noise_levels[2].lambda(1, 1) == 2e-4);
  CHECK(c.step() == std::pow(10000.0, -0.7));
  CHECK(c.backend == SimulationBackend::euler);
  CHECK(c.euler.substeps == 4);
  CHECK(c.adaptive);
  CHECK_FALSE(c.lga);
  CHECK(c.x0 == Vector::Ones(2));
  const StudyConfig round = study_config_from_json(to_json(c));
  CHECK(to_json(round).dump() == to_json(c).dump());

  Json bad = j;
  bad["replications"] = 0;
  CHECK_THROWS_AS(study_config_from_json(bad), InvalidArgument);
  bad = j;
  bad["estimators"] = {"mle"};
  CHECK_THROWS_AS(study_config_from_json(bad), InvalidArgument);
}
