#include <doctest.h>

#include <set>

#include "diffnoise/normal.hpp"
#include "support.hpp"

using namespace diffnoise;

TEST_CASE("Philox4x32-10 matches the published known-answer vector") {
  // Random123 kat_vectors: philox4x32 10 rounds, counter 0, key 0 ->
  // 6627e8d5 e169c58d bc57ac4c 9b00dbd8.
  Philox4x32 rng(0, 0);
  CHECK(rng() == 0xe169c58d6627e8d5ull);
  CHECK(rng() == 0x9b00dbd8bc57ac4cull);
}

TEST_CASE("Philox streams are reproducible and distinct") {
  Philox4x32 a(42, 7);
  Philox4x32 b(42, 7);
  Philox4x32 c(42, 8);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a();
    CHECK(x == b());
    differs = differs || x != c();
  }
  CHECK(differs);

  Philox4x32 seeker(42, 7);
  seeker.seek(5);
  Philox4x32 walker(42, 7);
  walker.discard(10);
  CHECK(seeker() == walker());
}

TEST_CASE("uniform draws lie in [0, 1) and seed helpers are stable") {
  Philox4x32 rng(3, 0);
  double sum = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(sum / 10000.0 == doctest::Approx(0.5).epsilon(0.02));
  CHECK(mix_seed(1, 1) != mix_seed(1, 2));
  CHECK(mix_seed(1, 1) == mix_seed(1, 1));
  CHECK(label_key("a") == label_key("a"));
  CHECK(label_key("a") != label_key("b"));
}

TEST_CASE("standard normal draws have unit variance") {
  Philox4x32 rng(11, 0);
  double s1 = 0.0;
  double s2 = 0.0;
  double s4 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = standard_normal(rng);
    s1 += z;
    s2 += z * z;
    s4 += z * z * z * z;
  }
  CHECK(std::abs(s1 / n) < 0.01);
  CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.01));
  CHECK(s4 / n == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("derive_scheme reproduces the reference scheme values") {
  // The reference values print h to 7 digits; Δ was computed from the unrounded
  // step (n^(−0.7) for the simulation setting, 0.05 s / 2 h for the data).
  struct Row {
    long n;
    double printed_h;
    double exact_h;
    double tau;
    long p;
    long k;
    double delta;
  };
  const double sim_h = std::pow(1e6, -0.7);
  const double data_h = 0.05 / 7200.0;
  const Row rows[] = {
      {1000000, 6.309573e-5, sim_h, 1.8, 215, 4651, 0.01356558},
      {1000000, 6.309573e-5, sim_h, 1.9, 162, 6172, 0.01022151},
      {1000000, 6.309573e-5, sim_h, 2.0, 125, 8000, 0.007886967},
      {8352000, 6.944444e-6, data_h, 1.9, 518, 16123, 0.003597222},
  };
  for (const Row& r : rows) {
    CAPTURE(r.tau);
    for (double h : {r.printed_h, r.exact_h}) {
      const SamplingScheme s = derive_scheme(r.n, h, r.tau);
      CHECK(s.p == r.p);
      CHECK(s.k == r.k);
    }
    const SamplingScheme s = derive_scheme(r.n, r.exact_h, r.tau);
    const double half_unit = 0.5 * std::pow(10.0, std::floor(std::log10(r.delta)) - 6);
    CHECK(std::abs(s.delta - r.delta) <= half_unit);
  }
}

TEST_CASE("derive_scheme small exact case and invariants") {
  const SamplingScheme s = derive_scheme(100, 0.01, 2.0);
  CHECK(s.p == 10);
  CHECK(s.k == 10);
  CHECK(s.delta == 0.1);
  CHECK(s.unused() == 0);
  CHECK(s.noise_multiplier() == 3.0);

  Philox4x32 rng(5, 0);
  for (int i = 0; i < 500; ++i) {
    const long n = 100 + static_cast<long>(rng() % 100000);
    const double h = 1e-5 + 0.2 * rng.uniform();
    const double tau = 1.01 + 0.99 * rng.uniform();
    SamplingScheme sc;
    try {
      sc = derive_scheme(n, h, tau);
    } catch (const InvalidArgument&) {
      continue;
    }
    CHECK(sc.delta == static_cast<double>(sc.p) * h);
    CHECK(sc.k * sc.p <= n);
    CHECK(n < (sc.k + 1) * sc.p);
    CHECK(sc.k >= 3);
  }
}

TEST_CASE("derive_scheme rejects invalid input") {
  CHECK_THROWS_AS(derive_scheme(1000, 0.01, 1.0), InvalidArgument);
  CHECK_THROWS_AS(derive_scheme(1000, 0.01, 2.1), InvalidArgument);
  CHECK_THROWS_AS(derive_scheme(3, 0.01, 2.0), InvalidArgument);
  CHECK_THROWS_AS(derive_scheme(1000, 1.0, 2.0), InvalidArgument);
  CHECK_THROWS_AS(derive_scheme(25, 0.01, 2.0), InvalidArgument);  // k = 2
}

TEST_CASE("noise multiplier is computed in log space") {
  SamplingScheme s = derive_scheme(1000000, 6.309573e-5, 1.8);
  const double expected = 3.0 * std::pow(s.delta, (2.0 - 1.8) / (1.8 - 1.0));
  CHECK(s.noise_multiplier() == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("vech ordering and inverse") {
  CHECK(vech(Matrix::Identity(2, 2)) == (Vector(3) << 1, 0, 1).finished());
  Matrix m(2, 2);
  m << 4, 2, 2, 9;
  CHECK(vech(m) == (Vector(3) << 4, 2, 9).finished());
  Matrix one(1, 1);
  one << 0.37;
  CHECK(vech(one)[0] == 0.37);

  Matrix s3(3, 3);
  s3 << 1, 2, 3, 2, 5, 6, 3, 6, 9;
  CHECK(vech(s3) == (Vector(6) << 1, 2, 3, 5, 6, 9).finished());
  CHECK(unvech(vech(s3)) == s3);
  CHECK(vech_dimension(6) == 3);
  CHECK(vech_dimension(5) == -1);

  Matrix asym(2, 2);
  asym << 1, 2, 2.1, 1;
  CHECK_THROWS_AS(vech(asym), InvalidArgument);
}

TEST_CASE("psd_sqrt examples") {
  Matrix d(2, 2);
  d << 4, 0, 0, 9;
  const Matrix rd = psd_sqrt(d);
  CHECK((rd - (Matrix(2, 2) << 2, 0, 0, 3).finished()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(psd_sqrt(Matrix::Zero(3, 3)).isZero(0.0));

  Matrix m(2, 2);
  m << 2, 1, 1, 2;
  const Matrix r = psd_sqrt(m);
  CHECK((r * r - m).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((r - r.transpose()).cwiseAbs().maxCoeff() == 0.0);

  Matrix neg(2, 2);
  neg << 1, 0, 0, -1e-6;
  CHECK_THROWS_AS(psd_sqrt(neg), InvalidArgument);
  Matrix tiny(2, 2);
  tiny << 1, 0, 0, -1e-13;
  CHECK(psd_sqrt(tiny)(1, 1) == 0.0);
}

TEST_CASE("psd_sqrt squares back on random PSD matrices") {
  Philox4x32 rng(9, 0);
  for (int t = 0; t < 50; ++t) {
    const int d = 1 + static_cast<int>(rng() % 4);
    Matrix g(d, d);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) g(i, j) = standard_normal(rng);
    }
    const Matrix m = g * g.transpose();
    const Matrix r = psd_sqrt(m);
    CHECK((r * r - m).cwiseAbs().maxCoeff() < 1e-10 * (1.0 + m.cwiseAbs().maxCoeff()));
    CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(r).eigenvalues().minCoeff() > -1e-12);
  }
}

TEST_CASE("Box and NoiseSpec validation") {
  CHECK_THROWS_AS(Box((Vector(1) << 1.0).finished(), (Vector(1) << 0.0).finished()),
                  InvalidArgument);
  CHECK_THROWS_AS(Box((Vector(1) << -INFINITY).finished(), (Vector(1) << 0.0).finished()),
                  InvalidArgument);
  const Box fixed((Vector(1) << 0.0).finished(), (Vector(1) << 0.0).finished());
  CHECK(fixed.is_fixed(0));
  const Box b = Box::uniform(2, -1.0, 1.0);
  CHECK(b.project((Vector(2) << 3.0, -0.5).finished()) == (Vector(2) << 1.0, -0.5).finished());

  Matrix asym(2, 2);
  asym << 1, 0.5, 0.4, 1;
  CHECK_THROWS_AS(NoiseSpec(asym).validate(), InvalidArgument);
  Matrix indefinite(2, 2);
  indefinite << 1, 2, 2, 1;
  CHECK_THROWS_AS(NoiseSpec(indefinite).validate(), InvalidArgument);
  NoiseSpec low(Matrix::Identity(2, 2));
  low.fourth_moments = Vector::Constant(2, 0.5);
  CHECK_THROWS_AS(low.validate(), InvalidArgument);
  CHECK(NoiseSpec(Matrix::Identity(2, 2), NoiseLaw::uniform).fourth_moments[0] == 1.8);
  CHECK(NoiseSpec(Matrix::Identity(2, 2), NoiseLaw::laplace).fourth_moments[1] == 6.0);
}

TEST_CASE("noise laws have unit variance and the declared fourth moment") {
  for (NoiseLaw law : {NoiseLaw::gaussian, NoiseLaw::uniform, NoiseLaw::laplace}) {
    const NoiseSpec spec(Matrix::Identity(1, 1), law);
    Philox4x32 rng(21, 0);
    double s2 = 0.0;
    double s4 = 0.0;
    const int n = 400000;
    for (int i = 0; i < n; ++i) {
      const double e = spec.draw(rng)[0];
      s2 += e * e;
      s4 += e * e * e * e;
    }
    CAPTURE(to_string(law));
    CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.01));
    CHECK(s4 / n == doctest::Approx(fourth_moment(law)).epsilon(0.05));
  }
}

TEST_CASE("OU model: analytic derivatives agree with central differences") {
  const ModelSpec model = testing::ou_model();
  ModelSpec numeric = model;
  numeric.diffusion_sq_jacobian = nullptr;
  numeric.drift_jacobian = nullptr;
  Philox4x32 rng(13, 0);
  for (int t = 0; t < 20; ++t) {
    const Vector x = (Vector(2) << standard_normal(rng), standard_normal(rng)).finished();
    const Vector alpha = (Vector(3) << 0.5 + rng.uniform(), 0.3 * (rng.uniform() - 0.5),
                          0.5 + rng.uniform())
                             .finished();
    Vector beta(6);
    for (int i = 0; i < 6; ++i) beta[i] = 2.0 * rng.uniform() - 1.0;
    const auto exact = model.diffusion_sq_derivatives(x, alpha);
    const auto approx = numeric.diffusion_sq_derivatives(x, alpha);
    for (int k = 0; k < 3; ++k) CHECK((exact[k] - approx[k]).cwiseAbs().maxCoeff() < 1e-7);
    CHECK((model.drift_derivative(x, beta) - numeric.drift_derivative(x, beta))
              .cwiseAbs()
              .maxCoeff() < 1e-7);
    const AffineDrift aff = model.drift_design(x);
    CHECK((aff.design * beta + aff.offset - model.drift(x, beta)).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("OU coefficient layout") {
  const OuCoefficients c = testing::ou_truth();
  CHECK(c.diffusion == (Matrix(2, 2) << 1.0, 0.1, 0.1, 1.0).finished());
  CHECK(c.drift_matrix == (Matrix(2, 2) << -1.0, -0.1, -0.1, -1.0).finished());
  CHECK(c.intercept == Vector::Constant(2, 1.0));
  CHECK(ou_beta(c.drift_matrix, c.intercept) == testing::ou_beta_true());
  CHECK(ou_alpha(c.diffusion) == testing::ou_alpha_true());
  // β3 is the (1,2) entry of B.
  const Vector beta = (Vector(6) << 1, 2, 3, 4, 5, 6).finished();
  CHECK(ou_coefficients(2, testing::ou_alpha_true(), beta).drift_matrix(0, 1) == 3.0);
}
