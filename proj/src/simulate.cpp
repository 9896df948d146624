#include "diffnoise/simulate.hpp"

#include <deque>
#include <tuple>

#include "diffnoise/normal.hpp"

namespace diffnoise {

namespace {

// Philox blocks reserved for one (grid step, Wiener component): 2^24 blocks,
// i.e. up to 2^25 normals, far more than any sensible substep count.
constexpr int kBlocksPerIncrementBits = 24;

/// Bisection points (left, mid, right) of [0, substeps] in breadth-first
/// order. For a power-of-two count the first half of the list for 2s covers
/// the same times as the list for s, which is what nests the paths.
std::vector<std::tuple<int, int, int>> bridge_order(int substeps) {
  std::vector<std::tuple<int, int, int>> order;
  std::deque<std::pair<int, int>> queue{{0, substeps}};
  while (!queue.empty()) {
    const auto [a, b] = queue.front();
    queue.pop_front();
    if (b - a < 2) continue;
    const int m = a + (b - a) / 2;
    order.emplace_back(a, m, b);
    queue.emplace_back(a, m);
    queue.emplace_back(m, b);
  }
  return order;
}

}  // namespace

LatentPath simulate_path(const ModelSpec& model, const Vector& alpha, const Vector& beta,
                         const Vector& x0, long n, double h, StreamSeed seed,
                         EulerOptions options) {
  model.validate();
  if (options.substeps < 1) {
    throw InvalidArgument("simulate_path: substeps must be >= 1");
  }
  if (n < 1) {
    throw InvalidArgument("simulate_path: n must be >= 1");
  }
  if (options.burn_in < 0) {
    throw InvalidArgument("simulate_path: burn_in must be >= 0");
  }
  if (!(h > 0.0)) {
    throw InvalidArgument("simulate_path: h must be positive");
  }
  if (x0.size() != model.d || alpha.size() != model.m1 || beta.size() != model.m2) {
    throw InvalidArgument("simulate_path: x0/alpha/beta dimensions do not match the model");
  }

  Philox4x32 rng = seed.engine();
  const int substeps = options.substeps;
  const double dt = h / substeps;
  const double sqrt_h = std::sqrt(h);
  const auto order = bridge_order(substeps);

  LatentPath path;
  path.h = h;
  path.seed = seed;
  path.values.resize(n + 1, model.d);

  Vector x = x0;
  Vector dw(model.r);
  Vector w(substeps + 1);
  Matrix increments(substeps, model.r);
  const long total = options.burn_in + n;
  long recorded = 0;
  if (options.burn_in == 0) {
    path.values.row(recorded++) = x.transpose();
  }
  for (long step = 1; step <= total; ++step) {
    // Brownian path on the substep grid: endpoint first, then bridge
    // midpoints level by level.
    for (int j = 0; j < model.r; ++j) {
      rng.seek((static_cast<std::uint64_t>(step - 1) * static_cast<std::uint64_t>(model.r) +
                static_cast<std::uint64_t>(j))
               << kBlocksPerIncrementBits);
      w[0] = 0.0;
      w[substeps] = sqrt_h * standard_normal(rng);
      for (const auto& [a, m, b] : order) {
        const double span = b - a;
        const double mean = w[a] + (m - a) / span * (w[b] - w[a]);
        w[m] = mean + std::sqrt((m - a) * (b - m) / span * dt) * standard_normal(rng);
      }
      for (int sub = 0; sub < substeps; ++sub) increments(sub, j) = w[sub + 1] - w[sub];
    }
    for (int sub = 0; sub < substeps; ++sub) {
      const Vector b = model.drift(x, beta);
      const Matrix a = model.diffusion(x, alpha);
      if (!b.allFinite() || !a.allFinite()) {
        throw Error("simulate_path: non-finite coefficient at grid index " +
                    std::to_string(step - 1 - options.burn_in));
      }
      dw = increments.row(sub).transpose();
      x += b * dt + a * dw;
    }
    if (!x.allFinite()) {
      throw Error("simulate_path: state became non-finite at grid index " +
                  std::to_string(step - options.burn_in));
    }
    if (step >= options.burn_in) {
      path.values.row(recorded++) = x.transpose();
    }
  }
  return path;
}

ObservationSeries contaminate(const LatentPath& path, const NoiseSpec& noise, StreamSeed seed) {
  noise.validate();
  if (noise.dim() != path.dim()) {
    throw InvalidArgument("contaminate: noise is " + std::to_string(noise.dim()) +
                          "-dimensional but the path is " + std::to_string(path.dim()) +
                          "-dimensional");
  }
  if (noise.lambda.isZero(0.0)) {
    return ObservationSeries(path.h, path.values);
  }
  const Matrix root = psd_sqrt(noise.lambda);
  Philox4x32 rng = seed.engine();
  Matrix y = path.values;
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    y.row(i) += (root * noise.draw(rng)).transpose();
  }
  return ObservationSeries(path.h, std::move(y));
}

}  // namespace diffnoise
