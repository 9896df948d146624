#pragma once

#include <cstdint>

#include "diffnoise/core.hpp"

namespace diffnoise {

/// Latent diffusion sampled on the observation grid 0, h, …, nh.
struct LatentPath {
  double h = 0.0;
  Matrix values;  // (n+1) × d
  StreamSeed seed;

  long n() const { return static_cast<long>(values.rows()) - 1; }
  int dim() const { return static_cast<int>(values.cols()); }
};

struct EulerOptions {
  int substeps = 10;
  /// Grid steps simulated and discarded before recording starts.
  long burn_in = 0;
};

/// Euler–Maruyama on step h/substeps, recording every substeps-th point.
/// Brownian increments come from bridge refinement of each grid-step
/// increment, so a run with 2s substeps refines the Brownian path of a run
/// with s substeps when s is a power of two.
/// Throws Error naming the grid index if drift or diffusion turns non-finite.
LatentPath simulate_path(const ModelSpec& model, const Vector& alpha, const Vector& beta,
                         const Vector& x0, long n, double h, StreamSeed seed,
                         EulerOptions options = {});

/// Y_i = X_i + Λ^{1/2} ε_i. With Λ = O the path is returned unchanged.
ObservationSeries contaminate(const LatentPath& path, const NoiseSpec& noise, StreamSeed seed);

}  // namespace diffnoise
