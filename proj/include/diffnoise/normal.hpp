#pragma once

#include "diffnoise/rng.hpp"

namespace diffnoise {

/// Standard normal CDF Φ(x), computed from erfc so the upper tail keeps full
/// relative precision.
double normal_cdf(double x);

/// Φ⁻¹(p) for p in (0, 1) (Wichura's AS241, relative error about 1e-16).
double normal_quantile(double p);

/// N(0, 1) draw by inversion of one 53-bit uniform. Uses exactly one engine
/// output per draw and gives the same values on every platform.
double standard_normal(Philox4x32& rng);

}  // namespace diffnoise
