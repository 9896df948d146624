#include "diffnoise/local_means.hpp"

namespace diffnoise {

LocalMeanSeries local_means(const ObservationSeries& obs, const SamplingScheme& scheme) {
  if (scheme.p < 1 || scheme.k < 1) {
    throw InvalidArgument("local_means: scheme has no blocks");
  }
  if (obs.values.rows() < scheme.k * scheme.p) {
    throw DegenerateDataError("local_means: " + std::to_string(obs.values.rows()) +
                              " observations cannot fill " + std::to_string(scheme.k) +
                              " blocks of length " + std::to_string(scheme.p));
  }
  LocalMeanSeries lm;
  lm.scheme = scheme;
  lm.means = block_means(obs.values, scheme.p, scheme.k);
  return lm;
}

}  // namespace diffnoise
