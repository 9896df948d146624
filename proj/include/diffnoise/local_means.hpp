#pragma once

#include "diffnoise/core.hpp"
#include "diffnoise/detail/summation.hpp"

namespace diffnoise {

/// Block means Ȳ_j = (1/p) Σ_{i=0}^{p−1} Y_{jp+i}, j = 0..k−1.
struct LocalMeanSeries {
  SamplingScheme scheme;
  Matrix means;  // k × d

  long k() const { return static_cast<long>(means.rows()); }
  int dim() const { return static_cast<int>(means.cols()); }
  Vector row(long j) const { return means.row(j).transpose(); }
};

/// Blocks longer than this are accumulated with Neumaier compensation.
inline constexpr long kCompensatedBlockLength = 10000;

/// Means of consecutive non-overlapping blocks of `p` rows, starting at row 0.
/// Rows past k·p are ignored.
template <typename Derived>
Matrix block_means(const Eigen::MatrixBase<Derived>& rows, long p, long k) {
  if (p < 1 || k < 0) {
    throw InvalidArgument("block_means: need p >= 1 and k >= 0");
  }
  if (rows.rows() < k * p) {
    throw InvalidArgument("block_means: " + std::to_string(rows.rows()) +
                          " rows cannot fill " + std::to_string(k) + " blocks of " +
                          std::to_string(p));
  }
  const Eigen::Index cols = rows.cols();
  Matrix out(k, cols);
  const double inv_p = 1.0 / static_cast<double>(p);
  if (p <= kCompensatedBlockLength) {
    for (long j = 0; j < k; ++j) {
      out.row(j) = rows.middleRows(j * p, p).colwise().sum() * inv_p;
    }
    return out;
  }
  for (long j = 0; j < k; ++j) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      detail::CompensatedSum sum;
      for (long i = j * p; i < (j + 1) * p; ++i) sum.add(rows(i, c));
      out(j, c) = sum.value() / static_cast<double>(p);
    }
  }
  return out;
}

/// Local means of the observations on the scheme's blocks (block j uses
/// observation indices jp … jp+p−1).
LocalMeanSeries local_means(const ObservationSeries& obs, const SamplingScheme& scheme);

}  // namespace diffnoise
