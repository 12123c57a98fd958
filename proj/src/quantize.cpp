#include "tdmr/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace tdmr {

QuantizerSpec train_lloyd_max(std::span<const double> samples, int bins, double tol, int max_iter,
                              std::vector<double>* mse_trace) {
  if (bins < 1) throw std::invalid_argument("train_lloyd_max: bins >= 1");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());

  std::vector<double> distinct = sorted;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (static_cast<int>(distinct.size()) < bins)
    throw std::invalid_argument("train_lloyd_max: fewer distinct sample values than bins");

  QuantizerSpec spec;
  spec.bins = bins;
  spec.levels.resize(bins);
  if (bins == 1) {
    double mean = 0.0;
    for (double v : sorted) mean += v;
    spec.levels[0] = mean / sorted.size();
    if (mse_trace) {
      double mse = 0.0;
      for (double v : sorted) mse += (v - spec.levels[0]) * (v - spec.levels[0]);
      mse_trace->push_back(mse / sorted.size());
    }
    return spec;
  }

  // Seed the levels with evenly spaced distinct sample values.
  for (int i = 0; i < bins; ++i) {
    const std::size_t idx =
        static_cast<std::size_t>((i + 0.5) / bins * distinct.size());
    spec.levels[i] = distinct[std::min(idx, distinct.size() - 1)];
  }
  std::sort(spec.levels.begin(), spec.levels.end());

  // Prefix sums over the sorted samples make the centroid updates O(bins log n).
  const std::size_t n = sorted.size();
  std::vector<double> psum(n + 1, 0.0), psum2(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    psum[i + 1] = psum[i] + sorted[i];
    psum2[i + 1] = psum2[i] + sorted[i] * sorted[i];
  }

  spec.boundaries.assign(bins - 1, 0.0);
  double prev_mse = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < max_iter; ++iter) {
    for (int i = 0; i + 1 < bins; ++i) spec.boundaries[i] = 0.5 * (spec.levels[i] + spec.levels[i + 1]);

    // Segment [lo, hi) of sorted samples assigned to each level. A sample on
    // a boundary goes to the lower bin (strict < on the upper edge).
    double mse = 0.0;
    std::size_t lo = 0;
    for (int i = 0; i < bins; ++i) {
      const std::size_t hi =
          (i + 1 < bins)
              ? static_cast<std::size_t>(
                    std::upper_bound(sorted.begin() + lo, sorted.end(), spec.boundaries[i]) -
                    sorted.begin())
              : n;
      if (hi > lo) {
        const double cnt = static_cast<double>(hi - lo);
        const double mean = (psum[hi] - psum[lo]) / cnt;
        spec.levels[i] = mean;
        mse += (psum2[hi] - psum2[lo]) - cnt * mean * mean;
      }
      lo = hi;
    }
    mse /= static_cast<double>(n);
    if (mse_trace) mse_trace->push_back(mse);
    if (std::isfinite(prev_mse) && prev_mse - mse <= tol * std::max(prev_mse, 1e-300)) break;
    prev_mse = mse;
  }
  for (int i = 0; i + 1 < bins; ++i) spec.boundaries[i] = 0.5 * (spec.levels[i] + spec.levels[i + 1]);
  return spec;
}

int quantize(const QuantizerSpec& spec, double value) {
  // Number of boundaries strictly below value; equals lower-bin tie-break.
  const auto it = std::lower_bound(spec.boundaries.begin(), spec.boundaries.end(), value);
  return static_cast<int>(it - spec.boundaries.begin());
}

}  // namespace tdmr
