#pragma once

#include <span>
#include <vector>

namespace tdmr {

// Read values are binned with trained Lloyd-Max quantizers; the local area
// influence values use a fixed 41-bin linear grid on [-2, 2] whose middle
// bin (index 20) is centered on zero.
constexpr int kReadBins = 40;
constexpr int kAlphaBins = 41;
constexpr double kAlphaMin = -2.0;
constexpr double kAlphaMax = 2.0;

inline double alpha_bin_width() { return (kAlphaMax - kAlphaMin) / kAlphaBins; }

inline int alpha_bin(double value) {
  const int b = static_cast<int>((value - kAlphaMin) / alpha_bin_width());
  return b < 0 ? 0 : (b >= kAlphaBins ? kAlphaBins - 1 : b);
}

inline double alpha_bin_center(int bin) { return kAlphaMin + (bin + 0.5) * alpha_bin_width(); }

struct QuantizerSpec {
  int bins = 0;
  std::vector<double> boundaries;  // length bins-1, strictly increasing
  std::vector<double> levels;      // length bins, strictly increasing
};

// Alternating centroid/boundary Lloyd-Max design. MSE is non-increasing per
// iteration; stops when the relative improvement drops below tol. Throws on
// degenerate sample sets (< bins distinct values).
QuantizerSpec train_lloyd_max(std::span<const double> samples, int bins, double tol = 1e-9,
                              int max_iter = 200, std::vector<double>* mse_trace = nullptr);

// Index of the half-open interval containing value; a value equal to a
// boundary goes to the lower bin, out-of-range values clamp.
int quantize(const QuantizerSpec& spec, double value);

}  // namespace tdmr
