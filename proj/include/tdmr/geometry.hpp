#pragma once

#include <cmath>
#include <stdexcept>

namespace tdmr {

// 2D read-head impulse response, evaluated relative to the center of the
// target bit cell. Truncated to a 3x3 bit-cell span. sigma <= 0 selects a
// flat (constant) response inside the span, used by tests that need exact
// quadrature.
struct ReaderKernel {
  double amplitude = 1.0;
  double sigma_down = 0.0;   // nm; Gaussian std dev downtrack (0 = flat)
  double sigma_cross = 0.0;  // nm; Gaussian std dev cross-track (0 = flat)
  double half_span_down = 0.0;   // nm; 1.5 * bit_length for the 3x3 span
  double half_span_cross = 0.0;  // nm; 1.5 * track_pitch

  double evaluate(double dx, double dy) const {
    if (std::abs(dx) > half_span_down || std::abs(dy) > half_span_cross) return 0.0;
    double v = amplitude;
    if (sigma_down > 0.0) v *= std::exp(-0.5 * dx * dx / (sigma_down * sigma_down));
    if (sigma_cross > 0.0) v *= std::exp(-0.5 * dy * dy / (sigma_cross * sigma_cross));
    return v;
  }

  // Exact continuum integral over the truncation window.
  double window_integral() const {
    auto axis = [](double sigma, double half_span) {
      if (sigma <= 0.0) return 2.0 * half_span;
      return sigma * std::sqrt(2.0 * M_PI) * std::erf(half_span / (sigma * std::sqrt(2.0)));
    };
    return amplitude * axis(sigma_down, half_span_down) * axis(sigma_cross, half_span_cross);
  }
};

// Half-amplitude width w of a Gaussian -> sigma.
inline double sigma_from_half_amplitude_width(double w) {
  return w / (2.0 * std::sqrt(2.0 * std::log(2.0)));
}

struct MediaGeometry {
  double track_pitch = 18.0;    // nm
  double bit_length = 11.0;     // nm
  double grains_per_bit = 3.491;
  ReaderKernel reader;

  void validate() const {
    if (!(track_pitch > 0.0) || !(bit_length > 0.0) || !(grains_per_bit > 0.0))
      throw std::invalid_argument("MediaGeometry: track_pitch, bit_length, grains_per_bit must be > 0");
    if (!(reader.window_integral() > 0.0))
      throw std::invalid_argument("MediaGeometry: reader response must integrate to a positive value");
  }
};

// Default geometry: Gaussian reader with half-amplitude widths 0.7*TP
// cross-track and 1.5*BL downtrack, truncated to the 3x3 cell span and
// scaled so an all-ones medium reads +2.
inline MediaGeometry default_geometry(double track_pitch = 18.0, double bit_length = 11.0,
                                      double grains_per_bit = 3.491) {
  MediaGeometry g;
  g.track_pitch = track_pitch;
  g.bit_length = bit_length;
  g.grains_per_bit = grains_per_bit;
  g.reader.sigma_down = sigma_from_half_amplitude_width(1.5 * bit_length);
  g.reader.sigma_cross = sigma_from_half_amplitude_width(0.7 * track_pitch);
  g.reader.half_span_down = 1.5 * bit_length;
  g.reader.half_span_cross = 1.5 * track_pitch;
  g.reader.amplitude = 1.0;
  g.reader.amplitude = 2.0 / g.reader.window_integral();
  g.validate();
  return g;
}

}  // namespace tdmr
