#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace tdmr {

// Row-major tracks x downtrack-positions array. Track 0 is the top row.
template <typename T>
class Block2D {
 public:
  Block2D() = default;
  Block2D(int tracks, int length, T fill = T{})
      : tracks_(tracks), length_(length), data_(static_cast<std::size_t>(tracks) * length, fill) {
    if (tracks < 0 || length < 0) throw std::invalid_argument("Block2D: negative dims");
  }

  int tracks() const { return tracks_; }
  int length() const { return length_; }
  bool empty() const { return data_.empty(); }

  T& at(int t, int k) { return data_[static_cast<std::size_t>(t) * length_ + k]; }
  const T& at(int t, int k) const { return data_[static_cast<std::size_t>(t) * length_ + k]; }

  T* row(int t) { return data_.data() + static_cast<std::size_t>(t) * length_; }
  const T* row(int t) const { return data_.data() + static_cast<std::size_t>(t) * length_; }

  std::vector<T>& raw() { return data_; }
  const std::vector<T>& raw() const { return data_; }

  bool same_shape(const Block2D& o) const { return tracks_ == o.tracks_ && length_ == o.length_; }

 private:
  int tracks_ = 0;
  int length_ = 0;
  std::vector<T> data_;
};

// Coded bits, entries strictly +/-1.
struct BitBlock {
  Block2D<std::int8_t> bits;
  // Known rows written above/below the detected tracks. Index i covers
  // downtrack position i-1 (one extra entry on each side for corner
  // neighbors), so the vectors have length bits.length()+2 when present.
  std::vector<std::int8_t> top_boundary;
  std::vector<std::int8_t> bottom_boundary;

  int tracks() const { return bits.tracks(); }
  int length() const { return bits.length(); }
};

// Read-back samples; nominal range is about [-2, +2] after calibration.
struct ReadbackBlock {
  Block2D<double> samples;
  int tracks() const { return samples.tracks(); }
  int length() const { return samples.length(); }
};

// Per-track, per-position log-likelihood ratios, LLR = log P(+1)/P(-1).
struct LlrBlock {
  Block2D<double> llrs;
  int tracks() const { return llrs.tracks(); }
  int length() const { return llrs.length(); }
};

inline void validate_bits(const BitBlock& b) {
  for (const auto v : b.bits.raw())
    if (v != +1 && v != -1) throw std::invalid_argument("BitBlock: entries must be +/-1");
}

// Labels for the 3x3 cell neighborhood around a target bit U:
//
//     F A E      (track above)
//     B U D      (target track)
//     G C H      (track below)
//
// Offsets are (track delta, downtrack delta) with track 0 at the top.
enum class Neighbor : int { F = 0, A, E, B, D, G, C, H, U };

struct NeighborOffset {
  int dt;  // track offset
  int dk;  // downtrack offset
};

inline constexpr NeighborOffset neighbor_offset(Neighbor n) {
  switch (n) {
    case Neighbor::F: return {-1, -1};
    case Neighbor::A: return {-1, 0};
    case Neighbor::E: return {-1, +1};
    case Neighbor::B: return {0, -1};
    case Neighbor::D: return {0, +1};
    case Neighbor::G: return {+1, -1};
    case Neighbor::C: return {+1, 0};
    case Neighbor::H: return {+1, +1};
    case Neighbor::U: return {0, 0};
  }
  return {0, 0};
}

}  // namespace tdmr
