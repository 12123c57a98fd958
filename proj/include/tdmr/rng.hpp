#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace tdmr {

// All randomness in the library flows from a single root seed. Sub-streams
// are derived as seed_for(root, stage_tag, index), so any stage or trial can
// be reproduced in isolation and paired-seed comparisons share media exactly.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_tag(std::string_view tag) {
  // FNV-1a, folded through splitmix for avalanche.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return splitmix64(h);
}

inline std::uint64_t seed_for(std::uint64_t root, std::string_view stage,
                              std::uint64_t index = 0) {
  return splitmix64(root ^ hash_tag(stage) ^ splitmix64(index * 0x9e3779b97f4a7c15ULL + 1));
}

// Small counter-based generator; one instance per logical stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(splitmix64(seed ^ 0x6a09e667f3bcc909ULL)) {}

  std::uint64_t next_u64() {
    state_ = splitmix64(state_);
    return state_;
  }

  // Uniform in [0, 1).
  double next_double() { return (next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) {
    // Modulo bias is < 2^-40 for the n used here; acceptable for simulation.
    return next_u64() % n;
  }

  int sign_bit() { return (next_u64() & 1) ? +1 : -1; }

  // Marsaglia polar method.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = uniform(-1.0, 1.0);
      v = uniform(-1.0, 1.0);
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    have_spare_ = true;
    return u * f;
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Stateless per-item uniform draw: pure function of (seed, item index). Used
// where determinism must not depend on iteration order (e.g. grain flips).
inline double unit_draw(std::uint64_t seed, std::uint64_t item) {
  return (splitmix64(seed ^ splitmix64(item + 0x2545f4914f6cdd1dULL)) >> 11) * 0x1.0p-53;
}

}  // namespace tdmr
