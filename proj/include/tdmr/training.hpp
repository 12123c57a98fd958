#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tdmr/medium.hpp"

namespace tdmr {

// The three horizontal influence groups of the 3x3 neighborhood.
enum class Group : std::uint8_t { FAE = 0, BD = 1, GCH = 2 };

// A 3x3 training pattern is indexed by 9 bits, one per cell in row-major
// order (F A E / B U D / G C H); bit set means +1.
constexpr int kPatternCount = 512;

inline std::int8_t pattern_cell(int pattern, int cell) {
  return (pattern >> cell) & 1 ? +1 : -1;
}

inline int pattern_cell_index(Neighbor n) {
  switch (n) {
    case Neighbor::F: return 0;
    case Neighbor::A: return 1;
    case Neighbor::E: return 2;
    case Neighbor::B: return 3;
    case Neighbor::U: return 4;
    case Neighbor::D: return 5;
    case Neighbor::G: return 6;
    case Neighbor::C: return 7;
    case Neighbor::H: return 8;
  }
  return 4;
}

// Pattern index with the given group's bits negated.
inline int flipped_pattern(int pattern, Group g) {
  switch (g) {
    case Group::FAE: return pattern ^ 0b000000111;
    case Group::BD: return pattern ^ 0b000101000;
    case Group::GCH: return pattern ^ 0b111000000;
  }
  return pattern;
}

// Layout of one training block: two leading random guard columns, `repeats`
// groups of (3 pattern columns + 1 random guard column), one trailing guard
// column. All rows carry the same layout; the guard columns are random while
// the pattern columns repeat the fixed 3x3 pattern.
inline int training_width(int repeats) { return 2 + 4 * repeats + 1; }

// Downtrack column of the target bit U for occurrence i.
inline int occurrence_column(int i) { return 2 + 4 * i + 1; }

BitBlock training_bits(int pattern, int repeats, std::uint64_t guard_seed);

struct TrainingFile {
  int pattern = 0;
  int read = 0;
  BitBlock bits;
  ReadbackBlock reads;
};

struct TrainingSetConfig {
  int repeats = 500;
  int reads_per_file = 3;
  std::uint64_t seed = 1;
  FlipModel flip = default_flip_model();
};

// Writes each of the 512 patterns `reads_per_file` times onto the identical
// grain tessellation at the identical start location, with fresh flip
// randomness per read, and streams the resulting files to `sink` in
// (pattern, read) order.
void emit_training_files(const MediaGeometry& geometry, const TrainingSetConfig& cfg,
                         const std::function<void(TrainingFile&&)>& sink);

std::vector<TrainingFile> emit_training_files(const MediaGeometry& geometry,
                                              const TrainingSetConfig& cfg);

// Little-endian binary persistence; one file per (pattern, read) pair.
void save_training_file(const std::string& path, const TrainingFile& file);
TrainingFile load_training_file(const std::string& path);
std::string training_file_name(int pattern, int read);

}  // namespace tdmr
