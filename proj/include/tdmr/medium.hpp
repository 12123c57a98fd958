#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "tdmr/blocks.hpp"
#include "tdmr/geometry.hpp"

namespace tdmr {

struct Grain {
  double cx = 0.0, cy = 0.0;  // centroid (nm), x downtrack, y cross-track
  double area = 0.0;          // nm^2, clipped to the write region
  int owner_track = 0;        // bit cell containing the centroid
  int owner_pos = 0;
};

// One grain/bit-cell overlap piece; the read integral is evaluated piecewise
// with the midpoint rule (kernel at the piece centroid times piece area).
struct CellPiece {
  std::int32_t grain = 0;
  double area = 0.0;
  double cx = 0.0, cy = 0.0;  // piece centroid
};

// Immutable tessellation shared between write instances of the same medium.
struct Tessellation {
  MediaGeometry geometry;
  int tracks = 0;
  int length = 0;
  std::uint64_t seed = 0;
  std::vector<Grain> grains;
  // pieces_for(t, k): overlap pieces of all grains with bit cell (t, k).
  std::vector<std::vector<CellPiece>> cell_pieces;

  const std::vector<CellPiece>& pieces_for(int t, int k) const {
    return cell_pieces[static_cast<std::size_t>(t) * length + k];
  }
  double region_area() const { return tracks * geometry.track_pitch * length * geometry.bit_length; }
};

// Grain flip model applied during write: a grain keeps the polarity of the
// bit owning its centroid, then flips with probability
// p(d) = p0 * exp(-d / lambda), d = downtrack distance from the grain
// centroid to the nearest write transition on its track. lambda = +inf gives
// a distance-independent flip probability p0.
struct FlipModel {
  double p0 = 0.0;
  double lambda_nm = 4.0;

  double probability(double transition_distance) const;
};

// Calibrated defaults for the surrogate medium (see calibrate_flip_model in
// tools; frozen so the raw thresholded BER lands near the 0.185 operating
// point for the default geometry).
FlipModel default_flip_model();

class GrainMedium {
 public:
  GrainMedium() = default;
  GrainMedium(std::shared_ptr<const Tessellation> tess, std::vector<std::int8_t> magnetization)
      : tess_(std::move(tess)), mag_(std::move(magnetization)) {}

  const Tessellation& tessellation() const { return *tess_; }
  std::shared_ptr<const Tessellation> tessellation_ptr() const { return tess_; }
  const MediaGeometry& geometry() const { return tess_->geometry; }
  int tracks() const { return tess_->tracks; }
  int length() const { return tess_->length; }
  std::size_t grain_count() const { return tess_->grains.size(); }

  std::int8_t magnetization(std::size_t grain) const { return mag_[grain]; }
  const std::vector<std::int8_t>& magnetizations() const { return mag_; }

  // Read-back value centered on bit cell (t, k); sums kernel-weighted grain
  // magnetization over the 3x3 cell neighborhood.
  double read_cell(int t, int k) const;

 private:
  std::shared_ptr<const Tessellation> tess_;
  std::vector<std::int8_t> mag_;  // per grain, +/-1
};

// Seeded Voronoi tessellation of a tracks x length bit-cell region; all
// grains start magnetized +1. Deterministic in (geometry, dims, seed).
GrainMedium generate_medium(const MediaGeometry& geometry, int tracks, int length,
                            std::uint64_t seed);

// Writes a bit block: every grain takes the polarity of the bit cell owning
// its centroid, then may flip per the model. Pure function of inputs + seed.
GrainMedium write_block(const GrainMedium& medium, const BitBlock& bits, const FlipModel& flip,
                        std::uint64_t seed);

// Reads the requested tracks across the full length of the medium.
ReadbackBlock read_block(const GrainMedium& medium, const std::vector<int>& reader_tracks);

// Empirical grains per bit cell over the whole medium.
double empirical_grains_per_bit(const GrainMedium& medium);

}  // namespace tdmr
