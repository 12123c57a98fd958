#pragma once

#include <optional>
#include <vector>

#include "tdmr/blocks.hpp"

namespace tdmr {

enum class TargetKind : std::uint8_t { FullResponse = 0, Pr1D = 1, Pr2D = 2 };

// Shaping target for an MMSE equalizer: the full-response scalar 1, a 3-tap
// monic downtrack mask, or a 3x3 monic mask.
struct TargetMask {
  TargetKind kind = TargetKind::FullResponse;
  int rows = 1, cols = 1;
  std::vector<double> taps = {1.0};

  double tap(int r, int c) const { return taps[static_cast<std::size_t>(r) * cols + c]; }
  int center_row() const { return rows / 2; }
  int center_col() const { return cols / 2; }
  void validate() const;

  static TargetMask full_response();
  static TargetMask pr_1d();
  static TargetMask pr_2d();
};

enum class IoShape : std::uint8_t {
  PerTrack1D = 0,      // one 1xT filter applied identically to each of 3 tracks
  ThreeInOneOut = 1,   // 3xT filter, single center-track output
  ThreeInThreeOut = 2, // 3xT filter sliding over boundary-extended inputs, 3 outputs
  TwoInTwoOut = 3,     // two 2xT filters, one per output track
};

struct EqualizerSpec {
  IoShape shape = IoShape::PerTrack1D;
  TargetMask target;
  int num_taps = 15;  // downtrack taps, odd; center tap aligned with the bit
  int in_rows = 1;    // input rows per output
  int outputs = 1;    // distinct tap sets (1 unless TwoInTwoOut)
  std::vector<double> taps;  // [output][in_row][tap]
  std::vector<double> residual_std;  // per output track, from design
  double condition_number = 0.0;

  double tap(int out, int row, int i) const {
    return taps[(static_cast<std::size_t>(out) * in_rows + row) * num_taps + i];
  }
};

struct DesignStats {
  double mse = 0.0;
  double condition_number = 0.0;
  // max_i |sum_n e_n x_{n,i}| / N, normalized by mean regressor power.
  double orthogonality = 0.0;
  bool regularized = false;
};

// Path-1 equalizer: one shared 1xT filter shaping every track to the
// full-response target. Training pools all pairs.
EqualizerSpec design_mmse_per_track(const std::vector<const ReadbackBlock*>& readings,
                                    const std::vector<const BitBlock*>& bits, int num_taps,
                                    DesignStats* stats = nullptr);

// Path-2 center-track equalizer: 3 input tracks, one output shaped to the
// 3-tap downtrack mask on the center track. `center_row` selects the bit row
// of `bits` that the output follows.
EqualizerSpec design_mmse_pr1d(const std::vector<const ReadbackBlock*>& readings,
                               const std::vector<const BitBlock*>& bits, int center_row,
                               const TargetMask& mask, int num_taps, DesignStats* stats = nullptr);

// Path-2 three-track equalizer: a single 3xT filter slid across the three
// output rows; rows above/below the readers are filled with the known
// boundary bits. `bits` must carry 3 + 2 boundary rows (tracks + 2).
EqualizerSpec design_mmse_pr2d(const std::vector<const ReadbackBlock*>& readings,
                               const std::vector<const BitBlock*>& bits, const TargetMask& mask,
                               int num_taps, DesignStats* stats = nullptr);

// Two-track equalizer for the two-track noise-prediction baseline: full MIMO,
// one 2xNc tap set per output row, each row shaped to the 3-tap mask.
EqualizerSpec design_mmse_two_track(const std::vector<const ReadbackBlock*>& readings,
                                    const std::vector<const BitBlock*>& bits,
                                    const TargetMask& mask, int num_taps,
                                    DesignStats* stats = nullptr);

// Applies the equalizer with symmetric zero padding; output position k is
// aligned with bit k. ThreeInThreeOut requires the boundary rows.
ReadbackBlock apply_equalizer(const EqualizerSpec& spec, const ReadbackBlock& input,
                              const std::vector<std::int8_t>* top_boundary = nullptr,
                              const std::vector<std::int8_t>* bottom_boundary = nullptr);

// Desired (target-filtered) bit signal d[r][k] = (mask (*) u)[r][k], with u
// rows beyond the block treated as zero. Exposed for tests and PDNP training.
double target_signal(const TargetMask& mask, const BitBlock& bits, int row, int k);

}  // namespace tdmr
