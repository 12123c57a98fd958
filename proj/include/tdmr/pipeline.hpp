#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "tdmr/archive.hpp"
#include "tdmr/codec.hpp"
#include "tdmr/equalize.hpp"
#include "tdmr/laip.hpp"
#include "tdmr/medium.hpp"
#include "tdmr/trellis.hpp"

namespace tdmr {

enum class DetectionMode : std::uint8_t { CenterTrack = 0, ThreeTrack = 1 };
enum class BoundaryMode : std::uint8_t { Known = 0, ThresholdBoth = 1, FeedbackTop = 2 };

// Everything trained offline that a pipeline run needs. Five bit rows are
// written per block (one boundary row above and below the three data rows);
// the readers cover the three data rows.
struct TrainedSystem {
  MediaGeometry geometry;
  FlipModel flip;
  std::uint64_t seed = 0;  // training root seed; code/coset rebuilds reuse it
  CodeSpec code;
  std::array<CosetSpec, 3> cosets;
  EqualizerSpec eq_fr;    // path 1: shared per-track 1D, full-response target
  EqualizerSpec eq_pr1d;  // path 2, center-track mode
  EqualizerSpec eq_pr2d;  // path 2, three-track mode
  LaipTables laip;

  int row_length() const { return code.transmitted_length(); }
};

struct SystemConfig {
  MediaGeometry geometry = default_geometry();
  FlipModel flip = default_flip_model();
  int info_length = 1024;
  double code_rate = 2.0 / 3.0;
  int eq_taps = 15;
  int eq_train_length = 6000;  // columns per equalizer-design block
  int eq_train_blocks = 2;
  TrainingSetConfig training;  // designed-pattern corpus for the LUT
  std::uint64_t seed = 1;
  int threads = 0;
};

TrainedSystem train_system(const SystemConfig& cfg);

struct PipelineConfig {
  DetectionMode mode = DetectionMode::ThreeTrack;
  BoundaryMode boundary = BoundaryMode::Known;
  std::array<double, 3> w1{0.5, 0.75, 0.5};
  std::array<double, 3> w2{0.7, 0.7, 0.7};
  double clip = 10.0;
  int self_loops = 5;
  int decoder_iters = 50;
  int threads = 0;
  bool bcjr_use_a_priori = true;  // paired ablation switch
};

struct CodedBlock {
  BitBlock written;  // 5 rows: boundary, data x3, boundary
  std::array<std::vector<std::uint8_t>, 3> info;
  std::array<std::vector<std::uint8_t>, 3> transmitted;  // coset+interleaved, written order
};

CodedBlock make_coded_block(const TrainedSystem& sys, std::uint64_t seed);

struct BoundaryEstimate {
  std::vector<std::int8_t> top;     // length N+2, +1 convention at the corners
  std::vector<std::int8_t> bottom;
};

// known: pass-through of the written boundary rows; threshold: sign of the
// boundary rows' own read-back; feedback-top: caller-provided decoded row
// for the top, threshold for the bottom.
BoundaryEstimate apply_boundary_mode(BoundaryMode mode, const GrainMedium& written_medium,
                                     const BitBlock& written,
                                     const std::vector<std::int8_t>* prev_decoded_top = nullptr);

struct TrackCounts {
  long long errors = 0;
  long long total = 0;
  double ber() const { return total ? static_cast<double>(errors) / total : 0.0; }
  void add(bool error) {
    errors += error;
    ++total;
  }
};

struct StageRecord {
  DetectionMode mode = DetectionMode::ThreeTrack;
  std::array<TrackCounts, 3> raw;        // thresholded raw read-back
  std::array<TrackCounts, 3> laip;       // sign of LAIP output LLRs
  std::array<TrackCounts, 3> dec1_info;  // decoder-1 information bits
  std::array<TrackCounts, 3> bcjr;       // detector-only, before decoder 2
  std::array<TrackCounts, 3> dec2_info;  // final decision
  std::array<TrackCounts, 3> boundary;   // boundary-estimate errors (top in [0], bottom in [1])
  std::array<bool, 3> dec1_converged{false, false, false};
  std::array<bool, 3> dec2_converged{false, false, false};
  int dec1_calls = 0;  // one-shot contract: equals the number of decoded rows
  int dec2_calls = 0;
  int frame_errors = 0;
  int frames = 0;
  double max_dec1_input = 0.0;  // max |w1 * clipped LLR| seen at decoder 1
  double seconds = 0.0;

  TrackCounts stage_total(const std::array<TrackCounts, 3>& s) const {
    TrackCounts t;
    for (const auto& c : s) {
      t.errors += c.errors;
      t.total += c.total;
    }
    return t;
  }
};

// A coded block written on a fresh medium; pure function of trial_seed, so
// paired comparisons across detectors share media exactly.
struct WrittenTrial {
  CodedBlock block;
  GrainMedium medium;
};

WrittenTrial make_written_trial(const TrainedSystem& sys, std::uint64_t trial_seed);

// Runs two-path detection on the trial's medium (regenerated from trial_seed
// when not supplied). Scores every stage against the written truth.
StageRecord run_pipeline(const TrainedSystem& sys, const PipelineConfig& cfg,
                         std::uint64_t trial_seed,
                         const std::vector<std::int8_t>* prev_decoded_top = nullptr,
                         const WrittenTrial* trial = nullptr);

// ---- Noise-prediction baselines (same media, for comparisons) ----------

struct Pdnp1dBaseline {
  EqualizerSpec eq;  // 1-in/1-out on the center reader row
  Pdnp1dModel model;
};

struct Pdnp2dBaseline {
  EqualizerSpec eq;  // 2-in/2-out over the top two reader rows
  Pdnp2dModel model;
  int track0 = 1;  // written rows jointly detected
  int track1 = 2;
};

struct PdnpBaselineConfig {
  int L = 4, I1 = 2, delta = 1, M = 6;     // single-track model
  int Nc = 11, Np = 1, I2 = 1, J = 1;      // two-track model
  int train_blocks = 4;
  int train_length = 6000;
};

Pdnp1dBaseline train_pdnp1d_baseline(const TrainedSystem& sys, const PdnpBaselineConfig& cfg);
Pdnp2dBaseline train_pdnp2d_baseline(const TrainedSystem& sys, const PdnpBaselineConfig& cfg);

// Detector-only LLRs for the baselines on an existing written medium.
LlrBlock run_pdnp1d_detector(const Pdnp1dBaseline& base, const GrainMedium& written,
                             const LlrBlock* a_priori = nullptr);
LlrBlock run_pdnp2d_detector(const Pdnp2dBaseline& base, const GrainMedium& written);

}  // namespace tdmr
