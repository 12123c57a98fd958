#pragma once

#include <algorithm>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "tdmr/blocks.hpp"
#include "tdmr/equalize.hpp"

namespace tdmr {

// A trellis stage decides one symbol: a column of bits_per_symbol coded bits
// (one per jointly detected track). The state holds the previous `memory`
// symbols. The observation for column `pos` is consumed at stage
// pos + lookahead, when every bit it depends on has been decided.
class TrellisModel {
 public:
  virtual ~TrellisModel() = default;
  virtual int bits_per_symbol() const = 0;
  virtual int memory() const = 0;
  virtual int lookahead() const = 0;
  virtual int length() const = 0;
  // Log-likelihood of the observation at column pos given the bit window.
  // window holds memory()+1 symbols, oldest first; window[i] is the symbol
  // of stage (pos + lookahead) - memory() + i.
  virtual double log_observation(int pos, std::span<const int> window) const = 0;

  int symbol_count() const { return 1 << bits_per_symbol(); }
  int state_count() const { return 1 << (bits_per_symbol() * memory()); }
};

struct BcjrConfig {
  // Known symbol value written before column 0 / after column N-1. A symbol
  // packs its tracks' bits as bit j = track j, set meaning +1. nullopt
  // leaves that boundary free (uniform over states).
  std::optional<int> left_context;
  std::optional<int> right_context;
  // Emit extrinsic LLRs (a-posteriori minus a-priori) instead of full APP.
  bool extrinsic = false;
};

// Exact forward-backward MAP detection in the log domain. a_priori, when
// given, must have bits_per_symbol() tracks and length() columns; its LLRs
// enter the branch metrics additively. Output is one LLR per track per column.
LlrBlock bcjr_detect(const TrellisModel& model, const LlrBlock* a_priori = nullptr,
                     const BcjrConfig& cfg = {});

// ---- Mask-driven AWGN models -------------------------------------------

// Single-track partial-response trellis: noiseless branch output is the
// centered mask applied to the bit window, noise is white Gaussian.
class MaskAwgn1D final : public TrellisModel {
 public:
  MaskAwgn1D(TargetMask mask, std::vector<double> observations, double sigma);
  int bits_per_symbol() const override { return 1; }
  int memory() const override { return static_cast<int>(mask_.taps.size()) - 1; }
  int lookahead() const override { return mask_.center_col(); }
  int length() const override { return static_cast<int>(obs_.size()); }
  double log_observation(int pos, std::span<const int> window) const override;

 private:
  TargetMask mask_;
  std::vector<double> obs_;
  double inv_two_var_, log_norm_;
};

// Three-track joint trellis over a 3x3 mask; the rows above and below the
// detected tracks are pinned to known boundary bits (length N+2, offset 1).
class Mask2DThreeTrack final : public TrellisModel {
 public:
  Mask2DThreeTrack(TargetMask mask, const ReadbackBlock& observations,
                   std::vector<std::int8_t> top_boundary, std::vector<std::int8_t> bottom_boundary,
                   std::vector<double> sigma_per_track);
  int bits_per_symbol() const override { return 3; }
  int memory() const override { return 2; }
  int lookahead() const override { return 1; }
  int length() const override { return obs_.length(); }
  double log_observation(int pos, std::span<const int> window) const override;

 private:
  TargetMask mask_;
  ReadbackBlock obs_;
  std::vector<std::int8_t> top_, bottom_;
  std::vector<double> inv_two_var_, log_norm_;
};

// ---- Pattern-dependent noise prediction --------------------------------

// Single-track autoregressive media-noise model: for each local bit pattern
// (M past bits through delta future bits), prediction coefficients over the
// last L noise samples and a residual standard deviation.
struct Pdnp1dModel {
  int predictor_order = 4;  // L
  int isi_length = 2;       // I, mask taps - 1
  int lookahead_bits = 1;   // delta
  int pattern_past = 6;     // M
  TargetMask mask;          // 3-tap centered PR mask defining the noise
  std::vector<double> coeffs;  // [pattern][L]
  std::vector<double> sigma;   // [pattern]

  int pattern_count() const { return 1 << (pattern_past + lookahead_bits + 1); }
  int state_bits() const { return std::max(isi_length + predictor_order, pattern_past) + lookahead_bits; }
  int state_count() const { return 1 << state_bits(); }
  void validate() const;
};

// Two-track autoregressive model: per pattern matrix (columns k-J..k+I over
// both tracks), an estimated pair of target means, cross/auto prediction
// matrices P_0..P_Np (P_0 strictly off-diagonal) and a lower-triangular
// residual scale.
struct Pdnp2dModel {
  int predictor_order = 1;  // Np
  int ahead = 1;            // I
  int behind = 1;           // J
  std::vector<double> target;  // [pattern][2]
  std::vector<double> p0_cross;  // [pattern][2]: {P0_12, P0_21}
  std::vector<double> p_coeffs;  // [pattern][Np][2][2], i = 1..Np
  std::vector<double> lambda;    // [pattern][3]: {l11, l21, l22}

  int pattern_bits() const { return 2 * (ahead + behind + 1); }
  int pattern_count() const { return 1 << pattern_bits(); }
  int state_count() const { return 1 << (2 * (predictor_order + ahead + behind)); }
  void validate() const;
};

struct PdnpTrainStats {
  double pattern_mse = 0.0;       // mean squared prediction residual, trained model
  double pooled_mse = 0.0;        // same for the pattern-independent fit
  int fallback_patterns = 0;      // patterns trained from the pooled fit
};

// Least-squares AR fit of the equalizer residual per bit pattern; patterns
// with too few occurrences fall back to the pooled fit.
Pdnp1dModel train_pdnp1d(std::span<const double> equalized, std::span<const std::int8_t> bits,
                         const TargetMask& mask, int L, int M, int delta, int I,
                         PdnpTrainStats* stats = nullptr);

Pdnp2dModel train_pdnp2d(const ReadbackBlock& equalized, const BitBlock& bits, int Np, int I,
                         int J, PdnpTrainStats* stats = nullptr);

// Gaussian log-likelihood of the prediction residual, exposed for tests.
double pdnp_log_metric(double residual, double sigma);

class Pdnp1dTrellis final : public TrellisModel {
 public:
  Pdnp1dTrellis(const Pdnp1dModel& model, std::vector<double> observations);
  int bits_per_symbol() const override { return 1; }
  int memory() const override { return model_.state_bits(); }
  int lookahead() const override { return model_.lookahead_bits; }
  int length() const override { return static_cast<int>(obs_.size()); }
  double log_observation(int pos, std::span<const int> window) const override;

 private:
  const Pdnp1dModel model_;
  std::vector<double> obs_;
};

class Pdnp2dTrellis final : public TrellisModel {
 public:
  Pdnp2dTrellis(const Pdnp2dModel& model, const ReadbackBlock& observations);
  int bits_per_symbol() const override { return 2; }
  int memory() const override { return model_.predictor_order + model_.ahead + model_.behind; }
  int lookahead() const override { return model_.ahead; }
  int length() const override { return obs_.length(); }
  double log_observation(int pos, std::span<const int> window) const override;

 private:
  const Pdnp2dModel model_;
  ReadbackBlock obs_;
};

}  // namespace tdmr
