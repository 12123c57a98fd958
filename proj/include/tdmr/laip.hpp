#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "tdmr/blocks.hpp"
#include "tdmr/equalize.hpp"
#include "tdmr/quantize.hpp"
#include "tdmr/training.hpp"

namespace tdmr {

// Conditioning layouts for the stored PMF tables. Each group has a fully
// conditioned table (all group readings + bits), a reading-only table for
// the initial detection loop, and reduced tables for positions where part of
// the 3x3 neighborhood lies on a known-bit boundary without readings.
enum class TableVariant : std::uint8_t {
  Full = 0,      // all group readings + y_U, group bits + u_U
  NoBits = 1,    // all group readings + y_U only
  RowBoundary = 2,   // y_U only, all bits (U in the top row for FAE / bottom for GCH)
  FirstColumn = 3,   // drops the leftmost group reading, all bits
  LastColumn = 4,    // drops the rightmost group reading, all bits
};

// 41-bin PMF over the influence value grid, plus its convolution extension.
using Pmf41 = std::array<double, kAlphaBins>;

struct PmfEntry {
  Pmf41 probs;
};

// One conditional PMF lookup table: sparse map from packed conditioning
// indices (reading bins, then bits) to a normalized 41-bin PMF over alpha.
class PmfTable {
 public:
  PmfTable() = default;
  PmfTable(Group group, TableVariant variant);

  Group group() const { return group_; }
  TableVariant variant() const { return variant_; }
  int reading_axes() const { return n_readings_; }
  int bit_axes() const { return n_bits_; }
  std::size_t size() const { return entries_.size(); }

  // Which of the group's members (plus U, always last) contribute a reading
  // axis / a bit axis, as neighborhood labels in conditioning order.
  const std::vector<Neighbor>& reading_members() const { return reading_members_; }
  const std::vector<Neighbor>& bit_members() const { return bit_members_; }

  static std::uint64_t pack_key(std::span<const int> reading_bins, std::span<const int> bit_signs);

  // Stored PMF for the packed key, or nullptr when the cell was never
  // populated (the caller substitutes the point mass on the center bin).
  const Pmf41* find(std::uint64_t key) const;

  void add_count(std::uint64_t key, int alpha_bin, double weight = 1.0);
  void merge_counts(const PmfTable& other);

  // Training post-processing: smooth counts along every reading axis with a
  // symmetric 3-tap kernel, enforce anti-symmetry against the reflected
  // conditioning, then normalize each cell to a PMF.
  void finalize();

  // Raw access for persistence; entries are (key, 41 doubles) pairs.
  const std::unordered_map<std::uint64_t, Pmf41>& cells() const { return entries_; }
  void insert_raw(std::uint64_t key, const Pmf41& probs) { entries_[key] = probs; }

  std::uint64_t reflect_key(std::uint64_t key) const;

 private:
  Group group_ = Group::FAE;
  TableVariant variant_ = TableVariant::Full;
  int n_readings_ = 0;
  int n_bits_ = 0;
  std::vector<Neighbor> reading_members_;
  std::vector<Neighbor> bit_members_;
  std::unordered_map<std::uint64_t, Pmf41> entries_;
  bool finalized_ = false;
};

// The trained detector state: per-track quantizers plus all PMF tables.
struct LaipTables {
  std::vector<QuantizerSpec> quantizers;  // one per reader track
  std::vector<PmfTable> tables;

  const PmfTable& table(Group g, TableVariant v) const;
  PmfTable& table(Group g, TableVariant v);
  static std::vector<PmfTable> make_empty_set();
};

// The point-mass fallback PMF for never-seen conditioning tuples.
Pmf41 center_point_mass();

// (y_with - y_without) / 2 averaged over paired occurrences.
double estimate_lai(std::span<const double> with_reads, std::span<const double> without_reads);

struct LaipTrainConfig {
  int threads = 0;  // 0 = hardware concurrency
};

// Offline training over equalized designed-pattern files. `files` must hold
// every (pattern, read) produced by emit_training_files, already passed
// through the shared path-1 equalizer; quantizers must come from the same
// equalized data.
LaipTables train_tables(const std::vector<TrainingFile>& equalized_files,
                        std::vector<QuantizerSpec> quantizers,
                        const LaipTrainConfig& cfg = {});

// Per-bit prior probability of +1 for the bits conditioning a lookup.
struct BitPriors {
  std::array<double, 4> p_plus;  // in the table's bit-member order
  int count = 0;
};

// Looks up (and, when priors are given, marginalizes) one group PMF.
// reading_bins follow the variant's reading-member order.
Pmf41 lookup_pmf(const PmfTable& table, std::span<const int> reading_bins,
                 const BitPriors* priors);

// Discrete convolution of the three group PMFs on the influence value grid.
// The support triples; the result lives on the 121-bin extended grid whose
// center bin maps to value zero.
constexpr int kAlphaExtBins = 3 * kAlphaBins - 2;
using PmfExt = std::array<double, kAlphaExtBins>;
PmfExt total_influence(const Pmf41& fae, const Pmf41& bd, const Pmf41& gch);

// Log-likelihood ratio for the target bit from the total-influence PMF and
// the target reading. Extended-grid mass outside [-2, 2] folds into the end
// bins. Clamped to +/-30 when one side has no mass.
double compute_llr(const PmfExt& pmf_total, double y_center);
constexpr double kLaipLlrClamp = 30.0;

// Known bits surrounding the detected block: rows above/below the readers
// (length N+2, offset 1 for the corner columns) and the off-block columns on
// each side (one value per reader track).
struct BoundaryBits {
  std::vector<std::int8_t> top;
  std::vector<std::int8_t> bottom;
  std::array<std::int8_t, 3> left{+1, +1, +1};
  std::array<std::int8_t, 3> right{+1, +1, +1};
};

struct DetectConfig {
  int self_loops = 5;
  int threads = 0;
  std::vector<LlrBlock>* loop_trace = nullptr;  // per-loop LLRs, for diagnostics
};

// Real-time detection over three equalized tracks: the initial loop uses the
// reading-only tables, later loops convert the previous loop's LLRs into
// per-bit priors and marginalize the bit-conditioned tables. Boundary
// positions use the reduced tables with the known boundary bits pinned.
LlrBlock laip_detect(const ReadbackBlock& equalized, const LaipTables& tables,
                     const BoundaryBits& boundary, const LlrBlock* a_priori = nullptr,
                     const DetectConfig& cfg = {});

}  // namespace tdmr
