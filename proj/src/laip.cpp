#include "tdmr/laip.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace tdmr {

namespace {

constexpr int kBinFieldWidth = 6;  // 40 reading bins fit in 6 bits

std::vector<Neighbor> group_members(Group g) {
  switch (g) {
    case Group::FAE: return {Neighbor::F, Neighbor::A, Neighbor::E};
    case Group::BD: return {Neighbor::B, Neighbor::D};
    case Group::GCH: return {Neighbor::G, Neighbor::C, Neighbor::H};
  }
  return {};
}

int usable_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace

PmfTable::PmfTable(Group group, TableVariant variant) : group_(group), variant_(variant) {
  std::vector<Neighbor> members = group_members(group);
  bit_members_ = members;
  bit_members_.push_back(Neighbor::U);

  reading_members_ = members;
  switch (variant) {
    case TableVariant::Full:
      break;
    case TableVariant::NoBits:
      bit_members_.clear();
      break;
    case TableVariant::RowBoundary:
      reading_members_.clear();  // whole group row lies on the boundary
      break;
    case TableVariant::FirstColumn:
      reading_members_.erase(reading_members_.begin());  // leftmost member has no reading
      break;
    case TableVariant::LastColumn:
      reading_members_.pop_back();  // rightmost member has no reading
      break;
  }
  reading_members_.push_back(Neighbor::U);

  n_readings_ = static_cast<int>(reading_members_.size());
  n_bits_ = static_cast<int>(bit_members_.size());
}

std::uint64_t PmfTable::pack_key(std::span<const int> reading_bins,
                                 std::span<const int> bit_signs) {
  std::uint64_t key = 0;
  int shift = 0;
  for (int b : reading_bins) {
    key |= static_cast<std::uint64_t>(b) << shift;
    shift += kBinFieldWidth;
  }
  for (int s : bit_signs) {
    key |= static_cast<std::uint64_t>(s > 0 ? 1 : 0) << shift;
    shift += 1;
  }
  return key;
}

std::uint64_t PmfTable::reflect_key(std::uint64_t key) const {
  std::uint64_t out = 0;
  int shift = 0;
  for (int i = 0; i < n_readings_; ++i) {
    const std::uint64_t bin = (key >> shift) & ((1u << kBinFieldWidth) - 1);
    out |= static_cast<std::uint64_t>(kReadBins - 1 - bin) << shift;
    shift += kBinFieldWidth;
  }
  for (int i = 0; i < n_bits_; ++i) {
    const std::uint64_t bit = (key >> shift) & 1u;
    out |= (bit ^ 1u) << shift;
    shift += 1;
  }
  return out;
}

const Pmf41* PmfTable::find(std::uint64_t key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

void PmfTable::add_count(std::uint64_t key, int alpha_bin, double weight) {
  auto [it, inserted] = entries_.try_emplace(key);
  if (inserted) it->second.fill(0.0);
  it->second[alpha_bin] += weight;
}

void PmfTable::merge_counts(const PmfTable& other) {
  for (const auto& [key, vec] : other.entries_) {
    auto [it, inserted] = entries_.try_emplace(key);
    if (inserted) it->second.fill(0.0);
    for (int b = 0; b < kAlphaBins; ++b) it->second[b] += vec[b];
  }
}

void PmfTable::finalize() {
  if (finalized_) return;

  // Smooth counts along each reading axis with the symmetric [1/4, 1/2, 1/4]
  // kernel; edge mass that would leave the bin range is dropped and restored
  // by the final per-cell normalization.
  for (int axis = 0; axis < n_readings_; ++axis) {
    const int shift = axis * kBinFieldWidth;
    const std::uint64_t field = static_cast<std::uint64_t>((1u << kBinFieldWidth) - 1) << shift;
    std::unordered_map<std::uint64_t, Pmf41> smoothed;
    smoothed.reserve(entries_.size() * 2);
    for (const auto& [key, vec] : entries_) {
      const int bin = static_cast<int>((key & field) >> shift);
      for (int d = -1; d <= 1; ++d) {
        const int nb = bin + d;
        if (nb < 0 || nb >= kReadBins) continue;
        const double w = d == 0 ? 0.5 : 0.25;
        const std::uint64_t nkey = (key & ~field) | (static_cast<std::uint64_t>(nb) << shift);
        auto [it, inserted] = smoothed.try_emplace(nkey);
        if (inserted) it->second.fill(0.0);
        for (int b = 0; b < kAlphaBins; ++b) it->second[b] += w * vec[b];
      }
    }
    entries_ = std::move(smoothed);
  }

  // Enforce anti-symmetry: average each cell with the alpha-reflection of its
  // reflected conditioning and materialize both, so that
  // P(b | v, s) == P(40-b | 39-v, -s) holds exactly.
  std::unordered_map<std::uint64_t, Pmf41> symmetric;
  symmetric.reserve(entries_.size() * 2);
  for (const auto& [key, vec] : entries_) {
    if (symmetric.count(key)) continue;
    const std::uint64_t rkey = reflect_key(key);
    const auto rit = entries_.find(rkey);
    Pmf41 avg;
    for (int b = 0; b < kAlphaBins; ++b) {
      const double mirrored = rit == entries_.end() ? 0.0 : rit->second[kAlphaBins - 1 - b];
      avg[b] = 0.5 * (vec[b] + mirrored);
    }
    Pmf41 ravg;
    for (int b = 0; b < kAlphaBins; ++b) ravg[b] = avg[kAlphaBins - 1 - b];
    symmetric[key] = avg;
    symmetric[rkey] = ravg;
  }
  entries_ = std::move(symmetric);

  // Normalize each cell into a PMF; cells with no mass revert to the
  // point-mass fallback handled at lookup, so drop them.
  for (auto it = entries_.begin(); it != entries_.end();) {
    double sum = 0.0;
    for (double v : it->second) sum += v;
    if (sum <= 0.0) {
      it = entries_.erase(it);
      continue;
    }
    for (double& v : it->second) v /= sum;
    ++it;
  }
  finalized_ = true;
}

std::vector<PmfTable> LaipTables::make_empty_set() {
  std::vector<PmfTable> out;
  for (Group g : {Group::FAE, Group::BD, Group::GCH}) {
    out.emplace_back(g, TableVariant::Full);
    out.emplace_back(g, TableVariant::NoBits);
    out.emplace_back(g, TableVariant::FirstColumn);
    out.emplace_back(g, TableVariant::LastColumn);
  }
  out.emplace_back(Group::FAE, TableVariant::RowBoundary);
  out.emplace_back(Group::GCH, TableVariant::RowBoundary);
  return out;
}

const PmfTable& LaipTables::table(Group g, TableVariant v) const {
  for (const auto& t : tables)
    if (t.group() == g && t.variant() == v) return t;
  throw std::invalid_argument("LaipTables: no table for requested group/variant");
}

PmfTable& LaipTables::table(Group g, TableVariant v) {
  for (auto& t : tables)
    if (t.group() == g && t.variant() == v) return t;
  throw std::invalid_argument("LaipTables: no table for requested group/variant");
}

Pmf41 center_point_mass() {
  Pmf41 p;
  p.fill(0.0);
  p[(kAlphaBins - 1) / 2] = 1.0;
  return p;
}

double estimate_lai(std::span<const double> with_reads, std::span<const double> without_reads) {
  if (with_reads.empty() || with_reads.size() != without_reads.size())
    throw std::invalid_argument("estimate_lai: need matched non-empty read pairs");
  double acc = 0.0;
  for (std::size_t i = 0; i < with_reads.size(); ++i)
    acc += 0.5 * (with_reads[i] - without_reads[i]);
  return acc / static_cast<double>(with_reads.size());
}

namespace {

struct TrainingIndex {
  const TrainingFile* file = nullptr;
};

// Neighborhood readings of occurrence `col` in a 3-track training file; the
// target row is always the middle track.
double member_reading(const TrainingFile& f, Neighbor n, int col) {
  const NeighborOffset off = neighbor_offset(n);
  return f.reads.samples.at(1 + off.dt, col + off.dk);
}

void train_patterns(const std::vector<std::vector<const TrainingFile*>>& by_pattern,
                    const std::array<std::array<double, kPatternCount>, 3>& alpha_mean,
                    const std::vector<QuantizerSpec>& quantizers, int pattern_begin,
                    int pattern_end, std::vector<PmfTable>& tables) {
  std::vector<int> bins, signs;
  for (int pattern = pattern_begin; pattern < pattern_end; ++pattern) {
    for (const TrainingFile* file : by_pattern[pattern]) {
      const int repeats = (file->reads.length() - 3) / 4;
      for (int i = 0; i < repeats; ++i) {
        const int col = occurrence_column(i);
        for (PmfTable& table : tables) {
          const int g = static_cast<int>(table.group());
          const int abin = alpha_bin(alpha_mean[g][pattern]);
          bins.clear();
          for (Neighbor n : table.reading_members()) {
            const NeighborOffset off = neighbor_offset(n);
            bins.push_back(
                quantize(quantizers[1 + off.dt], member_reading(*file, n, col)));
          }
          signs.clear();
          for (Neighbor n : table.bit_members())
            signs.push_back(pattern_cell(pattern, pattern_cell_index(n)));
          table.add_count(PmfTable::pack_key(bins, signs), abin);
        }
      }
    }
  }
}

}  // namespace

LaipTables train_tables(const std::vector<TrainingFile>& equalized_files,
                        std::vector<QuantizerSpec> quantizers, const LaipTrainConfig& cfg) {
  if (equalized_files.empty()) throw std::invalid_argument("train_tables: empty training set");
  if (quantizers.size() != 3) throw std::invalid_argument("train_tables: need 3 track quantizers");

  std::vector<std::vector<const TrainingFile*>> by_pattern(kPatternCount);
  for (const TrainingFile& f : equalized_files) {
    if (f.pattern < 0 || f.pattern >= kPatternCount)
      throw std::invalid_argument("train_tables: pattern index out of range");
    if (f.reads.tracks() != 3) throw std::invalid_argument("train_tables: files must have 3 tracks");
    by_pattern[f.pattern].push_back(&f);
  }
  for (int p = 0; p < kPatternCount; ++p)
    if (by_pattern[p].empty())
      throw std::invalid_argument("train_tables: missing training files for some patterns");

  const int reads = static_cast<int>(by_pattern[0].size());
  const int repeats = (equalized_files[0].reads.length() - 3) / 4;

  // Pattern-pair influence estimates: mean over occurrences and reads of
  // (y_U with the group as written - y_U with the group flipped) / 2.
  std::array<std::array<double, kPatternCount>, 3> alpha_mean{};
  for (int g = 0; g < 3; ++g) {
    for (int p = 0; p < kPatternCount; ++p) {
      const int q = flipped_pattern(p, static_cast<Group>(g));
      double acc = 0.0;
      std::size_t n = 0;
      for (int d = 0; d < std::min(reads, static_cast<int>(by_pattern[q].size())); ++d) {
        const TrainingFile& fp = *by_pattern[p][d];
        const TrainingFile& fq = *by_pattern[q][d];
        for (int i = 0; i < repeats; ++i) {
          const int col = occurrence_column(i);
          acc += 0.5 * (fp.reads.samples.at(1, col) - fq.reads.samples.at(1, col));
          ++n;
        }
      }
      alpha_mean[g][p] = n ? acc / static_cast<double>(n) : 0.0;
    }
  }

  const int n_threads = std::min(usable_threads(cfg.threads), kPatternCount);
  std::vector<std::vector<PmfTable>> partials(n_threads);
  std::vector<std::thread> workers;
  const int chunk = (kPatternCount + n_threads - 1) / n_threads;
  for (int w = 0; w < n_threads; ++w) {
    partials[w] = LaipTables::make_empty_set();
    const int begin = w * chunk;
    const int end = std::min(kPatternCount, begin + chunk);
    workers.emplace_back([&, w, begin, end] {
      train_patterns(by_pattern, alpha_mean, quantizers, begin, end, partials[w]);
    });
  }
  for (auto& t : workers) t.join();

  LaipTables out;
  out.quantizers = std::move(quantizers);
  out.tables = std::move(partials[0]);
  for (int w = 1; w < n_threads; ++w)
    for (std::size_t i = 0; i < out.tables.size(); ++i)
      out.tables[i].merge_counts(partials[w][i]);
  for (auto& t : out.tables) t.finalize();
  return out;
}

Pmf41 lookup_pmf(const PmfTable& table, std::span<const int> reading_bins,
                 const BitPriors* priors) {
  if (static_cast<int>(reading_bins.size()) != table.reading_axes())
    throw std::invalid_argument("lookup_pmf: reading bin count mismatch");

  if (table.bit_axes() == 0 || priors == nullptr) {
    if (table.bit_axes() != 0)
      throw std::invalid_argument("lookup_pmf: bit-conditioned table needs priors");
    const Pmf41* p = table.find(PmfTable::pack_key(reading_bins, {}));
    return p ? *p : center_point_mass();
  }

  if (priors->count != table.bit_axes())
    throw std::invalid_argument("lookup_pmf: prior count mismatch");

  Pmf41 out;
  out.fill(0.0);
  const int nb = table.bit_axes();
  std::array<int, 4> signs{};
  for (int mask = 0; mask < (1 << nb); ++mask) {
    double w = 1.0;
    for (int j = 0; j < nb; ++j) {
      const bool plus = (mask >> j) & 1;
      signs[j] = plus ? +1 : -1;
      w *= plus ? priors->p_plus[j] : 1.0 - priors->p_plus[j];
      if (w == 0.0) break;
    }
    if (w == 0.0) continue;
    const Pmf41* p = table.find(PmfTable::pack_key(reading_bins, {signs.data(), static_cast<std::size_t>(nb)}));
    if (p) {
      for (int b = 0; b < kAlphaBins; ++b) out[b] += w * (*p)[b];
    } else {
      out[(kAlphaBins - 1) / 2] += w;
    }
  }
  return out;
}

PmfExt total_influence(const Pmf41& fae, const Pmf41& bd, const Pmf41& gch) {
  std::array<double, 2 * kAlphaBins - 1> pair{};
  for (int i = 0; i < kAlphaBins; ++i) {
    if (fae[i] == 0.0) continue;
    for (int j = 0; j < kAlphaBins; ++j) pair[i + j] += fae[i] * bd[j];
  }
  PmfExt out{};
  for (int m = 0; m < static_cast<int>(pair.size()); ++m) {
    if (pair[m] == 0.0) continue;
    for (int k = 0; k < kAlphaBins; ++k) out[m + k] += pair[m] * gch[k];
  }
  return out;
}

double compute_llr(const PmfExt& pmf_total, double y_center) {
  const int yb = alpha_bin(y_center);
  double less = 0.0, greater = 0.0, equal = 0.0;
  for (int m = 0; m < kAlphaExtBins; ++m) {
    const double v = pmf_total[m];
    if (v == 0.0) continue;
    // Out-of-range support folds into the end bins of the base grid.
    const int b = std::clamp(m - (kAlphaBins - 1), 0, kAlphaBins - 1);
    if (b < yb)
      less += v;
    else if (b > yb)
      greater += v;
    else
      equal += v;
  }
  const double num = less + 0.5 * equal;
  const double den = greater + 0.5 * equal;
  if (num == 0.0 && den == 0.0) return 0.0;
  if (den == 0.0) return kLaipLlrClamp;
  if (num == 0.0) return -kLaipLlrClamp;
  return std::clamp(std::log(num / den), -kLaipLlrClamp, kLaipLlrClamp);
}

namespace {

struct DetectContext {
  const ReadbackBlock& z;
  const LaipTables& tables;
  const BoundaryBits& boundary;
  const LlrBlock* priors;        // previous-loop LLRs (or external a priori)
  bool bit_conditioned = false;  // use bit-conditioned tables this loop
};

double prior_plus(const DetectContext& ctx, int t, int k) {
  const int n = ctx.z.length();
  if (t < 0) {
    const int idx = k + 1;
    if (idx >= 0 && idx < static_cast<int>(ctx.boundary.top.size()))
      return ctx.boundary.top[idx] > 0 ? 1.0 : 0.0;
    return 0.5;
  }
  if (t >= ctx.z.tracks()) {
    const int idx = k + 1;
    if (idx >= 0 && idx < static_cast<int>(ctx.boundary.bottom.size()))
      return ctx.boundary.bottom[idx] > 0 ? 1.0 : 0.0;
    return 0.5;
  }
  if (k < 0) return ctx.boundary.left[t] > 0 ? 1.0 : 0.0;
  if (k >= n) return ctx.boundary.right[t] > 0 ? 1.0 : 0.0;
  if (!ctx.priors) return 0.5;
  return 1.0 / (1.0 + std::exp(-ctx.priors->llrs.at(t, k)));
}

TableVariant variant_for(Group g, int t, int k, int tracks, int n, bool bit_conditioned) {
  if (g == Group::FAE && t == 0) return TableVariant::RowBoundary;
  if (g == Group::GCH && t == tracks - 1) return TableVariant::RowBoundary;
  if (k == 0) return TableVariant::FirstColumn;
  if (k == n - 1) return TableVariant::LastColumn;
  return bit_conditioned ? TableVariant::Full : TableVariant::NoBits;
}

double detect_position(const DetectContext& ctx, int t, int k, std::vector<int>& bins) {
  const int tracks = ctx.z.tracks();
  const int n = ctx.z.length();
  std::array<Pmf41, 3> group_pmf;
  for (int gi = 0; gi < 3; ++gi) {
    const Group g = static_cast<Group>(gi);
    const TableVariant v = variant_for(g, t, k, tracks, n, ctx.bit_conditioned);
    const PmfTable& table = ctx.tables.table(g, v);

    bins.clear();
    for (Neighbor m : table.reading_members()) {
      const NeighborOffset off = neighbor_offset(m);
      bins.push_back(quantize(ctx.tables.quantizers[t + off.dt],
                              ctx.z.samples.at(t + off.dt, k + off.dk)));
    }
    if (table.bit_axes() == 0) {
      group_pmf[gi] = lookup_pmf(table, bins, nullptr);
    } else {
      BitPriors priors;
      priors.count = table.bit_axes();
      int j = 0;
      for (Neighbor m : table.bit_members()) {
        const NeighborOffset off = neighbor_offset(m);
        priors.p_plus[j++] = prior_plus(ctx, t + off.dt, k + off.dk);
      }
      group_pmf[gi] = lookup_pmf(table, bins, &priors);
    }
  }
  const PmfExt ext = total_influence(group_pmf[0], group_pmf[1], group_pmf[2]);
  return compute_llr(ext, ctx.z.samples.at(t, k));
}

}  // namespace

LlrBlock laip_detect(const ReadbackBlock& equalized, const LaipTables& tables,
                     const BoundaryBits& boundary, const LlrBlock* a_priori,
                     const DetectConfig& cfg) {
  if (equalized.tracks() != 3) throw std::invalid_argument("laip_detect: need 3 equalized tracks");
  if (tables.quantizers.size() != 3)
    throw std::invalid_argument("laip_detect: tables missing track quantizers");
  if (cfg.self_loops < 1) throw std::invalid_argument("laip_detect: self_loops >= 1");
  const int n = equalized.length();
  if (static_cast<int>(boundary.top.size()) != n + 2 ||
      static_cast<int>(boundary.bottom.size()) != n + 2)
    throw std::invalid_argument("laip_detect: boundary rows must have length N+2");

  LlrBlock current;
  current.llrs = Block2D<double>(3, n);

  const int n_threads = std::min(usable_threads(cfg.threads), std::max(1, n / 64));
  for (int loop = 0; loop < cfg.self_loops; ++loop) {
    DetectContext ctx{equalized, tables, boundary,
                      loop == 0 ? a_priori : &current,
                      loop > 0 || a_priori != nullptr};
    LlrBlock next;
    next.llrs = Block2D<double>(3, n);

    auto run_span = [&](int k_begin, int k_end) {
      std::vector<int> bins;
      for (int t = 0; t < 3; ++t)
        for (int k = k_begin; k < k_end; ++k) next.llrs.at(t, k) = detect_position(ctx, t, k, bins);
    };
    if (n_threads <= 1) {
      run_span(0, n);
    } else {
      std::vector<std::thread> workers;
      const int chunk = (n + n_threads - 1) / n_threads;
      for (int w = 0; w < n_threads; ++w) {
        const int b = w * chunk, e = std::min(n, b + chunk);
        if (b < e) workers.emplace_back(run_span, b, e);
      }
      for (auto& th : workers) th.join();
    }
    current = std::move(next);
    if (cfg.loop_trace) cfg.loop_trace->push_back(current);
  }
  return current;
}

}  // namespace tdmr
