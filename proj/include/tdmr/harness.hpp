#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tdmr/pipeline.hpp"

namespace tdmr {

// ---- Metric rules --------------------------------------------------------

// 95%-confidence upper bound used when the error count is zero.
inline double upper_bound_3n(long long n) { return n > 0 ? 3.0 / static_cast<double>(n) : 1.0; }

struct MetricValue {
  long long errors = 0;
  long long total = 0;
  double value = 0.0;   // errors/total, or the 3/N bound when errors == 0
  bool is_bound = false;
};

MetricValue error_metric(long long errors, long long total);

// Exact ratio; the paper-style report rounds through 5 then 4 decimals.
inline double user_bits_per_grain(double rate, double gpb) { return rate / gpb; }
double ug_report(double rate, double gpb);

// ---- Monte-Carlo experiments ---------------------------------------------

struct ExperimentConfig {
  PipelineConfig pipeline;
  int trials = 30;
  std::uint64_t seed = 1;
  int threads = 0;  // trial-level worker pool; TDMR_LAB_THREADS caps it
};

struct ExperimentResult {
  std::vector<StageRecord> records;
  MetricValue raw, laip, bcjr, dec1, dec2;  // bit metrics over all scored tracks
  MetricValue fer;                          // decoder-2 frames
  double achieved_rate = 0.0;
  double ug = 0.0;         // exact rate / GPB
  double ug_4dp = 0.0;     // Table-style rounded report
  double wall_seconds = 0.0;
  std::uint64_t config_hash = 0;
};

// Deterministic: trial i uses seed_for(seed, "trial", i); rerunning with the
// same seed reproduces every record exactly.
ExperimentResult run_experiment(const TrainedSystem& sys, const ExperimentConfig& cfg);

// Replaces the code/cosets for a new target rate; everything trained on the
// media (equalizers, LUT, quantizers) is rate-independent and shared.
TrainedSystem with_rate(const TrainedSystem& sys, double code_rate);

struct RateSearchResult {
  double achieved_rate = 0.0;  // largest grid rate meeting the target
  double ug = 0.0;
  double ug_4dp = 0.0;
  bool met_target = false;
  std::vector<std::pair<double, double>> tried;  // (rate, measured final BER)
};

RateSearchResult rate_search(const TrainedSystem& sys, const ExperimentConfig& cfg,
                             double target_ber, std::span<const double> rate_grid);

// ---- Paired-seed detector comparison --------------------------------------

struct ComparisonRow {
  std::array<double, 3> laip_bcjr{};  // detector-only BER per reader track
  std::array<double, 2> pdnp2d{};     // two-track baseline, reader tracks 0..1
  double pdnp1d_center = 0.0;         // single-track baseline on the center row
};

struct DetectorComparison {
  std::vector<ComparisonRow> rows;  // one per trial, identical media per row
  std::array<double, 3> laip_bcjr_mean{};
  std::array<double, 2> pdnp2d_mean{};
  double pdnp1d_mean = 0.0;
  // center-track ratio LAIP-BCJR / 2D-PDNP, and the upper compared track
  double ratio_center = 0.0;
  double ratio_upper = 0.0;
};

DetectorComparison compare_detectors(const TrainedSystem& sys, const Pdnp1dBaseline& base1d,
                                     const Pdnp2dBaseline& base2d, const ExperimentConfig& cfg);

// One-sided paired sign test: p-value of seeing >= wins successes among
// wins+losses fair coin flips (ties dropped).
double sign_test_p_value(int wins, int losses);

// ---- Persistence -----------------------------------------------------------

void write_results_csv(const std::string& path, const ExperimentResult& result);
void write_summary_json(const std::string& path, const ExperimentResult& result,
                        const std::string& label);
void append_ber_curve_csv(const std::string& path, double rate, const ExperimentResult& result);

// Worker-pool width: explicit value, else TDMR_LAB_THREADS, else hardware.
int harness_threads(int requested);

}  // namespace tdmr
