#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "tdmr/equalize.hpp"
#include "tdmr/rng.hpp"

using namespace tdmr;

namespace {

BitBlock random_bits(int tracks, int length, std::uint64_t seed) {
  BitBlock b;
  b.bits = Block2D<std::int8_t>(tracks, length);
  Rng rng(seed);
  for (auto& v : b.bits.raw()) v = static_cast<std::int8_t>(rng.sign_bit());
  return b;
}

double design_mse(const EqualizerSpec& spec, const ReadbackBlock& y, const BitBlock& u,
                  int bit_row) {
  const ReadbackBlock z = apply_equalizer(spec, y);
  double acc = 0.0;
  int cnt = 0;
  const int guard = spec.num_taps;
  for (int r = 0; r < z.tracks(); ++r)
    for (int k = guard; k < z.length() - guard; ++k) {
      const int row = z.tracks() == u.tracks() ? r : bit_row;
      const double e = z.samples.at(r, k) - target_signal(spec.target, u, row, k);
      acc += e * e;
      ++cnt;
    }
  return acc / cnt;
}

}  // namespace

TEST_CASE("masks validate and carry the published taps") {
  const TargetMask m1 = TargetMask::pr_1d();
  m1.validate();
  CHECK(m1.taps[0] == 0.2223);
  CHECK(m1.taps[1] == 1.0);
  CHECK(m1.taps[2] == 0.2224);
  const TargetMask m2 = TargetMask::pr_2d();
  m2.validate();
  CHECK(m2.tap(1, 1) == 1.0);
  CHECK(m2.tap(0, 0) == 0.0028);
  CHECK(m2.tap(2, 2) == 0.0780);
  TargetMask bad = m1;
  bad.taps[1] = 0.9;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("noiseless pre-shaped channel yields a delta filter") {
  const TargetMask mask = TargetMask::pr_1d();
  const int n = 4000;
  const BitBlock u = random_bits(1, n, 10);
  ReadbackBlock y;
  y.samples = Block2D<double>(1, n);
  for (int k = 0; k < n; ++k) y.samples.at(0, k) = target_signal(mask, u, 0, k);

  DesignStats stats;
  const EqualizerSpec spec = design_mmse_pr1d({&y}, {&u}, 0, mask, 11, &stats);
  CHECK(stats.mse < 1e-18);
  const int c = spec.num_taps / 2;
  for (int i = 0; i < spec.num_taps; ++i)
    CHECK(spec.tap(0, 0, i) == doctest::Approx(i == c ? 1.0 : 0.0).epsilon(1e-6).scale(1.0));
}

TEST_CASE("normal equations match the stacked least-squares oracle") {
  // Toy channel: 1 track, 500 samples, 5 taps.
  const int n = 500, taps = 5, c = taps / 2;
  const BitBlock u = random_bits(1, n, 21);
  Rng rng(22);
  ReadbackBlock y;
  y.samples = Block2D<double>(1, n);
  for (int k = 0; k < n; ++k) {
    double v = 0.6 * u.bits.at(0, k) + 0.3 * (k > 0 ? u.bits.at(0, k - 1) : 0) +
               0.15 * (k + 1 < n ? u.bits.at(0, k + 1) : 0);
    y.samples.at(0, k) = v + 0.2 * rng.gaussian();
  }

  const EqualizerSpec spec = design_mmse_per_track({&y}, {&u}, taps);

  std::vector<std::vector<double>> rows;
  std::vector<double> desired;
  for (int k = c; k + c < n; ++k) {
    std::vector<double> row(taps);
    for (int i = 0; i < taps; ++i) row[i] = y.samples.at(0, k - i + c);
    rows.push_back(std::move(row));
    desired.push_back(u.bits.at(0, k));
  }
  const Eigen::VectorXd h = oracle::stacked_lsq(rows, desired);
  for (int i = 0; i < taps; ++i) CHECK(std::abs(spec.tap(0, 0, i) - h[i]) < 1e-8);
}

TEST_CASE("orthogonality principle holds on the training data") {
  const int n = 6000;
  const BitBlock u = random_bits(3, n, 31);
  Rng rng(32);
  ReadbackBlock y;
  y.samples = Block2D<double>(3, n);
  for (int t = 0; t < 3; ++t)
    for (int k = 0; k < n; ++k) {
      double v = 0.9 * u.bits.at(t, k);
      if (k > 0) v += 0.35 * u.bits.at(t, k - 1);
      if (k + 1 < n) v += 0.35 * u.bits.at(t, k + 1);
      if (t > 0) v += 0.25 * u.bits.at(t - 1, k);
      if (t < 2) v += 0.25 * u.bits.at(t + 1, k);
      y.samples.at(t, k) = v + 0.3 * rng.gaussian();
    }

  DesignStats stats;
  design_mmse_per_track({&y}, {&u}, 15, &stats);
  CHECK(stats.orthogonality < 1e-6);

  DesignStats stats2;
  design_mmse_pr1d({&y}, {&u}, 1, TargetMask::pr_1d(), 15, &stats2);
  CHECK(stats2.orthogonality < 1e-6);
}

TEST_CASE("designed taps beat random perturbations") {
  const int n = 3000;
  const BitBlock u = random_bits(1, n, 41);
  Rng rng(42);
  ReadbackBlock y;
  y.samples = Block2D<double>(1, n);
  for (int k = 0; k < n; ++k) {
    double v = u.bits.at(0, k) + 0.4 * (k > 0 ? u.bits.at(0, k - 1) : 0);
    y.samples.at(0, k) = v + 0.25 * rng.gaussian();
  }
  EqualizerSpec spec = design_mmse_per_track({&y}, {&u}, 9);
  const double base = design_mse(spec, y, u, 0);
  for (int trial = 0; trial < 100; ++trial) {
    EqualizerSpec perturbed = spec;
    double norm = 0.0;
    std::vector<double> delta(spec.taps.size());
    for (double& d : delta) {
      d = rng.gaussian();
      norm += d * d;
    }
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < delta.size(); ++i)
      perturbed.taps[i] += delta[i] / norm * 1e-3;
    CHECK(design_mse(perturbed, y, u, 0) >= base - 1e-15);
  }
}

TEST_CASE("apply aligns identity, shifts and impulse responses") {
  ReadbackBlock input;
  input.samples = Block2D<double>(3, 64);
  Rng rng(51);
  for (auto& v : input.samples.raw()) v = rng.gaussian();

  EqualizerSpec identity;
  identity.shape = IoShape::PerTrack1D;
  identity.num_taps = 15;
  identity.in_rows = 1;
  identity.outputs = 1;
  identity.taps.assign(15, 0.0);
  identity.taps[7] = 1.0;
  const ReadbackBlock same = apply_equalizer(identity, input);
  for (int t = 0; t < 3; ++t)
    for (int k = 0; k < 64; ++k)
      CHECK(same.samples.at(t, k) == doctest::Approx(input.samples.at(t, k)).epsilon(1e-12));

  EqualizerSpec shift = identity;
  shift.taps.assign(15, 0.0);
  shift.taps[8] = 1.0;  // one tap right of center delays by one sample
  const ReadbackBlock delayed = apply_equalizer(shift, input);
  for (int k = 1; k < 64; ++k)
    CHECK(delayed.samples.at(0, k) == doctest::Approx(input.samples.at(0, k - 1)).epsilon(1e-12));

  ReadbackBlock impulse;
  impulse.samples = Block2D<double>(3, 31, 0.0);
  impulse.samples.at(0, 15) = 1.0;
  EqualizerSpec filt = identity;
  Rng trng(52);
  for (auto& v : filt.taps) v = trng.gaussian();
  const ReadbackBlock resp = apply_equalizer(filt, impulse);
  for (int i = 0; i < 15; ++i)
    CHECK(resp.samples.at(0, 15 + 7 - i) == doctest::Approx(filt.taps[i]).epsilon(1e-12));
}

TEST_CASE("shared filter preserves additivity") {
  EqualizerSpec spec;
  spec.shape = IoShape::PerTrack1D;
  spec.num_taps = 15;
  spec.in_rows = 1;
  spec.outputs = 1;
  Rng rng(61);
  spec.taps.resize(15);
  for (auto& v : spec.taps) v = rng.gaussian();

  ReadbackBlock a, b, sum;
  a.samples = Block2D<double>(3, 80);
  b.samples = Block2D<double>(3, 80);
  sum.samples = Block2D<double>(3, 80);
  for (int i = 0; i < 3 * 80; ++i) {
    a.samples.raw()[i] = rng.gaussian();
    b.samples.raw()[i] = rng.gaussian();
    sum.samples.raw()[i] = a.samples.raw()[i] + b.samples.raw()[i];
  }
  const ReadbackBlock za = apply_equalizer(spec, a);
  const ReadbackBlock zb = apply_equalizer(spec, b);
  const ReadbackBlock zs = apply_equalizer(spec, sum);
  for (int i = 0; i < 3 * 80; ++i)
    CHECK(zs.samples.raw()[i] == doctest::Approx(za.samples.raw()[i] + zb.samples.raw()[i])
                                     .epsilon(1e-12));
}

TEST_CASE("three-output equalizer uses boundary rows and matches its target") {
  // Synthetic separable channel over 5 written rows.
  const int n = 5000;
  const BitBlock u5 = random_bits(5, n, 71);
  Rng rng(72);
  ReadbackBlock y;
  y.samples = Block2D<double>(3, n);
  for (int t = 0; t < 3; ++t)
    for (int k = 0; k < n; ++k) {
      double v = 0.0;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dk = -1; dk <= 1; ++dk) {
          const int r = 1 + t + dr, c = k + dk;
          if (c < 0 || c >= n) continue;
          v += (dr == 0 ? 0.8 : 0.3) * (dk == 0 ? 1.0 : 0.4) * u5.bits.at(r, c);
        }
      y.samples.at(t, k) = v + 0.2 * rng.gaussian();
    }

  DesignStats stats;
  const EqualizerSpec spec = design_mmse_pr2d({&y}, {&u5}, TargetMask::pr_2d(), 15, &stats);
  CHECK(stats.orthogonality < 1e-6);

  BitBlock u5b = u5;
  u5b.top_boundary.assign(n + 2, +1);
  u5b.bottom_boundary.assign(n + 2, +1);
  for (int k = 0; k < n; ++k) {
    u5b.top_boundary[k + 1] = u5.bits.at(0, k);
    u5b.bottom_boundary[k + 1] = u5.bits.at(4, k);
  }
  const ReadbackBlock z = apply_equalizer(spec, y, &u5b.top_boundary, &u5b.bottom_boundary);
  REQUIRE(z.tracks() == 3);
  // Shaped output should track the mask-filtered bits far better than raw.
  double raw_err = 0.0, eq_err = 0.0;
  int cnt = 0;
  for (int t = 0; t < 3; ++t)
    for (int k = 20; k < n - 20; ++k) {
      const double d = target_signal(spec.target, u5, 1 + t, k);
      raw_err += (y.samples.at(t, k) - d) * (y.samples.at(t, k) - d);
      eq_err += (z.samples.at(t, k) - d) * (z.samples.at(t, k) - d);
      ++cnt;
    }
  CHECK(eq_err / cnt < 0.5 * raw_err / cnt);
}
