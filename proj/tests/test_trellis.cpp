#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "tdmr/rng.hpp"
#include "tdmr/trellis.hpp"

using namespace tdmr;

namespace {

LlrBlock random_llrs(int tracks, int n, double scale, Rng& rng) {
  LlrBlock l;
  l.llrs = Block2D<double>(tracks, n);
  for (auto& v : l.llrs.raw()) v = scale * rng.gaussian();
  return l;
}

TargetMask random_monic_3tap(Rng& rng) {
  TargetMask m;
  m.kind = TargetKind::Pr1D;
  m.rows = 1;
  m.cols = 3;
  m.taps = {rng.uniform(-0.5, 0.5), 1.0, rng.uniform(-0.5, 0.5)};
  return m;
}

double max_llr_diff(const LlrBlock& a, const LlrBlock& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.llrs.raw().size(); ++i)
    worst = std::max(worst, std::abs(a.llrs.raw()[i] - b.llrs.raw()[i]));
  return worst;
}

}  // namespace

TEST_CASE("single-track mask trellis matches exhaustive MAP") {
  Rng rng(101);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 10;
    const TargetMask mask = (trial % 2) ? random_monic_3tap(rng) : TargetMask::pr_1d();
    const double sigma = 0.5;

    std::vector<int> bits(n);
    std::vector<double> obs(n);
    for (int k = 0; k < n; ++k) bits[k] = rng.sign_bit();
    auto padded = [&](int c) { return (c < 0 || c >= n) ? +1 : bits[c]; };
    for (int k = 0; k < n; ++k) {
      double s = 0.0;
      for (int c = 0; c < 3; ++c) s += mask.taps[c] * padded(k + c - 1);
      obs[k] = s + sigma * rng.gaussian();
    }

    const bool with_ap = trial % 3 == 0;
    LlrBlock ap = random_llrs(1, n, 1.0, rng);

    MaskAwgn1D model(mask, obs, sigma);
    BcjrConfig cfg;
    cfg.left_context = 1;
    cfg.right_context = 1;
    const LlrBlock got = bcjr_detect(model, with_ap ? &ap : nullptr, cfg);

    const LlrBlock want = oracle::brute_force_map(
        1, n,
        [&](const std::function<int(int, int)>& bit) {
          double ll = 0.0;
          for (int k = 0; k < n; ++k) {
            double s = 0.0;
            for (int c = 0; c < 3; ++c) s += mask.taps[c] * bit(0, k + c - 1);
            const double e = obs[k] - s;
            ll += -0.5 * std::log(2.0 * M_PI * sigma * sigma) - e * e / (2.0 * sigma * sigma);
          }
          return ll;
        },
        with_ap ? &ap : nullptr);
    CHECK(max_llr_diff(got, want) < 1e-9);
  }
}

TEST_CASE("memoryless mask reduces to the matched-filter LLR") {
  Rng rng(102);
  const int n = 12;
  const double sigma = 0.7;
  TargetMask mask;
  mask.kind = TargetKind::Pr1D;
  mask.rows = 1;
  mask.cols = 3;
  mask.taps = {0.0, 1.0, 0.0};
  std::vector<double> obs(n);
  for (double& v : obs) v = rng.uniform(-1.5, 1.5);
  MaskAwgn1D model(mask, obs, sigma);
  BcjrConfig cfg;
  cfg.left_context = 1;
  cfg.right_context = 1;
  const LlrBlock got = bcjr_detect(model, nullptr, cfg);
  for (int k = 0; k < n; ++k)
    CHECK(got.llrs.at(0, k) == doctest::Approx(2.0 * obs[k] / (sigma * sigma)).epsilon(1e-9));
}

TEST_CASE("saturated a-priori pins the output signs") {
  Rng rng(103);
  const int n = 10;
  std::vector<double> obs(n);
  for (double& v : obs) v = rng.gaussian();
  MaskAwgn1D model(TargetMask::pr_1d(), obs, 0.5);
  LlrBlock ap;
  ap.llrs = Block2D<double>(1, n);
  for (int k = 0; k < n; ++k) ap.llrs.at(0, k) = (k % 2 ? +1 : -1) * 60.0;
  BcjrConfig cfg;
  cfg.left_context = 1;
  cfg.right_context = 1;
  const LlrBlock got = bcjr_detect(model, &ap, cfg);
  for (int k = 0; k < n; ++k) CHECK((got.llrs.at(0, k) > 0) == (k % 2 == 1));
}

TEST_CASE("negating observations and bit labels negates the LLRs") {
  Rng rng(104);
  const int n = 9;
  std::vector<double> obs(n), neg(n);
  for (int k = 0; k < n; ++k) {
    obs[k] = rng.uniform(-2.0, 2.0);
    neg[k] = -obs[k];
  }
  LlrBlock ap = random_llrs(1, n, 0.8, rng);
  LlrBlock nap = ap;
  for (auto& v : nap.llrs.raw()) v = -v;

  MaskAwgn1D m1(TargetMask::pr_1d(), obs, 0.6);
  MaskAwgn1D m2(TargetMask::pr_1d(), neg, 0.6);
  BcjrConfig c1, c2;
  c1.left_context = 1;
  c1.right_context = 1;
  c2.left_context = 0;  // flipped context
  c2.right_context = 0;
  const LlrBlock a = bcjr_detect(m1, &ap, c1);
  const LlrBlock b = bcjr_detect(m2, &nap, c2);
  for (int k = 0; k < n; ++k)
    CHECK(a.llrs.at(0, k) == doctest::Approx(-b.llrs.at(0, k)).epsilon(1e-10));
}

TEST_CASE("three-track mask trellis matches exhaustive MAP") {
  Rng rng(105);
  const TargetMask mask = TargetMask::pr_2d();
  for (int trial = 0; trial < 6; ++trial) {
    const int n = 4;  // 12 coded bits
    std::vector<std::int8_t> top(n + 2), bottom(n + 2);
    for (auto& v : top) v = static_cast<std::int8_t>(rng.sign_bit());
    for (auto& v : bottom) v = static_cast<std::int8_t>(rng.sign_bit());

    ReadbackBlock obs;
    obs.samples = Block2D<double>(3, n);
    for (auto& v : obs.samples.raw()) v = rng.uniform(-2.0, 2.0);
    std::vector<double> sigma = {0.5, 0.45, 0.55};

    const bool with_ap = trial % 2 == 0;
    LlrBlock ap = random_llrs(3, n, 0.7, rng);

    Mask2DThreeTrack model(mask, obs, top, bottom, sigma);
    BcjrConfig cfg;
    cfg.left_context = 0b111;
    cfg.right_context = 0b111;
    const LlrBlock got = bcjr_detect(model, with_ap ? &ap : nullptr, cfg);

    const LlrBlock want = oracle::brute_force_map(
        3, n,
        [&](const std::function<int(int, int)>& bit) {
          double ll = 0.0;
          for (int pos = 0; pos < n; ++pos)
            for (int r = 0; r < 3; ++r) {
              double s = 0.0;
              for (int mr = 0; mr < 3; ++mr)
                for (int mc = 0; mc < 3; ++mc) {
                  const int row = r + mr - 1;
                  const int col = pos + mc - 1;
                  int b;
                  if (row < 0)
                    b = top[col + 1] > 0 ? +1 : -1;
                  else if (row > 2)
                    b = bottom[col + 1] > 0 ? +1 : -1;
                  else
                    b = bit(row, col);
                  s += mask.tap(mr, mc) * b;
                }
              const double e = obs.samples.at(r, pos) - s;
              ll += -0.5 * std::log(2.0 * M_PI * sigma[r] * sigma[r]) -
                    e * e / (2.0 * sigma[r] * sigma[r]);
            }
          return ll;
        },
        with_ap ? &ap : nullptr);
    CHECK(max_llr_diff(got, want) < 1e-9);
  }
}

TEST_CASE("trellis sizing formulas") {
  Pdnp1dModel m1;
  m1.predictor_order = 4;
  m1.isi_length = 2;
  m1.lookahead_bits = 1;
  m1.pattern_past = 6;
  CHECK(m1.state_count() == 128);
  CHECK(m1.pattern_count() == 256);

  Pdnp2dModel m2;
  m2.predictor_order = 1;
  m2.ahead = 1;
  m2.behind = 1;
  CHECK(m2.state_count() == 64);
  m2.predictor_order = 2;
  CHECK(m2.state_count() == 256);
}

namespace {

Pdnp1dModel make_random_pdnp1d(Rng& rng, int L, int M, int delta) {
  Pdnp1dModel m;
  m.predictor_order = L;
  m.isi_length = 2;
  m.lookahead_bits = delta;
  m.pattern_past = M;
  m.mask = TargetMask::pr_1d();
  m.coeffs.resize(static_cast<std::size_t>(m.pattern_count()) * L);
  m.sigma.resize(m.pattern_count());
  for (auto& c : m.coeffs) c = rng.uniform(-0.3, 0.3);
  for (auto& s : m.sigma) s = rng.uniform(0.3, 0.8);
  return m;
}

}  // namespace

TEST_CASE("single-track noise-prediction trellis matches exhaustive MAP") {
  Rng rng(106);
  for (int trial = 0; trial < 4; ++trial) {
    const int n = 10;
    const int L = 2, M = 2, delta = 1;
    const Pdnp1dModel model = make_random_pdnp1d(rng, L, M, delta);
    std::vector<double> obs(n);
    for (double& v : obs) v = rng.uniform(-2.0, 2.0);

    Pdnp1dTrellis trellis(model, obs);
    CHECK(trellis.state_count() == model.state_count());
    BcjrConfig cfg;
    cfg.left_context = 1;
    cfg.right_context = 1;
    const bool with_ap = trial % 2 == 1;
    LlrBlock ap = random_llrs(1, n, 0.6, rng);
    const LlrBlock got = bcjr_detect(trellis, with_ap ? &ap : nullptr, cfg);

    const LlrBlock want = oracle::brute_force_map(
        1, n,
        [&](const std::function<int(int, int)>& bit) {
          auto noise = [&](int j) -> double {
            if (j < 0) return 0.0;
            double s = 0.0;
            for (int c = 0; c < 3; ++c) s += model.mask.taps[c] * bit(0, j + c - 1);
            return obs[j] - s;
          };
          double ll = 0.0;
          for (int pos = 0; pos < n; ++pos) {
            int p = 0;
            for (int i = 0; i <= M + delta; ++i)
              p |= (bit(0, pos - M + i) > 0 ? 1 : 0) << i;
            double pred = 0.0;
            for (int i = 1; i <= L; ++i)
              pred += model.coeffs[static_cast<std::size_t>(p) * L + i - 1] * noise(pos - i);
            const double e = noise(pos) - pred;
            const double sg = model.sigma[p];
            ll += -0.5 * std::log(2.0 * M_PI * sg * sg) - e * e / (2.0 * sg * sg);
          }
          return ll;
        },
        with_ap ? &ap : nullptr);
    CHECK(max_llr_diff(got, want) < 1e-9);
  }
}

namespace {

Pdnp2dModel make_random_pdnp2d(Rng& rng, int Np) {
  Pdnp2dModel m;
  m.predictor_order = Np;
  m.ahead = 1;
  m.behind = 1;
  const int pc = m.pattern_count();
  m.target.resize(2 * pc);
  m.p0_cross.resize(2 * pc);
  m.p_coeffs.resize(static_cast<std::size_t>(pc) * Np * 4);
  m.lambda.resize(3 * pc);
  for (auto& v : m.target) v = rng.uniform(-1.0, 1.0);
  for (auto& v : m.p0_cross) v = rng.uniform(-0.25, 0.25);
  for (auto& v : m.p_coeffs) v = rng.uniform(-0.25, 0.25);
  for (int p = 0; p < pc; ++p) {
    m.lambda[3 * p] = rng.uniform(0.3, 0.7);
    m.lambda[3 * p + 1] = rng.uniform(-0.2, 0.2);
    m.lambda[3 * p + 2] = rng.uniform(0.3, 0.7);
  }
  return m;
}

}  // namespace

TEST_CASE("two-track noise-prediction trellis matches exhaustive MAP") {
  Rng rng(107);
  for (int trial = 0; trial < 4; ++trial) {
    const int n = 5;  // 10 coded bits
    const Pdnp2dModel model = make_random_pdnp2d(rng, 1);
    ReadbackBlock obs;
    obs.samples = Block2D<double>(2, n);
    for (auto& v : obs.samples.raw()) v = rng.uniform(-2.0, 2.0);

    Pdnp2dTrellis trellis(model, obs);
    CHECK(trellis.state_count() == 64);
    BcjrConfig cfg;
    cfg.left_context = 0b11;
    cfg.right_context = 0b11;
    const LlrBlock got = bcjr_detect(trellis, nullptr, cfg);

    const LlrBlock want = oracle::brute_force_map(
        2, n,
        [&](const std::function<int(int, int)>& bit) {
          auto pattern = [&](int j) {
            int p = 0;
            for (int i = 0; i <= 2; ++i) {
              const int c = j - 1 + i;
              const int col = (bit(0, c) > 0 ? 1 : 0) | ((bit(1, c) > 0 ? 1 : 0) << 1);
              p |= col << (2 * i);
            }
            return p;
          };
          auto noise = [&](int j, double out[2]) {
            if (j < 0) {
              out[0] = out[1] = 0.0;
              return;
            }
            const int p = pattern(j);
            out[0] = obs.samples.at(0, j) - model.target[2 * p];
            out[1] = obs.samples.at(1, j) - model.target[2 * p + 1];
          };
          double ll = 0.0;
          for (int pos = 0; pos < n; ++pos) {
            const int p = pattern(pos);
            double nk[2], np[2];
            noise(pos, nk);
            noise(pos - 1, np);
            const double e0 = nk[0] - model.p0_cross[2 * p] * nk[1] -
                              model.p_coeffs[static_cast<std::size_t>(p) * 4] * np[0] -
                              model.p_coeffs[static_cast<std::size_t>(p) * 4 + 1] * np[1];
            const double e1 = nk[1] - model.p0_cross[2 * p + 1] * nk[0] -
                              model.p_coeffs[static_cast<std::size_t>(p) * 4 + 2] * np[0] -
                              model.p_coeffs[static_cast<std::size_t>(p) * 4 + 3] * np[1];
            const double l11 = model.lambda[3 * p], l21 = model.lambda[3 * p + 1],
                         l22 = model.lambda[3 * p + 2];
            const double w0 = e0 / l11;
            const double w1 = (e1 - l21 * w0) / l22;
            ll += -std::log(2.0 * M_PI) - std::log(l11 * l22) - 0.5 * (w0 * w0 + w1 * w1);
          }
          return ll;
        },
        nullptr);
    CHECK(max_llr_diff(got, want) < 1e-9);
  }
}

TEST_CASE("branch metric arithmetic") {
  CHECK(pdnp_log_metric(0.0, 1.0) == doctest::Approx(-0.5 * std::log(2.0 * M_PI)).epsilon(1e-12));
  CHECK(pdnp_log_metric(1.0, 1.0) == doctest::Approx(-1.4189385332046727).epsilon(1e-12));
  // Diagonal two-track residual scale decomposes into two 1D metrics: check
  // via a 2D model with zero off-diagonals against pdnp_log_metric.
  const double l11 = 0.4, l22 = 0.6, e0 = 0.3, e1 = -0.2;
  const double joint = -std::log(2.0 * M_PI) - std::log(l11 * l22) -
                       0.5 * ((e0 / l11) * (e0 / l11) + (e1 / l22) * (e1 / l22));
  CHECK(joint ==
        doctest::Approx(pdnp_log_metric(e0, l11) + pdnp_log_metric(e1, l22)).epsilon(1e-12));
}

TEST_CASE("plant-and-recover: single-track pattern-dependent noise") {
  Rng rng(108);
  const int L = 2, M = 2, delta = 1, I = 2;
  const TargetMask mask = TargetMask::pr_1d();
  Pdnp1dModel truth = make_random_pdnp1d(rng, L, M, delta);

  const int n = 1000000;
  std::vector<std::int8_t> bits(n);
  for (auto& b : bits) b = static_cast<std::int8_t>(rng.sign_bit());
  std::vector<double> noise(n, 0.0), obs(n);
  for (int k = 0; k < n; ++k) {
    int p = 0;
    for (int i = 0; i <= M + delta; ++i) {
      const int c = k - M + i;
      p |= ((c >= 0 && c < n && bits[c] > 0) || c < 0 || c >= n ? 1 : 0) << i;
    }
    double v = truth.sigma[p] * rng.gaussian();
    for (int i = 1; i <= L; ++i)
      if (k - i >= 0) v += truth.coeffs[static_cast<std::size_t>(p) * L + i - 1] * noise[k - i];
    noise[k] = v;
    double s = 0.0;
    for (int c = 0; c < 3; ++c) {
      const int kk = k + c - 1;
      if (kk >= 0 && kk < n) s += mask.taps[c] * bits[kk];
    }
    obs[k] = s + v;
  }

  PdnpTrainStats stats;
  const Pdnp1dModel fit = train_pdnp1d(obs, bits, mask, L, M, delta, I, &stats);
  double worst = 0.0;
  for (std::size_t i = 0; i < fit.coeffs.size(); ++i)
    worst = std::max(worst, std::abs(fit.coeffs[i] - truth.coeffs[i]));
  CHECK(worst < 2e-2);
  CHECK(stats.pattern_mse <= stats.pooled_mse + 1e-12);
}

TEST_CASE("white noise input recovers zero prediction coefficients") {
  Rng rng(109);
  const int n = 400000;
  std::vector<std::int8_t> bits(n);
  for (auto& b : bits) b = static_cast<std::int8_t>(rng.sign_bit());
  const TargetMask mask = TargetMask::pr_1d();
  std::vector<double> obs(n);
  const double sigma = 0.5;
  for (int k = 0; k < n; ++k) {
    double s = 0.0;
    for (int c = 0; c < 3; ++c) {
      const int kk = k + c - 1;
      if (kk >= 0 && kk < n) s += mask.taps[c] * bits[kk];
    }
    obs[k] = s + sigma * rng.gaussian();
  }
  const Pdnp1dModel fit = train_pdnp1d(obs, bits, mask, 4, 2, 1, 2);
  for (double c : fit.coeffs) CHECK(std::abs(c) < 0.03);
  for (double s : fit.sigma) CHECK(std::abs(s - sigma) / sigma < 0.05);
}

TEST_CASE("plant-and-recover: two-track vector noise") {
  Rng rng(110);
  const Pdnp2dModel truth = make_random_pdnp2d(rng, 1);
  const int n = 1000000;
  BitBlock bits;
  bits.bits = Block2D<std::int8_t>(2, n);
  for (auto& v : bits.bits.raw()) v = static_cast<std::int8_t>(rng.sign_bit());

  ReadbackBlock obs;
  obs.samples = Block2D<double>(2, n);
  std::vector<double> n0(n, 0.0), n1(n, 0.0);
  auto pattern = [&](int j) {
    int p = 0;
    for (int i = 0; i <= 2; ++i) {
      const int c = j - 1 + i;
      int col = 0b11;
      if (c >= 0 && c < n)
        col = (bits.bits.at(0, c) > 0 ? 1 : 0) | ((bits.bits.at(1, c) > 0 ? 1 : 0) << 1);
      p |= col << (2 * i);
    }
    return p;
  };
  for (int k = 0; k < n; ++k) {
    const int p = pattern(k);
    const double w0 = rng.gaussian(), w1 = rng.gaussian();
    const double l11 = truth.lambda[3 * p], l21 = truth.lambda[3 * p + 1],
                 l22 = truth.lambda[3 * p + 2];
    double e0 = l11 * w0;
    double e1 = l21 * w0 + l22 * w1;
    double prev0 = k > 0 ? n0[k - 1] : 0.0, prev1 = k > 0 ? n1[k - 1] : 0.0;
    const double c01 = truth.p0_cross[2 * p], c10 = truth.p0_cross[2 * p + 1];
    const double r0 = truth.p_coeffs[static_cast<std::size_t>(p) * 4] * prev0 +
                      truth.p_coeffs[static_cast<std::size_t>(p) * 4 + 1] * prev1 + e0;
    const double r1 = truth.p_coeffs[static_cast<std::size_t>(p) * 4 + 2] * prev0 +
                      truth.p_coeffs[static_cast<std::size_t>(p) * 4 + 3] * prev1 + e1;
    // Solve n0 = c01*n1 + r0, n1 = c10*n0 + r1.
    const double det = 1.0 - c01 * c10;
    n0[k] = (r0 + c01 * r1) / det;
    n1[k] = (r1 + c10 * r0) / det;
    obs.samples.at(0, k) = truth.target[2 * p] + n0[k];
    obs.samples.at(1, k) = truth.target[2 * p + 1] + n1[k];
  }

  PdnpTrainStats stats;
  const Pdnp2dModel fit = train_pdnp2d(obs, bits, 1, 1, 1, &stats);
  double worst = 0.0;
  for (std::size_t i = 0; i < fit.p_coeffs.size(); ++i)
    worst = std::max(worst, std::abs(fit.p_coeffs[i] - truth.p_coeffs[i]));
  for (std::size_t i = 0; i < fit.p0_cross.size(); ++i)
    worst = std::max(worst, std::abs(fit.p0_cross[i] - truth.p0_cross[i]));
  CHECK(worst < 2e-2);
  CHECK(stats.pattern_mse <= stats.pooled_mse + 1e-12);
  for (int p = 0; p < fit.pattern_count(); ++p) {
    CHECK(fit.lambda[3 * p] > 0.0);
    CHECK(fit.lambda[3 * p + 2] > 0.0);
  }
}
