#include "tdmr/trellis.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace tdmr {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Streaming log-sum-exp accumulator.
struct LogSum {
  double m = kNegInf;
  double s = 0.0;

  void add(double x) {
    if (x == kNegInf) return;
    if (x <= m) {
      s += std::exp(x - m);
    } else {
      s = (m == kNegInf) ? 1.0 : s * std::exp(m - x) + 1.0;
      m = x;
    }
  }
  double value() const { return (m == kNegInf || s <= 0.0) ? kNegInf : m + std::log(s); }
};

inline int window_bit(std::span<const int> window, int idx, int track) {
  return ((window[idx] >> track) & 1) ? +1 : -1;
}

// Bit pattern over columns [pos - past, pos + future], least significant
// bit = oldest column. `bit` maps a column to 0/1.
template <typename BitFn>
int pack_pattern(int pos, int past, int future, BitFn&& bit) {
  int p = 0;
  for (int i = 0; i <= past + future; ++i) p |= bit(pos - past + i) << i;
  return p;
}

// Two-track variant: each column contributes a 2-bit symbol.
template <typename ColFn>
int pack_pattern2(int pos, int past, int future, ColFn&& col) {
  int p = 0;
  for (int i = 0; i <= past + future; ++i) p |= col(pos - past + i) << (2 * i);
  return p;
}

}  // namespace

LlrBlock bcjr_detect(const TrellisModel& model, const LlrBlock* a_priori, const BcjrConfig& cfg) {
  const int bps = model.bits_per_symbol();
  const int mem = model.memory();
  const int la = model.lookahead();
  const int n = model.length();
  const int n_sym = model.symbol_count();
  const int n_states = model.state_count();
  const int state_mask = n_states - 1;
  const int stages = n + la;

  if (a_priori && (a_priori->tracks() != bps || a_priori->length() != n))
    throw std::invalid_argument("bcjr_detect: a-priori shape mismatch");
  if (mem < 1) throw std::invalid_argument("bcjr_detect: model memory must be >= 1");

  auto ap_term = [&](int k, int b) -> double {
    if (!a_priori || k >= n) return 0.0;
    double acc = 0.0;
    for (int j = 0; j < bps; ++j) {
      const double l = a_priori->llrs.at(j, k);
      acc += ((b >> j) & 1) ? 0.5 * l : -0.5 * l;
    }
    return acc;
  };

  std::vector<int> window(mem + 1);
  auto fill_window = [&](int s, int b) {
    const std::uint64_t full = (static_cast<std::uint64_t>(s) << bps) | static_cast<std::uint64_t>(b);
    for (int j = 0; j <= mem; ++j)
      window[mem - j] = static_cast<int>((full >> (j * bps)) & (n_sym - 1));
  };

  auto gamma = [&](int k, int s, int b) -> double {
    double g = ap_term(k, b);
    const int pos = k - la;
    if (pos >= 0 && pos < n) {
      fill_window(s, b);
      g += model.log_observation(pos, window);
    }
    return g;
  };

  auto stage_symbols = [&](int k, int& first, int& last) {
    if (k >= n && cfg.right_context) {
      first = last = *cfg.right_context & (n_sym - 1);
    } else {
      first = 0;
      last = n_sym - 1;
    }
  };

  // Forward recursion; alphas normalized per stage so exp sums to one.
  std::vector<double> alpha(static_cast<std::size_t>(stages + 1) * n_states, kNegInf);
  if (cfg.left_context) {
    const int ctx = *cfg.left_context & (n_sym - 1);
    int st = 0;
    for (int j = 0; j < mem; ++j) st |= ctx << (j * bps);
    alpha[st] = 0.0;
  } else {
    const double u = -std::log(static_cast<double>(n_states));
    for (int s = 0; s < n_states; ++s) alpha[s] = u;
  }

  std::vector<double> next(n_states);
  for (int k = 0; k < stages; ++k) {
    const double* cur = alpha.data() + static_cast<std::size_t>(k) * n_states;
    std::vector<LogSum> acc(n_states);
    int first, last;
    stage_symbols(k, first, last);
    for (int s = 0; s < n_states; ++s) {
      if (cur[s] == kNegInf) continue;
      for (int b = first; b <= last; ++b) {
        const int ns = ((s << bps) | b) & state_mask;
        acc[ns].add(cur[s] + gamma(k, s, b));
      }
    }
    LogSum norm;
    for (int s = 0; s < n_states; ++s) {
      next[s] = acc[s].value();
      norm.add(next[s]);
    }
    const double z = norm.value();
    if (z == kNegInf) throw std::runtime_error("bcjr_detect: dead trellis (all paths impossible)");
    double* dst = alpha.data() + static_cast<std::size_t>(k + 1) * n_states;
    for (int s = 0; s < n_states; ++s) dst[s] = next[s] == kNegInf ? kNegInf : next[s] - z;
  }

  // Backward recursion with in-pass posterior extraction.
  std::vector<LogSum> num(static_cast<std::size_t>(bps) * n), den(static_cast<std::size_t>(bps) * n);
  std::vector<double> beta(n_states, 0.0), beta_prev(n_states);
  for (int k = stages - 1; k >= 0; --k) {
    const double* cur = alpha.data() + static_cast<std::size_t>(k) * n_states;
    std::vector<LogSum> acc(n_states);
    int first, last;
    stage_symbols(k, first, last);
    for (int s = 0; s < n_states; ++s) {
      if (cur[s] == kNegInf) continue;
      for (int b = first; b <= last; ++b) {
        const int ns = ((s << bps) | b) & state_mask;
        if (beta[ns] == kNegInf && k < stages - 1) continue;
        const double g = gamma(k, s, b);
        acc[s].add(g + beta[ns]);
        if (k < n) {
          const double post = cur[s] + g + beta[ns];
          for (int j = 0; j < bps; ++j) {
            if ((b >> j) & 1)
              num[static_cast<std::size_t>(j) * n + k].add(post);
            else
              den[static_cast<std::size_t>(j) * n + k].add(post);
          }
        }
      }
    }
    LogSum norm;
    for (int s = 0; s < n_states; ++s) {
      beta_prev[s] = acc[s].value();
      norm.add(beta_prev[s]);
    }
    const double z = norm.value();
    for (int s = 0; s < n_states; ++s)
      beta_prev[s] = beta_prev[s] == kNegInf ? kNegInf : beta_prev[s] - z;
    beta.swap(beta_prev);
  }

  LlrBlock out;
  out.llrs = Block2D<double>(bps, n);
  for (int j = 0; j < bps; ++j)
    for (int k = 0; k < n; ++k) {
      const double lnum = num[static_cast<std::size_t>(j) * n + k].value();
      const double lden = den[static_cast<std::size_t>(j) * n + k].value();
      double l;
      if (lnum == kNegInf && lden == kNegInf)
        l = 0.0;
      else if (lden == kNegInf)
        l = std::numeric_limits<double>::infinity();
      else if (lnum == kNegInf)
        l = -std::numeric_limits<double>::infinity();
      else
        l = lnum - lden;
      if (cfg.extrinsic && a_priori) l -= a_priori->llrs.at(j, k);
      out.llrs.at(j, k) = l;
    }
  return out;
}

// ---- Mask-driven AWGN models -------------------------------------------

MaskAwgn1D::MaskAwgn1D(TargetMask mask, std::vector<double> observations, double sigma)
    : mask_(std::move(mask)), obs_(std::move(observations)) {
  mask_.validate();
  if (mask_.rows != 1) throw std::invalid_argument("MaskAwgn1D: need a 1-row mask");
  if (!(sigma > 0.0)) throw std::invalid_argument("MaskAwgn1D: sigma > 0");
  inv_two_var_ = 1.0 / (2.0 * sigma * sigma);
  log_norm_ = -0.5 * std::log(2.0 * M_PI * sigma * sigma);
}

double MaskAwgn1D::log_observation(int pos, std::span<const int> window) const {
  double s = 0.0;
  for (int c = 0; c < mask_.cols; ++c) s += mask_.taps[c] * window_bit(window, c, 0);
  const double e = obs_[pos] - s;
  return log_norm_ - e * e * inv_two_var_;
}

Mask2DThreeTrack::Mask2DThreeTrack(TargetMask mask, const ReadbackBlock& observations,
                                   std::vector<std::int8_t> top_boundary,
                                   std::vector<std::int8_t> bottom_boundary,
                                   std::vector<double> sigma_per_track)
    : mask_(std::move(mask)), obs_(observations), top_(std::move(top_boundary)),
      bottom_(std::move(bottom_boundary)) {
  mask_.validate();
  if (mask_.rows != 3 || mask_.cols != 3)
    throw std::invalid_argument("Mask2DThreeTrack: need a 3x3 mask");
  if (obs_.tracks() != 3) throw std::invalid_argument("Mask2DThreeTrack: need 3 tracks");
  if (static_cast<int>(top_.size()) != obs_.length() + 2 ||
      static_cast<int>(bottom_.size()) != obs_.length() + 2)
    throw std::invalid_argument("Mask2DThreeTrack: boundary rows must have length N+2");
  if (sigma_per_track.size() != 3)
    throw std::invalid_argument("Mask2DThreeTrack: need 3 per-track sigmas");
  for (double s : sigma_per_track) {
    if (!(s > 0.0)) throw std::invalid_argument("Mask2DThreeTrack: sigma > 0");
    inv_two_var_.push_back(1.0 / (2.0 * s * s));
    log_norm_.push_back(-0.5 * std::log(2.0 * M_PI * s * s));
  }
}

double Mask2DThreeTrack::log_observation(int pos, std::span<const int> window) const {
  double metric = 0.0;
  for (int r = 0; r < 3; ++r) {
    double s = 0.0;
    for (int mr = 0; mr < 3; ++mr) {
      const int row = r + mr - 1;
      for (int mc = 0; mc < 3; ++mc) {
        int bit;
        if (row < 0)
          bit = top_[pos + mc] > 0 ? +1 : -1;
        else if (row > 2)
          bit = bottom_[pos + mc] > 0 ? +1 : -1;
        else
          bit = window_bit(window, mc, row);
        s += mask_.tap(mr, mc) * bit;
      }
    }
    const double e = obs_.samples.at(r, pos) - s;
    metric += log_norm_[r] - e * e * inv_two_var_[r];
  }
  return metric;
}

// ---- Pattern-dependent noise prediction --------------------------------

void Pdnp1dModel::validate() const {
  if (predictor_order < 1 || pattern_past < 0 || lookahead_bits < 0 || isi_length < 1)
    throw std::invalid_argument("Pdnp1dModel: bad dimensions");
  if (mask.center_col() > lookahead_bits)
    throw std::invalid_argument("Pdnp1dModel: lookahead must cover the mask center offset");
  if (static_cast<int>(coeffs.size()) != pattern_count() * predictor_order ||
      static_cast<int>(sigma.size()) != pattern_count())
    throw std::invalid_argument("Pdnp1dModel: coefficient table size mismatch");
  for (double s : sigma)
    if (!(s > 0.0)) throw std::invalid_argument("Pdnp1dModel: sigma > 0 for every pattern");
}

void Pdnp2dModel::validate() const {
  if (predictor_order < 1 || ahead < 0 || behind < 0)
    throw std::invalid_argument("Pdnp2dModel: bad dimensions");
  const int pc = pattern_count();
  if (static_cast<int>(target.size()) != 2 * pc || static_cast<int>(p0_cross.size()) != 2 * pc ||
      static_cast<int>(p_coeffs.size()) != pc * predictor_order * 4 ||
      static_cast<int>(lambda.size()) != 3 * pc)
    throw std::invalid_argument("Pdnp2dModel: table size mismatch");
  for (int p = 0; p < pc; ++p)
    if (!(lambda[3 * p] > 0.0) || !(lambda[3 * p + 2] > 0.0))
      throw std::invalid_argument("Pdnp2dModel: diagonal residual scales must be > 0");
}

double pdnp_log_metric(double residual, double sigma) {
  return -0.5 * std::log(2.0 * M_PI * sigma * sigma) - residual * residual / (2.0 * sigma * sigma);
}

namespace {

// Per-pattern least-squares accumulator for y = a'x + e.
struct LsqAcc {
  Eigen::MatrixXd xtx;
  Eigen::VectorXd xty;
  double yy = 0.0;
  std::size_t count = 0;

  explicit LsqAcc(int dim) : xtx(Eigen::MatrixXd::Zero(dim, dim)), xty(Eigen::VectorXd::Zero(dim)) {}
  void add(const Eigen::VectorXd& x, double y) {
    xtx.selfadjointView<Eigen::Lower>().rankUpdate(x, 1.0);
    xty += y * x;
    yy += y * y;
    ++count;
  }
  void merge(const LsqAcc& o) {
    xtx += o.xtx;
    xty += o.xty;
    yy += o.yy;
    count += o.count;
  }
  Eigen::VectorXd solve() const {
    Eigen::MatrixXd full = xtx.selfadjointView<Eigen::Lower>();
    Eigen::VectorXd a = full.ldlt().solve(xty);
    if (!a.allFinite()) {
      full.diagonal().array() += 1e-9 * (full.trace() / full.rows() + 1.0);
      a = full.ldlt().solve(xty);
    }
    return a;
  }
  // Sum of squared residuals at coefficients a (exact, from the moments).
  double rss(const Eigen::VectorXd& a) const {
    return yy - 2.0 * a.dot(xty) + a.dot(xtx.selfadjointView<Eigen::Lower>() * a);
  }
};

}  // namespace

Pdnp1dModel train_pdnp1d(std::span<const double> equalized, std::span<const std::int8_t> bits,
                         const TargetMask& mask, int L, int M, int delta, int I,
                         PdnpTrainStats* stats) {
  if (equalized.size() != bits.size())
    throw std::invalid_argument("train_pdnp1d: sample/bit length mismatch");
  Pdnp1dModel model;
  model.predictor_order = L;
  model.isi_length = I;
  model.lookahead_bits = delta;
  model.pattern_past = M;
  model.mask = mask;
  const int pc = model.pattern_count();
  model.coeffs.assign(static_cast<std::size_t>(pc) * L, 0.0);
  model.sigma.assign(pc, 1.0);

  const int n = static_cast<int>(equalized.size());
  const int center = mask.center_col();
  std::vector<double> noise(n, 0.0);
  for (int k = 0; k < n; ++k) {
    double s = 0.0;
    for (int c = 0; c < mask.cols; ++c) {
      const int kk = k + c - center;
      if (kk >= 0 && kk < n) s += mask.taps[c] * bits[kk];
    }
    noise[k] = equalized[k] - s;
  }

  std::vector<LsqAcc> acc(pc, LsqAcc(L));
  LsqAcc pooled(L);
  Eigen::VectorXd x(L);
  const int margin = std::max({M, L + I + 2, delta + 2}) + 2;
  for (int k = margin; k < n - margin; ++k) {
    const int p = pack_pattern(k, M, delta, [&](int c) { return bits[c] > 0 ? 1 : 0; });
    for (int i = 1; i <= L; ++i) x[i - 1] = noise[k - i];
    acc[p].add(x, noise[k]);
    pooled.add(x, noise[k]);
  }
  if (pooled.count < static_cast<std::size_t>(10 * L))
    throw std::invalid_argument("train_pdnp1d: not enough training data");

  const Eigen::VectorXd a_pooled = pooled.solve();
  const double pooled_sigma =
      std::sqrt(std::max(pooled.rss(a_pooled) / static_cast<double>(pooled.count), 1e-12));

  double pattern_rss = 0.0;
  int fallbacks = 0;
  for (int p = 0; p < pc; ++p) {
    Eigen::VectorXd a;
    double sigma;
    if (acc[p].count >= static_cast<std::size_t>(L + 5)) {
      a = acc[p].solve();
      sigma = std::sqrt(std::max(acc[p].rss(a) / static_cast<double>(acc[p].count), 1e-12));
    } else {
      a = a_pooled;
      sigma = pooled_sigma;
      ++fallbacks;
    }
    for (int i = 0; i < L; ++i) model.coeffs[static_cast<std::size_t>(p) * L + i] = a[i];
    model.sigma[p] = std::max(sigma, 1e-6);
    if (acc[p].count > 0) pattern_rss += acc[p].rss(a);
  }
  if (stats) {
    stats->pattern_mse = pattern_rss / static_cast<double>(pooled.count);
    stats->pooled_mse = pooled.rss(a_pooled) / static_cast<double>(pooled.count);
    stats->fallback_patterns = fallbacks;
  }
  model.validate();
  return model;
}

Pdnp2dModel train_pdnp2d(const ReadbackBlock& equalized, const BitBlock& bits, int Np, int I,
                         int J, PdnpTrainStats* stats) {
  if (equalized.tracks() != 2 || bits.tracks() != 2 || equalized.length() != bits.length())
    throw std::invalid_argument("train_pdnp2d: need two aligned tracks");
  Pdnp2dModel model;
  model.predictor_order = Np;
  model.ahead = I;
  model.behind = J;
  const int pc = model.pattern_count();
  model.target.assign(static_cast<std::size_t>(2) * pc, 0.0);
  model.p0_cross.assign(static_cast<std::size_t>(2) * pc, 0.0);
  model.p_coeffs.assign(static_cast<std::size_t>(pc) * Np * 4, 0.0);
  model.lambda.assign(static_cast<std::size_t>(3) * pc, 1.0);

  const int n = equalized.length();
  const int margin = std::max(Np + J + 2, I + 2) + 2;
  auto pattern_at = [&](int k) {
    return pack_pattern2(k, J, I, [&](int c) {
      const int b0 = bits.bits.at(0, c) > 0 ? 1 : 0;
      const int b1 = bits.bits.at(1, c) > 0 ? 1 : 0;
      return b0 | (b1 << 1);
    });
  };

  // Pattern-dependent targets: mean filtered reading per pattern.
  std::vector<double> sum0(pc, 0.0), sum1(pc, 0.0);
  std::vector<std::size_t> cnt(pc, 0);
  double gsum0 = 0.0, gsum1 = 0.0;
  std::size_t gcnt = 0;
  for (int k = margin; k < n - margin; ++k) {
    const int p = pattern_at(k);
    sum0[p] += equalized.samples.at(0, k);
    sum1[p] += equalized.samples.at(1, k);
    ++cnt[p];
    gsum0 += equalized.samples.at(0, k);
    gsum1 += equalized.samples.at(1, k);
    ++gcnt;
  }
  if (gcnt < 100) throw std::invalid_argument("train_pdnp2d: not enough training data");
  for (int p = 0; p < pc; ++p) {
    model.target[2 * p] = cnt[p] ? sum0[p] / cnt[p] : gsum0 / gcnt;
    model.target[2 * p + 1] = cnt[p] ? sum1[p] / cnt[p] : gsum1 / gcnt;
  }

  // AR regression per pattern and output track; regressors are the other
  // track's same-column noise plus both tracks' previous Np noise samples.
  const int dim = 1 + 2 * Np;
  std::vector<std::array<std::unique_ptr<LsqAcc>, 2>> acc(pc);
  std::array<LsqAcc, 2> pooled{LsqAcc(dim), LsqAcc(dim)};
  for (int p = 0; p < pc; ++p)
    for (int t = 0; t < 2; ++t) acc[p][t] = std::make_unique<LsqAcc>(dim);

  auto noise_at = [&](int k, int t) {
    const int p = pattern_at(k);
    return equalized.samples.at(t, k) - model.target[2 * p + t];
  };

  Eigen::VectorXd x(dim);
  for (int k = margin; k < n - margin; ++k) {
    const int p = pattern_at(k);
    for (int t = 0; t < 2; ++t) {
      x[0] = noise_at(k, 1 - t);
      for (int i = 1; i <= Np; ++i) {
        x[2 * i - 1] = noise_at(k - i, 0);
        x[2 * i] = noise_at(k - i, 1);
      }
      acc[p][t]->add(x, noise_at(k, t));
      pooled[t].add(x, noise_at(k, t));
    }
  }

  std::array<Eigen::VectorXd, 2> a_pooled = {pooled[0].solve(), pooled[1].solve()};
  std::vector<std::array<Eigen::VectorXd, 2>> a_fit(pc);
  int fallbacks = 0;
  double pattern_rss = 0.0, pooled_rss = 0.0;
  std::size_t total = 0;
  for (int p = 0; p < pc; ++p) {
    for (int t = 0; t < 2; ++t) {
      if (acc[p][t]->count >= static_cast<std::size_t>(dim + 5)) {
        a_fit[p][t] = acc[p][t]->solve();
      } else {
        a_fit[p][t] = a_pooled[t];
        if (t == 0) ++fallbacks;
      }
      pattern_rss += acc[p][t]->rss(a_fit[p][t]);
      pooled_rss += acc[p][t]->rss(a_pooled[t]);
      total += acc[p][t]->count;
      model.p0_cross[2 * p + t] = a_fit[p][t][0];
      for (int i = 1; i <= Np; ++i) {
        // p_coeffs layout: [pattern][i-1][out track][in track]
        const std::size_t base = ((static_cast<std::size_t>(p) * Np) + (i - 1)) * 4 + 2 * t;
        model.p_coeffs[base + 0] = a_fit[p][t][2 * i - 1];
        model.p_coeffs[base + 1] = a_fit[p][t][2 * i];
      }
    }
  }

  // Residual covariance per pattern -> lower-triangular scale.
  std::vector<double> e11(pc, 0.0), e12(pc, 0.0), e22(pc, 0.0);
  double g11 = 0.0, g12 = 0.0, g22 = 0.0;
  for (int k = margin; k < n - margin; ++k) {
    const int p = pattern_at(k);
    double e[2];
    for (int t = 0; t < 2; ++t) {
      x[0] = noise_at(k, 1 - t);
      for (int i = 1; i <= Np; ++i) {
        x[2 * i - 1] = noise_at(k - i, 0);
        x[2 * i] = noise_at(k - i, 1);
      }
      e[t] = noise_at(k, t) - a_fit[p][t].dot(x);
    }
    e11[p] += e[0] * e[0];
    e12[p] += e[0] * e[1];
    e22[p] += e[1] * e[1];
    g11 += e[0] * e[0];
    g12 += e[0] * e[1];
    g22 += e[1] * e[1];
  }
  g11 /= gcnt;
  g12 /= gcnt;
  g22 /= gcnt;
  for (int p = 0; p < pc; ++p) {
    double c11 = g11, c12 = g12, c22 = g22;
    if (cnt[p] >= static_cast<std::size_t>(dim + 5)) {
      c11 = e11[p] / cnt[p];
      c12 = e12[p] / cnt[p];
      c22 = e22[p] / cnt[p];
    }
    const double l11 = std::sqrt(std::max(c11, 1e-12));
    const double l21 = c12 / l11;
    const double l22 = std::sqrt(std::max(c22 - l21 * l21, 1e-12));
    model.lambda[3 * p] = std::max(l11, 1e-6);
    model.lambda[3 * p + 1] = l21;
    model.lambda[3 * p + 2] = std::max(l22, 1e-6);
  }

  if (stats) {
    stats->pattern_mse = pattern_rss / static_cast<double>(total);
    stats->pooled_mse = pooled_rss / static_cast<double>(total);
    stats->fallback_patterns = fallbacks;
  }
  model.validate();
  return model;
}

Pdnp1dTrellis::Pdnp1dTrellis(const Pdnp1dModel& model, std::vector<double> observations)
    : model_(model), obs_(std::move(observations)) {
  model_.validate();
}

double Pdnp1dTrellis::log_observation(int pos, std::span<const int> window) const {
  const int w = model_.state_bits();
  const int delta = model_.lookahead_bits;
  const int base = pos + delta - w;  // column of window[0]
  auto bit = [&](int c) { return window[c - base] & 1; };
  auto bit_pm = [&](int c) { return (window[c - base] & 1) ? +1.0 : -1.0; };

  const int center = model_.mask.center_col();
  auto noise = [&](int j) -> double {
    if (j < 0) return 0.0;
    double s = 0.0;
    for (int c = 0; c < model_.mask.cols; ++c) s += model_.mask.taps[c] * bit_pm(j + c - center);
    return obs_[j] - s;
  };

  const int p = pack_pattern(pos, model_.pattern_past, delta, bit);
  const double* a = model_.coeffs.data() + static_cast<std::size_t>(p) * model_.predictor_order;
  double pred = 0.0;
  for (int i = 1; i <= model_.predictor_order; ++i) pred += a[i - 1] * noise(pos - i);
  return pdnp_log_metric(noise(pos) - pred, model_.sigma[p]);
}

Pdnp2dTrellis::Pdnp2dTrellis(const Pdnp2dModel& model, const ReadbackBlock& observations)
    : model_(model), obs_(observations) {
  model_.validate();
  if (obs_.tracks() != 2) throw std::invalid_argument("Pdnp2dTrellis: need 2 observation tracks");
}

double Pdnp2dTrellis::log_observation(int pos, std::span<const int> window) const {
  const int mem = model_.predictor_order + model_.ahead + model_.behind;
  const int base = pos + model_.ahead - mem;  // column of window[0]
  auto column = [&](int c) { return window[c - base] & 3; };

  auto pattern = [&](int j) {
    return pack_pattern2(j, model_.behind, model_.ahead, [&](int c) { return column(c); });
  };
  auto noise = [&](int j, double out[2]) {
    if (j < 0) {
      out[0] = out[1] = 0.0;
      return;
    }
    const int p = pattern(j);
    out[0] = obs_.samples.at(0, j) - model_.target[2 * p];
    out[1] = obs_.samples.at(1, j) - model_.target[2 * p + 1];
  };

  const int p = pattern(pos);
  double nk[2];
  noise(pos, nk);
  double pred0 = model_.p0_cross[2 * p] * nk[1];
  double pred1 = model_.p0_cross[2 * p + 1] * nk[0];
  double nprev[2];
  for (int i = 1; i <= model_.predictor_order; ++i) {
    noise(pos - i, nprev);
    const std::size_t b0 = ((static_cast<std::size_t>(p) * model_.predictor_order) + (i - 1)) * 4;
    pred0 += model_.p_coeffs[b0 + 0] * nprev[0] + model_.p_coeffs[b0 + 1] * nprev[1];
    pred1 += model_.p_coeffs[b0 + 2] * nprev[0] + model_.p_coeffs[b0 + 3] * nprev[1];
  }
  const double e0 = nk[0] - pred0;
  const double e1 = nk[1] - pred1;
  const double l11 = model_.lambda[3 * p], l21 = model_.lambda[3 * p + 1],
               l22 = model_.lambda[3 * p + 2];
  const double w0 = e0 / l11;
  const double w1 = (e1 - l21 * w0) / l22;
  return -std::log(2.0 * M_PI) - std::log(l11 * l22) - 0.5 * (w0 * w0 + w1 * w1);
}

}  // namespace tdmr
