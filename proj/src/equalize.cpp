#include "tdmr/equalize.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace tdmr {

void TargetMask::validate() const {
  if (static_cast<int>(taps.size()) != rows * cols)
    throw std::invalid_argument("TargetMask: tap count does not match dims");
  if (kind == TargetKind::FullResponse) {
    if (rows != 1 || cols != 1 || taps[0] != 1.0)
      throw std::invalid_argument("TargetMask: full-response target is the scalar 1");
  } else {
    if (tap(center_row(), center_col()) != 1.0)
      throw std::invalid_argument("TargetMask: PR masks must be monic (center tap 1)");
  }
}

TargetMask TargetMask::full_response() { return TargetMask{}; }

TargetMask TargetMask::pr_1d() {
  TargetMask m;
  m.kind = TargetKind::Pr1D;
  m.rows = 1;
  m.cols = 3;
  m.taps = {0.2223, 1.0, 0.2224};
  return m;
}

TargetMask TargetMask::pr_2d() {
  TargetMask m;
  m.kind = TargetKind::Pr2D;
  m.rows = 3;
  m.cols = 3;
  m.taps = {0.0028, 0.1623, 0.1417,
            0.2795, 1.0000, 0.2903,
            0.2347, 0.2684, 0.0780};
  return m;
}

double target_signal(const TargetMask& mask, const BitBlock& bits, int row, int k) {
  double acc = 0.0;
  for (int r = 0; r < mask.rows; ++r) {
    const int tr = row + r - mask.center_row();
    if (tr < 0 || tr >= bits.tracks()) continue;
    for (int c = 0; c < mask.cols; ++c) {
      const int kk = k + c - mask.center_col();
      if (kk < 0 || kk >= bits.length()) continue;
      acc += mask.tap(r, c) * bits.bits.at(tr, kk);
    }
  }
  return acc;
}

namespace {

// Accumulates the Wiener normal equations R h = p over training samples and
// solves them, with trace-scaled regularization on ill-conditioned R.
class NormalEquations {
 public:
  explicit NormalEquations(int dim) : r_(Eigen::MatrixXd::Zero(dim, dim)),
                                      p_(Eigen::VectorXd::Zero(dim)), x_(dim) {}

  double* regressor() { return x_.data(); }
  int dim() const { return static_cast<int>(x_.size()); }

  void add(double desired) {
    r_.selfadjointView<Eigen::Lower>().rankUpdate(x_, 1.0);
    p_ += desired * x_;
    d2_ += desired * desired;
    ++count_;
  }

  Eigen::VectorXd solve(DesignStats* stats, double* condition_out) {
    if (count_ < 10 * static_cast<std::size_t>(dim()))
      throw std::invalid_argument("design_mmse: need at least 10x more samples than taps");
    Eigen::MatrixXd r = r_.selfadjointView<Eigen::Lower>();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r);
    const double emin = es.eigenvalues().minCoeff();
    const double emax = es.eigenvalues().maxCoeff();
    if (!(emax > 0.0))
      throw std::runtime_error("design_mmse: degenerate training data (zero input power)");
    double cond = emin > 0.0 ? emax / emin : std::numeric_limits<double>::infinity();
    bool regularized = false;
    if (!(cond < 1e12)) {
      const double eps = 1e-10 * r.trace() / dim();
      r.diagonal().array() += eps;
      regularized = true;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es2(r);
      cond = es2.eigenvalues().maxCoeff() / es2.eigenvalues().minCoeff();
      if (!(cond < 1e14))
        throw std::runtime_error("design_mmse: correlation matrix is singular (condition " +
                                 std::to_string(cond) + ")");
    }

    Eigen::VectorXd h = r.ldlt().solve(p_);
    if (condition_out) *condition_out = cond;
    if (stats) {
      stats->condition_number = cond;
      stats->regularized = regularized;
      const double n = static_cast<double>(count_);
      stats->mse = (d2_ - 2.0 * h.dot(p_) + h.dot(r * h)) / n;
      const double input_power = r.trace() / (n * dim());
      stats->orthogonality =
          (p_ - r * h).cwiseAbs().maxCoeff() / n / std::max(input_power, 1e-300);
    }
    return h;
  }

 private:
  Eigen::MatrixXd r_;
  Eigen::VectorXd p_;
  Eigen::VectorXd x_;
  double d2_ = 0.0;
  std::size_t count_ = 0;
};

void check_training(const std::vector<const ReadbackBlock*>& readings,
                    const std::vector<const BitBlock*>& bits) {
  if (readings.empty() || readings.size() != bits.size())
    throw std::invalid_argument("design_mmse: need matched (readback, bits) training pairs");
}

// Residual standard deviation of (filtered output - target) per output row.
std::vector<double> residual_std(const EqualizerSpec& spec,
                                 const std::vector<const ReadbackBlock*>& readings,
                                 const std::vector<const BitBlock*>& bits, int bit_row_offset) {
  std::vector<double> acc, cnt;
  for (std::size_t f = 0; f < readings.size(); ++f) {
    const ReadbackBlock& y = *readings[f];
    const BitBlock& u = *bits[f];
    ReadbackBlock z = apply_equalizer(spec, y, u.top_boundary.empty() ? nullptr : &u.top_boundary,
                                      u.bottom_boundary.empty() ? nullptr : &u.bottom_boundary);
    if (acc.empty()) {
      acc.assign(z.tracks(), 0.0);
      cnt.assign(z.tracks(), 0.0);
    }
    const int guard = spec.num_taps;  // skip edge transients
    for (int r = 0; r < z.tracks(); ++r) {
      const int bit_row = (spec.shape == IoShape::ThreeInOneOut) ? bit_row_offset
                                                                 : r + bit_row_offset;
      for (int k = guard; k < z.length() - guard; ++k) {
        const double e = z.samples.at(r, k) - target_signal(spec.target, u, bit_row, k);
        acc[r] += e * e;
        cnt[r] += 1.0;
      }
    }
  }
  for (std::size_t r = 0; r < acc.size(); ++r) acc[r] = std::sqrt(acc[r] / std::max(cnt[r], 1.0));
  return acc;
}

}  // namespace

EqualizerSpec design_mmse_per_track(const std::vector<const ReadbackBlock*>& readings,
                                    const std::vector<const BitBlock*>& bits, int num_taps,
                                    DesignStats* stats) {
  check_training(readings, bits);
  NormalEquations ne(num_taps);
  const int c = num_taps / 2;
  for (std::size_t f = 0; f < readings.size(); ++f) {
    const ReadbackBlock& y = *readings[f];
    const BitBlock& u = *bits[f];
    if (y.tracks() != u.tracks() || y.length() != u.length())
      throw std::invalid_argument("design_mmse_per_track: shape mismatch");
    for (int t = 0; t < y.tracks(); ++t) {
      for (int k = c; k + c < y.length(); ++k) {
        double* x = ne.regressor();
        for (int i = 0; i < num_taps; ++i) x[i] = y.samples.at(t, k - i + c);
        ne.add(static_cast<double>(u.bits.at(t, k)));
      }
    }
  }
  EqualizerSpec spec;
  spec.shape = IoShape::PerTrack1D;
  spec.target = TargetMask::full_response();
  spec.num_taps = num_taps;
  spec.in_rows = 1;
  spec.outputs = 1;
  Eigen::VectorXd h = ne.solve(stats, &spec.condition_number);
  spec.taps.assign(h.data(), h.data() + h.size());
  spec.residual_std = residual_std(spec, readings, bits, 0);
  return spec;
}

EqualizerSpec design_mmse_pr1d(const std::vector<const ReadbackBlock*>& readings,
                               const std::vector<const BitBlock*>& bits, int center_row,
                               const TargetMask& mask, int num_taps, DesignStats* stats) {
  check_training(readings, bits);
  mask.validate();
  const int rows = readings[0]->tracks();
  NormalEquations ne(rows * num_taps);
  const int c = num_taps / 2;
  for (std::size_t f = 0; f < readings.size(); ++f) {
    const ReadbackBlock& y = *readings[f];
    const BitBlock& u = *bits[f];
    for (int k = c; k + c < y.length(); ++k) {
      double* x = ne.regressor();
      for (int r = 0; r < rows; ++r)
        for (int i = 0; i < num_taps; ++i) x[r * num_taps + i] = y.samples.at(r, k - i + c);
      ne.add(target_signal(mask, u, center_row, k));
    }
  }
  EqualizerSpec spec;
  spec.shape = IoShape::ThreeInOneOut;
  spec.target = mask;
  spec.num_taps = num_taps;
  spec.in_rows = rows;
  spec.outputs = 1;
  Eigen::VectorXd h = ne.solve(stats, &spec.condition_number);
  spec.taps.assign(h.data(), h.data() + h.size());
  spec.residual_std = residual_std(spec, readings, bits, center_row);
  return spec;
}

EqualizerSpec design_mmse_pr2d(const std::vector<const ReadbackBlock*>& readings,
                               const std::vector<const BitBlock*>& bits, const TargetMask& mask,
                               int num_taps, DesignStats* stats) {
  check_training(readings, bits);
  mask.validate();
  NormalEquations ne(3 * num_taps);
  const int c = num_taps / 2;
  for (std::size_t f = 0; f < readings.size(); ++f) {
    const ReadbackBlock& y = *readings[f];
    const BitBlock& u = *bits[f];
    if (y.tracks() != 3) throw std::invalid_argument("design_mmse_pr2d: need 3 reader tracks");
    if (u.tracks() != 5)
      throw std::invalid_argument("design_mmse_pr2d: need 5 bit rows (3 data + 2 boundary)");
    // Extended input: boundary bit rows above/below the three reader rows.
    auto ext = [&](int row, int k) -> double {
      if (row >= 1 && row <= 3) return y.samples.at(row - 1, k);
      return static_cast<double>(u.bits.at(row == 0 ? 0 : 4, k));
    };
    for (int out = 0; out < 3; ++out) {
      for (int k = c; k + c < y.length(); ++k) {
        double* x = ne.regressor();
        for (int r = 0; r < 3; ++r)
          for (int i = 0; i < num_taps; ++i) x[r * num_taps + i] = ext(out + r, k - i + c);
        ne.add(target_signal(mask, u, out + 1, k));
      }
    }
  }
  EqualizerSpec spec;
  spec.shape = IoShape::ThreeInThreeOut;
  spec.target = mask;
  spec.num_taps = num_taps;
  spec.in_rows = 3;
  spec.outputs = 1;
  Eigen::VectorXd h = ne.solve(stats, &spec.condition_number);
  spec.taps.assign(h.data(), h.data() + h.size());
  spec.residual_std = residual_std(spec, readings, bits, 1);
  return spec;
}

EqualizerSpec design_mmse_two_track(const std::vector<const ReadbackBlock*>& readings,
                                    const std::vector<const BitBlock*>& bits,
                                    const TargetMask& mask, int num_taps, DesignStats* stats) {
  check_training(readings, bits);
  mask.validate();
  EqualizerSpec spec;
  spec.shape = IoShape::TwoInTwoOut;
  spec.target = mask;
  spec.num_taps = num_taps;
  spec.in_rows = 2;
  spec.outputs = 2;
  spec.taps.resize(static_cast<std::size_t>(2) * 2 * num_taps);
  const int c = num_taps / 2;
  double worst_cond = 0.0;
  DesignStats tmp;
  for (int out = 0; out < 2; ++out) {
    NormalEquations ne(2 * num_taps);
    for (std::size_t f = 0; f < readings.size(); ++f) {
      const ReadbackBlock& y = *readings[f];
      const BitBlock& u = *bits[f];
      if (y.tracks() != 2 || u.tracks() != 2)
        throw std::invalid_argument("design_mmse_two_track: need 2 tracks");
      for (int k = c; k + c < y.length(); ++k) {
        double* x = ne.regressor();
        for (int r = 0; r < 2; ++r)
          for (int i = 0; i < num_taps; ++i) x[r * num_taps + i] = y.samples.at(r, k - i + c);
        ne.add(target_signal(mask, u, out, k));
      }
    }
    Eigen::VectorXd h = ne.solve(stats ? &tmp : nullptr, &spec.condition_number);
    worst_cond = std::max(worst_cond, spec.condition_number);
    for (int i = 0; i < 2 * num_taps; ++i) spec.taps[out * 2 * num_taps + i] = h[i];
    if (stats && (out == 0 || tmp.orthogonality > stats->orthogonality)) *stats = tmp;
  }
  spec.condition_number = worst_cond;
  spec.residual_std = residual_std(spec, readings, bits, 0);
  return spec;
}

ReadbackBlock apply_equalizer(const EqualizerSpec& spec, const ReadbackBlock& input,
                              const std::vector<std::int8_t>* top_boundary,
                              const std::vector<std::int8_t>* bottom_boundary) {
  const int n = input.length();
  const int c = spec.num_taps / 2;
  ReadbackBlock out;

  auto sample = [&](int t, int k) -> double {
    if (k < 0 || k >= n) return 0.0;  // symmetric zero padding
    return input.samples.at(t, k);
  };

  switch (spec.shape) {
    case IoShape::PerTrack1D: {
      out.samples = Block2D<double>(input.tracks(), n);
      for (int t = 0; t < input.tracks(); ++t)
        for (int k = 0; k < n; ++k) {
          double acc = 0.0;
          for (int i = 0; i < spec.num_taps; ++i) acc += spec.tap(0, 0, i) * sample(t, k - i + c);
          out.samples.at(t, k) = acc;
        }
      return out;
    }
    case IoShape::ThreeInOneOut: {
      if (input.tracks() != spec.in_rows)
        throw std::invalid_argument("apply_equalizer: input track count mismatch");
      out.samples = Block2D<double>(1, n);
      for (int k = 0; k < n; ++k) {
        double acc = 0.0;
        for (int r = 0; r < spec.in_rows; ++r)
          for (int i = 0; i < spec.num_taps; ++i) acc += spec.tap(0, r, i) * sample(r, k - i + c);
        out.samples.at(0, k) = acc;
      }
      return out;
    }
    case IoShape::ThreeInThreeOut: {
      if (input.tracks() != 3) throw std::invalid_argument("apply_equalizer: need 3 tracks");
      if (!top_boundary || !bottom_boundary)
        throw std::invalid_argument("apply_equalizer: boundary rows required for 3-in/3-out");
      auto boundary = [&](const std::vector<std::int8_t>& row, int k) -> double {
        // Boundary vectors may carry one extra entry per side (offset 1).
        const int off = static_cast<int>(row.size()) == n + 2 ? 1 : 0;
        const int idx = k + off;
        if (idx < 0 || idx >= static_cast<int>(row.size())) return 0.0;
        return static_cast<double>(row[idx]);
      };
      auto ext = [&](int row, int k) -> double {
        if (row >= 1 && row <= 3) return sample(row - 1, k);
        if (k < 0 || k >= n) return 0.0;
        return row == 0 ? boundary(*top_boundary, k) : boundary(*bottom_boundary, k);
      };
      out.samples = Block2D<double>(3, n);
      for (int t = 0; t < 3; ++t)
        for (int k = 0; k < n; ++k) {
          double acc = 0.0;
          for (int r = 0; r < 3; ++r)
            for (int i = 0; i < spec.num_taps; ++i) acc += spec.tap(0, r, i) * ext(t + r, k - i + c);
          out.samples.at(t, k) = acc;
        }
      return out;
    }
    case IoShape::TwoInTwoOut: {
      if (input.tracks() != 2) throw std::invalid_argument("apply_equalizer: need 2 tracks");
      out.samples = Block2D<double>(2, n);
      for (int t = 0; t < 2; ++t)
        for (int k = 0; k < n; ++k) {
          double acc = 0.0;
          for (int r = 0; r < 2; ++r)
            for (int i = 0; i < spec.num_taps; ++i) acc += spec.tap(t, r, i) * sample(r, k - i + c);
          out.samples.at(t, k) = acc;
        }
      return out;
    }
  }
  throw std::logic_error("apply_equalizer: unknown shape");
}

}  // namespace tdmr
