#include "tdmr/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "tdmr/rng.hpp"

namespace tdmr {

namespace {

BitBlock random_bits(int tracks, int length, std::uint64_t seed) {
  BitBlock b;
  b.bits = Block2D<std::int8_t>(tracks, length);
  Rng rng(seed);
  for (auto& v : b.bits.raw()) v = static_cast<std::int8_t>(rng.sign_bit());
  return b;
}

BitBlock rows_view(const BitBlock& src, int first, int count) {
  BitBlock out;
  out.bits = Block2D<std::int8_t>(count, src.length());
  for (int t = 0; t < count; ++t)
    for (int k = 0; k < src.length(); ++k) out.bits.at(t, k) = src.bits.at(first + t, k);
  return out;
}

std::vector<std::int8_t> boundary_row(const BitBlock& written, int row) {
  // +1 convention for the off-block corner neighbors.
  std::vector<std::int8_t> out(written.length() + 2, +1);
  for (int k = 0; k < written.length(); ++k) out[k + 1] = written.bits.at(row, k);
  return out;
}

}  // namespace

TrainedSystem train_system(const SystemConfig& cfg) {
  cfg.geometry.validate();
  TrainedSystem sys;
  sys.geometry = cfg.geometry;
  sys.flip = cfg.flip;
  sys.seed = cfg.seed;
  sys.code = make_ira_code(cfg.info_length, cfg.code_rate, seed_for(cfg.seed, "code"));
  for (int t = 0; t < 3; ++t)
    sys.cosets[t] = make_coset(sys.code.transmitted_length(), seed_for(cfg.seed, "coset", t));

  // Random-bit media for the equalizer designs: five written rows, three read.
  std::vector<BitBlock> eq_bits5, eq_bits3;
  std::vector<ReadbackBlock> eq_reads;
  for (int b = 0; b < cfg.eq_train_blocks; ++b) {
    const std::uint64_t bs = seed_for(cfg.seed, "eq-train", b);
    BitBlock bits = random_bits(5, cfg.eq_train_length, seed_for(bs, "bits"));
    GrainMedium medium = generate_medium(cfg.geometry, 5, cfg.eq_train_length, seed_for(bs, "medium"));
    medium = write_block(medium, bits, cfg.flip, seed_for(bs, "write"));
    eq_reads.push_back(read_block(medium, {1, 2, 3}));
    eq_bits3.push_back(rows_view(bits, 1, 3));
    eq_bits5.push_back(std::move(bits));
  }
  std::vector<const ReadbackBlock*> reads_p;
  std::vector<const BitBlock*> bits3_p, bits5_p;
  for (std::size_t i = 0; i < eq_reads.size(); ++i) {
    reads_p.push_back(&eq_reads[i]);
    bits3_p.push_back(&eq_bits3[i]);
    bits5_p.push_back(&eq_bits5[i]);
  }
  sys.eq_fr = design_mmse_per_track(reads_p, bits3_p, cfg.eq_taps);
  sys.eq_pr1d = design_mmse_pr1d(reads_p, bits3_p, 1, TargetMask::pr_1d(), cfg.eq_taps);
  sys.eq_pr2d = design_mmse_pr2d(reads_p, bits5_p, TargetMask::pr_2d(), cfg.eq_taps);

  // Designed-pattern corpus, equalized with the shared path-1 filter.
  std::vector<TrainingFile> files = emit_training_files(cfg.geometry, cfg.training);
  for (TrainingFile& f : files) f.reads = apply_equalizer(sys.eq_fr, f.reads);

  std::vector<QuantizerSpec> quantizers;
  for (int t = 0; t < 3; ++t) {
    std::vector<double> samples;
    samples.reserve(files.size() * files[0].reads.length());
    for (const TrainingFile& f : files) {
      const double* row = f.reads.samples.row(t);
      samples.insert(samples.end(), row, row + f.reads.length());
    }
    quantizers.push_back(train_lloyd_max(samples, kReadBins));
  }

  LaipTrainConfig tc;
  tc.threads = cfg.threads;
  sys.laip = train_tables(files, std::move(quantizers), tc);
  return sys;
}

CodedBlock make_coded_block(const TrainedSystem& sys, std::uint64_t seed) {
  const int n = sys.row_length();
  CodedBlock blk;
  blk.written.bits = Block2D<std::int8_t>(5, n);

  Rng boundary_rng(seed_for(seed, "boundary-rows"));
  for (int k = 0; k < n; ++k) {
    blk.written.bits.at(0, k) = static_cast<std::int8_t>(boundary_rng.sign_bit());
    blk.written.bits.at(4, k) = static_cast<std::int8_t>(boundary_rng.sign_bit());
  }

  for (int t = 0; t < 3; ++t) {
    Rng info_rng(seed_for(seed, "info-bits", t));
    std::vector<std::uint8_t> info(sys.code.info_length);
    for (auto& b : info) b = static_cast<std::uint8_t>(info_rng.next_u64() & 1);
    const auto codeword = encode(sys.code, info);
    const auto tx = puncture(sys.code, codeword);
    const auto coset_bits = apply_coset(sys.cosets[t], tx);
    const auto written =
        interleave<std::uint8_t>(sys.cosets[t], {coset_bits.data(), coset_bits.size()});
    for (int k = 0; k < n; ++k)
      blk.written.bits.at(1 + t, k) = written[k] ? +1 : -1;
    blk.info[t] = std::move(info);
    blk.transmitted[t] = written;
  }
  blk.written.top_boundary = boundary_row(blk.written, 0);
  blk.written.bottom_boundary = boundary_row(blk.written, 4);
  return blk;
}

BoundaryEstimate apply_boundary_mode(BoundaryMode mode, const GrainMedium& written_medium,
                                     const BitBlock& written,
                                     const std::vector<std::int8_t>* prev_decoded_top) {
  const int n = written.length();
  BoundaryEstimate est;
  est.top.assign(n + 2, +1);
  est.bottom.assign(n + 2, +1);

  auto threshold_row = [&](int row, std::vector<std::int8_t>& dst) {
    const ReadbackBlock rb = read_block(written_medium, {row});
    for (int k = 0; k < n; ++k) dst[k + 1] = rb.samples.at(0, k) >= 0.0 ? +1 : -1;
  };

  switch (mode) {
    case BoundaryMode::Known:
      for (int k = 0; k < n; ++k) {
        est.top[k + 1] = written.bits.at(0, k);
        est.bottom[k + 1] = written.bits.at(4, k);
      }
      break;
    case BoundaryMode::ThresholdBoth:
      threshold_row(0, est.top);
      threshold_row(4, est.bottom);
      break;
    case BoundaryMode::FeedbackTop:
      if (!prev_decoded_top)
        throw std::invalid_argument("apply_boundary_mode: feedback mode needs the previous row");
      if (static_cast<int>(prev_decoded_top->size()) == n + 2)
        est.top = *prev_decoded_top;
      else if (static_cast<int>(prev_decoded_top->size()) == n)
        for (int k = 0; k < n; ++k) est.top[k + 1] = (*prev_decoded_top)[k];
      else
        throw std::invalid_argument("apply_boundary_mode: previous row length mismatch");
      threshold_row(4, est.bottom);
      break;
  }
  return est;
}

namespace {

int pack_column(const BoundaryEstimate&, std::int8_t fill) {
  // +1 context columns pin the trellis outside the block.
  return fill > 0 ? 0b111 : 0;
}

void score_track(TrackCounts& c, const std::int8_t* truth, const double* llrs, int n) {
  for (int k = 0; k < n; ++k) c.add((llrs[k] >= 0.0 ? +1 : -1) != truth[k]);
}

}  // namespace

WrittenTrial make_written_trial(const TrainedSystem& sys, std::uint64_t trial_seed) {
  WrittenTrial t;
  t.block = make_coded_block(sys, seed_for(trial_seed, "block"));
  GrainMedium medium =
      generate_medium(sys.geometry, 5, sys.row_length(), seed_for(trial_seed, "medium"));
  t.medium = write_block(medium, t.block.written, sys.flip, seed_for(trial_seed, "write"));
  return t;
}

StageRecord run_pipeline(const TrainedSystem& sys, const PipelineConfig& cfg,
                         std::uint64_t trial_seed,
                         const std::vector<std::int8_t>* prev_decoded_top,
                         const WrittenTrial* trial) {
  const auto t_start = std::chrono::steady_clock::now();
  if (cfg.self_loops < 1) throw std::invalid_argument("run_pipeline: self_loops >= 1");
  if (cfg.mode == DetectionMode::CenterTrack && sys.eq_pr1d.shape != IoShape::ThreeInOneOut)
    throw std::invalid_argument("run_pipeline: center-track mode needs the 3-in/1-out equalizer");

  StageRecord rec;
  rec.mode = cfg.mode;
  const int n = sys.row_length();

  WrittenTrial local;
  if (!trial) {
    local = make_written_trial(sys, trial_seed);
    trial = &local;
  }
  const CodedBlock& blk = trial->block;
  const GrainMedium& medium = trial->medium;
  const ReadbackBlock raw = read_block(medium, {1, 2, 3});

  for (int t = 0; t < 3; ++t)
    score_track(rec.raw[t], blk.written.bits.row(1 + t), raw.samples.row(t), n);

  const BoundaryEstimate boundary =
      apply_boundary_mode(cfg.boundary, medium, blk.written, prev_decoded_top);
  for (int k = 0; k < n; ++k) {
    rec.boundary[0].add(boundary.top[k + 1] != blk.written.bits.at(0, k));
    rec.boundary[1].add(boundary.bottom[k + 1] != blk.written.bits.at(4, k));
  }

  // ---- Path 1: shared 1D equalizer -> LAIP -> decoder 1 ----
  const ReadbackBlock eq1 = apply_equalizer(sys.eq_fr, raw);
  BoundaryBits lbits;
  lbits.top = boundary.top;
  lbits.bottom = boundary.bottom;
  DetectConfig dc;
  dc.self_loops = cfg.self_loops;
  dc.threads = cfg.threads;
  const LlrBlock laip_llrs = laip_detect(eq1, sys.laip, lbits, nullptr, dc);

  for (int t = 0; t < 3; ++t)
    score_track(rec.laip[t], blk.written.bits.row(1 + t), laip_llrs.llrs.row(t), n);

  const bool center_only = cfg.mode == DetectionMode::CenterTrack;
  LlrBlock a_priori;
  a_priori.llrs = Block2D<double>(3, n, 0.0);
  std::array<DecodeResult, 3> dec1;
  for (int t = 0; t < 3; ++t) {
    if (center_only && t != 1) continue;
    std::vector<double> written_order(laip_llrs.llrs.row(t), laip_llrs.llrs.row(t) + n);
    for (double l : written_order)
      rec.max_dec1_input = std::max(rec.max_dec1_input,
                                    std::abs(std::clamp(l, -cfg.clip, cfg.clip) * cfg.w1[t]));
    const auto code_order = deinterleave<double>(sys.cosets[t], written_order);
    dec1[t] = decode(sys.code, sys.cosets[t], code_order, cfg.w1[t], cfg.clip, cfg.decoder_iters);
    ++rec.dec1_calls;
    rec.dec1_converged[t] = dec1[t].converged;
    for (int i = 0; i < sys.code.info_length; ++i)
      rec.dec1_info[t].add((dec1[t].info_llrs[i] < 0.0 ? 1 : 0) != blk.info[t][i]);
    const auto ap_row = interleave<double>(sys.cosets[t], dec1[t].coded_llrs);
    for (int k = 0; k < n; ++k) a_priori.llrs.at(t, k) = ap_row[k];
  }

  // ---- Path 2: PR-shaping equalizer -> trellis detector -> decoder 2 ----
  LlrBlock bcjr_llrs;
  if (center_only) {
    const ReadbackBlock eq2 = apply_equalizer(sys.eq_pr1d, raw);
    std::vector<double> obs(eq2.samples.row(0), eq2.samples.row(0) + n);
    MaskAwgn1D model(sys.eq_pr1d.target, std::move(obs),
                     std::max(sys.eq_pr1d.residual_std[0], 1e-6));
    LlrBlock center_ap;
    center_ap.llrs = Block2D<double>(1, n);
    for (int k = 0; k < n; ++k) center_ap.llrs.at(0, k) = a_priori.llrs.at(1, k);
    BcjrConfig bc;
    bc.left_context = 1;  // +1 convention outside the block
    bc.right_context = 1;
    bcjr_llrs = bcjr_detect(model, cfg.bcjr_use_a_priori ? &center_ap : nullptr, bc);
    TrackCounts c;
    score_track(c, blk.written.bits.row(2), bcjr_llrs.llrs.row(0), n);
    rec.bcjr[1] = c;
  } else {
    const ReadbackBlock eq2 =
        apply_equalizer(sys.eq_pr2d, raw, &boundary.top, &boundary.bottom);
    std::vector<double> sigma = sys.eq_pr2d.residual_std;
    for (double& s : sigma) s = std::max(s, 1e-6);
    Mask2DThreeTrack model(sys.eq_pr2d.target, eq2, boundary.top, boundary.bottom, sigma);
    BcjrConfig bc;
    bc.left_context = pack_column(boundary, +1);
    bc.right_context = pack_column(boundary, +1);
    bcjr_llrs = bcjr_detect(model, cfg.bcjr_use_a_priori ? &a_priori : nullptr, bc);
    for (int t = 0; t < 3; ++t)
      score_track(rec.bcjr[t], blk.written.bits.row(1 + t), bcjr_llrs.llrs.row(t), n);
  }

  for (int t = 0; t < 3; ++t) {
    if (center_only && t != 1) continue;
    const int row = center_only ? 0 : t;
    std::vector<double> written_order(bcjr_llrs.llrs.row(row), bcjr_llrs.llrs.row(row) + n);
    const auto code_order = deinterleave<double>(sys.cosets[t], written_order);
    const DecodeResult d =
        decode(sys.code, sys.cosets[t], code_order, cfg.w2[t], cfg.clip, cfg.decoder_iters);
    ++rec.dec2_calls;
    rec.dec2_converged[t] = d.converged;
    bool frame_error = false;
    for (int i = 0; i < sys.code.info_length; ++i) {
      const bool err = (d.info_llrs[i] < 0.0 ? 1 : 0) != blk.info[t][i];
      rec.dec2_info[t].add(err);
      frame_error |= err;
    }
    rec.frame_errors += frame_error;
    ++rec.frames;
  }

  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return rec;
}

// ---- Baseline detectors --------------------------------------------------

namespace {

struct BaselineTrainingData {
  std::vector<BitBlock> bits5;
  std::vector<GrainMedium> media;
};

BaselineTrainingData make_baseline_media(const TrainedSystem& sys, int blocks, int length) {
  BaselineTrainingData out;
  for (int b = 0; b < blocks; ++b) {
    const std::uint64_t bs = seed_for(sys.seed, "pdnp-train", b);
    BitBlock bits = random_bits(5, length, seed_for(bs, "bits"));
    GrainMedium medium = generate_medium(sys.geometry, 5, length, seed_for(bs, "medium"));
    out.media.push_back(write_block(medium, bits, sys.flip, seed_for(bs, "write")));
    out.bits5.push_back(std::move(bits));
  }
  return out;
}

}  // namespace

Pdnp1dBaseline train_pdnp1d_baseline(const TrainedSystem& sys, const PdnpBaselineConfig& cfg) {
  BaselineTrainingData data = make_baseline_media(sys, cfg.train_blocks, cfg.train_length);
  std::vector<ReadbackBlock> reads;
  std::vector<BitBlock> bits;
  for (std::size_t i = 0; i < data.media.size(); ++i) {
    reads.push_back(read_block(data.media[i], {2}));  // center written row
    bits.push_back(rows_view(data.bits5[i], 2, 1));
  }
  std::vector<const ReadbackBlock*> rp;
  std::vector<const BitBlock*> bp;
  for (std::size_t i = 0; i < reads.size(); ++i) {
    rp.push_back(&reads[i]);
    bp.push_back(&bits[i]);
  }
  Pdnp1dBaseline base;
  base.eq = design_mmse_pr1d(rp, bp, 0, TargetMask::pr_1d(), 15);

  // Pool the equalized residual over the training blocks for the AR fit.
  std::vector<double> z;
  std::vector<std::int8_t> u;
  for (std::size_t i = 0; i < reads.size(); ++i) {
    const ReadbackBlock eq = apply_equalizer(base.eq, reads[i]);
    z.insert(z.end(), eq.samples.row(0), eq.samples.row(0) + eq.length());
    u.insert(u.end(), bits[i].bits.row(0), bits[i].bits.row(0) + bits[i].length());
  }
  base.model = train_pdnp1d(z, u, base.eq.target, cfg.L, cfg.M, cfg.delta, cfg.I1);
  return base;
}

Pdnp2dBaseline train_pdnp2d_baseline(const TrainedSystem& sys, const PdnpBaselineConfig& cfg) {
  BaselineTrainingData data = make_baseline_media(sys, cfg.train_blocks, cfg.train_length);
  Pdnp2dBaseline base;
  std::vector<ReadbackBlock> reads;
  std::vector<BitBlock> bits;
  for (std::size_t i = 0; i < data.media.size(); ++i) {
    reads.push_back(read_block(data.media[i], {base.track0, base.track1}));
    BitBlock two;
    two.bits = Block2D<std::int8_t>(2, data.bits5[i].length());
    for (int k = 0; k < data.bits5[i].length(); ++k) {
      two.bits.at(0, k) = data.bits5[i].bits.at(base.track0, k);
      two.bits.at(1, k) = data.bits5[i].bits.at(base.track1, k);
    }
    bits.push_back(std::move(two));
  }
  std::vector<const ReadbackBlock*> rp;
  std::vector<const BitBlock*> bp;
  for (std::size_t i = 0; i < reads.size(); ++i) {
    rp.push_back(&reads[i]);
    bp.push_back(&bits[i]);
  }
  base.eq = design_mmse_two_track(rp, bp, TargetMask::pr_1d(), cfg.Nc);

  // Train the vector AR model on the pooled equalized blocks.
  PdnpTrainStats stats;
  ReadbackBlock zc;
  BitBlock uc;
  int total = 0;
  for (const auto& r : reads) total += r.length();
  zc.samples = Block2D<double>(2, total);
  uc.bits = Block2D<std::int8_t>(2, total);
  int at = 0;
  for (std::size_t i = 0; i < reads.size(); ++i) {
    const ReadbackBlock eq = apply_equalizer(base.eq, reads[i]);
    for (int k = 0; k < eq.length(); ++k, ++at) {
      zc.samples.at(0, at) = eq.samples.at(0, k);
      zc.samples.at(1, at) = eq.samples.at(1, k);
      uc.bits.at(0, at) = bits[i].bits.at(0, k);
      uc.bits.at(1, at) = bits[i].bits.at(1, k);
    }
  }
  base.model = train_pdnp2d(zc, uc, cfg.Np, cfg.I2, cfg.J, &stats);
  return base;
}

LlrBlock run_pdnp1d_detector(const Pdnp1dBaseline& base, const GrainMedium& written,
                             const LlrBlock* a_priori) {
  const ReadbackBlock raw = read_block(written, {2});
  const ReadbackBlock eq = apply_equalizer(base.eq, raw);
  std::vector<double> obs(eq.samples.row(0), eq.samples.row(0) + eq.length());
  Pdnp1dTrellis model(base.model, std::move(obs));
  BcjrConfig bc;
  bc.left_context = 1;
  bc.right_context = 1;
  return bcjr_detect(model, a_priori, bc);
}

LlrBlock run_pdnp2d_detector(const Pdnp2dBaseline& base, const GrainMedium& written) {
  const ReadbackBlock raw = read_block(written, {base.track0, base.track1});
  const ReadbackBlock eq = apply_equalizer(base.eq, raw);
  Pdnp2dTrellis model(base.model, eq);
  BcjrConfig bc;
  bc.left_context = 0b11;  // both tracks +1 outside the block
  bc.right_context = 0b11;
  return bcjr_detect(model, nullptr, bc);
}

}  // namespace tdmr
