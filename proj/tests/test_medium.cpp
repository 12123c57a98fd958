#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "tdmr/medium.hpp"
#include "tdmr/rng.hpp"
#include "tdmr/training.hpp"

using namespace tdmr;

namespace {

BitBlock random_block(int tracks, int length, std::uint64_t seed) {
  BitBlock b;
  b.bits = Block2D<std::int8_t>(tracks, length);
  Rng rng(seed);
  for (auto& v : b.bits.raw()) v = static_cast<std::int8_t>(rng.sign_bit());
  return b;
}

MediaGeometry flat_kernel_geometry(double amplitude, double tp = 18.0, double bl = 11.0,
                                   double gpb = 1.0) {
  MediaGeometry g;
  g.track_pitch = tp;
  g.bit_length = bl;
  g.grains_per_bit = gpb;
  g.reader.amplitude = amplitude;
  g.reader.sigma_down = 0.0;  // flat response
  g.reader.sigma_cross = 0.0;
  g.reader.half_span_down = 1.5 * bl;
  g.reader.half_span_cross = 1.5 * tp;
  return g;
}

}  // namespace

TEST_CASE("empirical grains per bit tracks the target") {
  const MediaGeometry g = default_geometry();
  const GrainMedium m = generate_medium(g, 3, 4000, 77);
  const double gpb = empirical_grains_per_bit(m);
  CHECK(std::abs(gpb - g.grains_per_bit) / g.grains_per_bit < 0.05);
}

TEST_CASE("degenerate grid: one grain per cell at centers") {
  MediaGeometry g = default_geometry(18.0, 11.0, 1.0);
  const GrainMedium m = generate_medium(g, 3, 40, 5);
  REQUIRE(m.grain_count() == 3 * 40);
  for (const Grain& grain : m.tessellation().grains) {
    const double cx_expect = (grain.owner_pos + 0.5) * g.bit_length;
    const double cy_expect = (grain.owner_track + 0.5) * g.track_pitch;
    CHECK(grain.cx == doctest::Approx(cx_expect).epsilon(1e-9));
    CHECK(grain.cy == doctest::Approx(cy_expect).epsilon(1e-9));
    CHECK(grain.area == doctest::Approx(g.bit_length * g.track_pitch).epsilon(1e-9));
  }
}

TEST_CASE("tessellation is deterministic and partitions the region") {
  const MediaGeometry g = default_geometry();
  const GrainMedium a = generate_medium(g, 4, 500, 123);
  const GrainMedium b = generate_medium(g, 4, 500, 123);
  REQUIRE(a.grain_count() == b.grain_count());
  for (std::size_t i = 0; i < a.grain_count(); ++i) {
    CHECK(a.tessellation().grains[i].cx == b.tessellation().grains[i].cx);
    CHECK(a.tessellation().grains[i].area == b.tessellation().grains[i].area);
  }
  double area = 0.0;
  for (const Grain& gr : a.tessellation().grains) area += gr.area;
  CHECK(area == doctest::Approx(a.tessellation().region_area()).epsilon(1e-6));

  // Per-cell pieces cover every grain exactly once in total area.
  double piece_area = 0.0;
  for (int t = 0; t < 4; ++t)
    for (int k = 0; k < 500; ++k)
      for (const CellPiece& p : a.tessellation().pieces_for(t, k)) piece_area += p.area;
  CHECK(piece_area == doctest::Approx(area).epsilon(1e-6));
}

TEST_CASE("noiseless write matches owning bits; flips are seeded") {
  const MediaGeometry g = default_geometry();
  GrainMedium m = generate_medium(g, 3, 300, 9);
  const BitBlock bits = random_block(3, 300, 11);

  FlipModel none;
  none.p0 = 0.0;
  const GrainMedium w = write_block(m, bits, none, 1);
  for (std::size_t i = 0; i < w.grain_count(); ++i) {
    const Grain& gr = w.tessellation().grains[i];
    CHECK(w.magnetization(i) == bits.bits.at(gr.owner_track, gr.owner_pos));
  }

  const GrainMedium w1 = write_block(m, bits, default_flip_model(), 42);
  const GrainMedium w2 = write_block(m, bits, default_flip_model(), 42);
  CHECK(w1.magnetizations() == w2.magnetizations());
}

TEST_CASE("constant flip probability 0.5 decorrelates magnetization from bits") {
  const MediaGeometry g = default_geometry();
  GrainMedium m = generate_medium(g, 3, 10000, 21);
  REQUIRE(m.grain_count() > 100000);
  const BitBlock bits = random_block(3, 10000, 22);
  FlipModel half;
  half.p0 = 0.5;
  half.lambda_nm = std::numeric_limits<double>::infinity();
  const GrainMedium w = write_block(m, bits, half, 7);
  double corr = 0.0;
  for (std::size_t i = 0; i < w.grain_count(); ++i) {
    const Grain& gr = w.tessellation().grains[i];
    corr += w.magnetization(i) * bits.bits.at(gr.owner_track, gr.owner_pos);
  }
  corr /= static_cast<double>(w.grain_count());
  CHECK(std::abs(corr) < 0.02);
}

TEST_CASE("unit read: single grain filling one cell") {
  // Flat response integrating to 1 over exactly one bit cell.
  MediaGeometry g = flat_kernel_geometry(1.0 / (11.0 * 18.0));
  const GrainMedium m = generate_medium(g, 1, 1, 3);
  REQUIRE(m.grain_count() == 1);
  CHECK(m.read_cell(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("all-ones medium reads the window integral at every position") {
  MediaGeometry g = flat_kernel_geometry(1.0);
  g.reader.amplitude = 2.0 / g.reader.window_integral();  // reads +2
  const GrainMedium m = generate_medium(g, 3, 30, 4);
  for (int k = 1; k < 29; ++k) CHECK(m.read_cell(1, k) == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("read equals per-grain integration regrouped by owning bit") {
  const MediaGeometry g = default_geometry();
  GrainMedium m = generate_medium(g, 3, 60, 17);
  const BitBlock bits = random_block(3, 60, 18);
  FlipModel none;
  none.p0 = 0.0;
  const GrainMedium w = write_block(m, bits, none, 1);
  const Tessellation& tess = w.tessellation();

  for (int k : {5, 20, 40}) {
    const int t = 1;
    const double y = w.read_cell(t, k);
    // Influence of each owning bit: kernel-weighted area of its grains'
    // pieces inside the 3x3 window, grouped over the 5x5 owner neighborhood.
    double regrouped = 0.0;
    const double xc = (k + 0.5) * g.bit_length;
    const double yc = (t + 0.5) * g.track_pitch;
    for (int dt = -2; dt <= 2; ++dt)
      for (int dk = -2; dk <= 2; ++dk) {
        const int ot = t + dt, ok = k + dk;
        if (ot < 0 || ot >= 3 || ok < 0 || ok >= 60) continue;
        double alpha = 0.0;
        for (int ct = std::max(0, t - 1); ct <= std::min(2, t + 1); ++ct)
          for (int ck = std::max(0, k - 1); ck <= std::min(59, k + 1); ++ck)
            for (const CellPiece& p : tess.pieces_for(ct, ck)) {
              const Grain& gr = tess.grains[p.grain];
              if (gr.owner_track != ot || gr.owner_pos != ok) continue;
              alpha += w.magnetization(p.grain) * p.area *
                       g.reader.evaluate(p.cx - xc, p.cy - yc);
            }
        regrouped += alpha;
      }
    CHECK(y == doctest::Approx(regrouped).epsilon(1e-9));
  }
}

TEST_CASE("flip-and-subtract recovers a single bit influence exactly") {
  const MediaGeometry g = default_geometry();
  GrainMedium m = generate_medium(g, 3, 40, 31);
  BitBlock bits = random_block(3, 40, 32);
  FlipModel none;
  none.p0 = 0.0;

  const int t = 1, k = 20;        // target bit U
  const int bt = 0, bk = 20;      // neighbor A
  bits.bits.at(bt, bk) = +1;
  const GrainMedium w_plus = write_block(m, bits, none, 1);
  bits.bits.at(bt, bk) = -1;
  const GrainMedium w_minus = write_block(m, bits, none, 1);

  const double estimated = 0.5 * (w_plus.read_cell(t, k) - w_minus.read_cell(t, k));

  // Direct integral of the reader response over A's grain area (+1 state).
  const Tessellation& tess = w_plus.tessellation();
  const double xc = (k + 0.5) * g.bit_length;
  const double yc = (t + 0.5) * g.track_pitch;
  double direct = 0.0;
  for (int ct = 0; ct <= 2; ++ct)
    for (int ck = k - 1; ck <= k + 1; ++ck)
      for (const CellPiece& p : tess.pieces_for(ct, ck)) {
        const Grain& gr = tess.grains[p.grain];
        if (gr.owner_track == bt && gr.owner_pos == bk)
          direct += p.area * g.reader.evaluate(p.cx - xc, p.cy - yc);
      }
  CHECK(estimated == doctest::Approx(direct).epsilon(1e-9));
}

TEST_CASE("training layout and file volume") {
  CHECK(training_width(10301) == 41207);
  CHECK(training_width(1) == 7);
  CHECK(occurrence_column(0) == 3);

  const BitBlock b = training_bits(0b101010101, 3, 5);
  for (int i = 0; i < 3; ++i)
    for (int c = 0; c < 3; ++c)
      for (int t = 0; t < 3; ++t)
        CHECK(b.bits.at(t, 2 + 4 * i + c) == pattern_cell(0b101010101, t * 3 + c));

  TrainingSetConfig cfg;
  cfg.repeats = 2;
  cfg.reads_per_file = 2;
  cfg.seed = 99;
  cfg.flip.p0 = 0.0;
  const auto files = emit_training_files(default_geometry(), cfg);
  CHECK(files.size() == 1024);  // 512 patterns x reads

  // Flip-free: a pattern and its flipped FAE triplet differ only inside the
  // flipped bits' influence areas; the guard bands are shared.
  const int p = 0b000010111;
  const int q = flipped_pattern(p, Group::FAE);
  const TrainingFile& fp = files[static_cast<std::size_t>(p) * 2];
  const TrainingFile& fq = files[static_cast<std::size_t>(q) * 2];
  REQUIRE(fp.pattern == p);
  REQUIRE(fq.pattern == q);
  for (int k = 0; k < fp.reads.length(); ++k) {
    // Columns further than one cell from any pattern column are unaffected.
    bool near_pattern = false;
    for (int i = 0; i < cfg.repeats; ++i)
      if (std::abs(k - occurrence_column(i)) <= 2) near_pattern = true;
    if (!near_pattern)
      CHECK(fp.reads.samples.at(1, k) == doctest::Approx(fq.reads.samples.at(1, k)).epsilon(1e-12));
  }
  // The flipped rows influence the middle-track reading at the target.
  CHECK(fp.reads.samples.at(1, occurrence_column(0)) !=
        doctest::Approx(fq.reads.samples.at(1, occurrence_column(0))).epsilon(1e-12));
}

TEST_CASE("training file round trip") {
  TrainingSetConfig cfg;
  cfg.repeats = 1;
  cfg.reads_per_file = 1;
  cfg.seed = 5;
  std::vector<TrainingFile> files;
  emit_training_files(default_geometry(), cfg, [&](TrainingFile&& f) {
    if (f.pattern == 7) files.push_back(std::move(f));
  });
  REQUIRE(files.size() == 1);
  const std::string path = "/tmp/tdmr_test_pat.tdmr";
  save_training_file(path, files[0]);
  const TrainingFile loaded = load_training_file(path);
  CHECK(loaded.pattern == files[0].pattern);
  CHECK(loaded.read == files[0].read);
  CHECK(loaded.bits.bits.raw() == files[0].bits.bits.raw());
  CHECK(loaded.reads.samples.raw() == files[0].reads.samples.raw());
  CHECK(training_file_name(7, 0) == "pat007_read0.tdmr");
  std::remove(path.c_str());
}
