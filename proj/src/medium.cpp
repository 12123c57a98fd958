#include "tdmr/medium.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "tdmr/rng.hpp"

namespace tdmr {
namespace {

using Point = std::array<double, 2>;
using Polygon = std::vector<Point>;

// Keep the half that satisfies nx*x + ny*y <= c (Sutherland-Hodgman).
void clip_half_plane(Polygon& poly, double nx, double ny, double c, Polygon& scratch) {
  if (poly.empty()) return;
  scratch.clear();
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = poly[i];
    const Point& b = poly[(i + 1) % n];
    const double da = nx * a[0] + ny * a[1] - c;
    const double db = nx * b[0] + ny * b[1] - c;
    const bool ina = da <= 0.0, inb = db <= 0.0;
    if (ina) scratch.push_back(a);
    if (ina != inb) {
      const double t = da / (da - db);
      scratch.push_back({a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])});
    }
  }
  poly.swap(scratch);
}

void clip_rect(Polygon& poly, double x0, double y0, double x1, double y1, Polygon& scratch) {
  clip_half_plane(poly, -1.0, 0.0, -x0, scratch);
  clip_half_plane(poly, 1.0, 0.0, x1, scratch);
  clip_half_plane(poly, 0.0, -1.0, -y0, scratch);
  clip_half_plane(poly, 0.0, 1.0, y1, scratch);
}

double polygon_area(const Polygon& p) {
  double s = 0.0;
  const std::size_t n = p.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = p[i];
    const Point& b = p[(i + 1) % n];
    s += a[0] * b[1] - b[0] * a[1];
  }
  return 0.5 * s;
}

// Area-weighted centroid; falls back to vertex mean for slivers.
void polygon_centroid(const Polygon& p, double area, double& cx, double& cy) {
  const std::size_t n = p.size();
  if (std::abs(area) < 1e-12) {
    cx = cy = 0.0;
    for (const auto& v : p) {
      cx += v[0];
      cy += v[1];
    }
    cx /= n;
    cy /= n;
    return;
  }
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = p[i];
    const Point& b = p[(i + 1) % n];
    const double w = a[0] * b[1] - b[0] * a[1];
    sx += (a[0] + b[0]) * w;
    sy += (a[1] + b[1]) * w;
  }
  cx = sx / (6.0 * area);
  cy = sy / (6.0 * area);
}

}  // namespace

double FlipModel::probability(double transition_distance) const {
  if (p0 <= 0.0) return 0.0;
  if (std::isinf(lambda_nm)) return p0;
  if (std::isinf(transition_distance)) return 0.0;
  return p0 * std::exp(-transition_distance / lambda_nm);
}

FlipModel default_flip_model() {
  // Calibrated against default_geometry() so that sign-thresholding the raw
  // read-back of random coded bits gives BER near the 0.1853 operating point.
  FlipModel m;
  m.p0 = 0.45;
  m.lambda_nm = 4.0;
  return m;
}

GrainMedium generate_medium(const MediaGeometry& geometry, int tracks, int length,
                            std::uint64_t seed) {
  geometry.validate();
  if (tracks < 1 || length < 1) throw std::invalid_argument("generate_medium: tracks/length >= 1");

  const double tp = geometry.track_pitch;
  const double bl = geometry.bit_length;
  const double lx = length * bl;
  const double ly = tracks * tp;

  // Jittered-grid seed points. The grid is stretched so an integer number of
  // rows and columns tile the region exactly; the total seed count then
  // matches the target grain density to well under the GPB tolerance.
  const double target_total = static_cast<double>(tracks) * length * geometry.grains_per_bit;
  const double sy_nominal = tp / std::sqrt(geometry.grains_per_bit);
  int ny = std::max(1, static_cast<int>(std::llround(ly / sy_nominal)));
  int nx = std::max(1, static_cast<int>(std::llround(target_total / ny)));
  const double sx = lx / nx;
  const double sy = ly / ny;

  const double jitter = (geometry.grains_per_bit == 1.0 && tracks * length == nx * ny &&
                         std::abs(sx - bl) < 1e-9 && std::abs(sy - tp) < 1e-9)
                            ? 0.0   // degenerate grid case: grains == bit cells
                            : 0.85; // fraction of the pitch available to jitter

  Rng rng(seed_for(seed, "tessellation"));
  std::vector<Point> seeds(static_cast<std::size_t>(nx) * ny);
  for (int gy = 0; gy < ny; ++gy) {
    for (int gx = 0; gx < nx; ++gx) {
      const double jx = jitter * sx * (rng.next_double() - 0.5);
      const double jy = jitter * sy * (rng.next_double() - 0.5);
      seeds[static_cast<std::size_t>(gy) * nx + gx] = {(gx + 0.5) * sx + jx, (gy + 0.5) * sy + jy};
    }
  }

  // Neighbor offsets for bisector clipping, nearest first so that the
  // distance-based early exit prunes the far ones.
  struct Offset {
    int dx, dy;
    double grid_dist;
  };
  std::vector<Offset> offsets;
  constexpr int kReach = 6;
  for (int dy = -kReach; dy <= kReach; ++dy)
    for (int dx = -kReach; dx <= kReach; ++dx) {
      if (dx == 0 && dy == 0) continue;
      offsets.push_back({dx, dy, std::hypot(dx * sx, dy * sy)});
    }
  std::sort(offsets.begin(), offsets.end(),
            [](const Offset& a, const Offset& b) { return a.grid_dist < b.grid_dist; });
  // Two jittered seeds can each sit up to this far from their grid centers.
  const double jitter_slack = jitter * std::hypot(sx, sy);

  auto tess = std::make_shared<Tessellation>();
  tess->geometry = geometry;
  tess->tracks = tracks;
  tess->length = length;
  tess->seed = seed;
  tess->grains.reserve(seeds.size());
  tess->cell_pieces.assign(static_cast<std::size_t>(tracks) * length, {});

  const double pad = 2.0 * std::max(sx, sy);
  Polygon poly, scratch, piece;
  poly.reserve(16);
  scratch.reserve(16);

  for (int gy = 0; gy < ny; ++gy) {
    for (int gx = 0; gx < nx; ++gx) {
      const Point& s = seeds[static_cast<std::size_t>(gy) * nx + gx];
      poly.clear();
      poly.push_back({s[0] - pad, s[1] - pad});
      poly.push_back({s[0] + pad, s[1] - pad});
      poly.push_back({s[0] + pad, s[1] + pad});
      poly.push_back({s[0] - pad, s[1] + pad});

      double max_r2 = 2.0 * pad * pad;
      for (const Offset& o : offsets) {
        // A seed farther than twice the polygon radius (plus jitter slack)
        // cannot cut the cell; offsets are sorted, so stop there.
        if (o.grid_dist > 2.0 * std::sqrt(max_r2) + jitter_slack) break;
        const int qx = gx + o.dx, qy = gy + o.dy;
        if (qx < 0 || qx >= nx || qy < 0 || qy >= ny) continue;
        const Point& q = seeds[static_cast<std::size_t>(qy) * nx + qx];
        // Bisector: keep points closer to s than to q.
        const double nxv = q[0] - s[0], nyv = q[1] - s[1];
        const double c = 0.5 * (q[0] * q[0] - s[0] * s[0] + q[1] * q[1] - s[1] * s[1]);
        clip_half_plane(poly, nxv, nyv, c, scratch);
        if (poly.empty()) break;
        max_r2 = 0.0;
        for (const auto& v : poly) {
          const double dx = v[0] - s[0], dy = v[1] - s[1];
          max_r2 = std::max(max_r2, dx * dx + dy * dy);
        }
      }
      clip_rect(poly, 0.0, 0.0, lx, ly, scratch);
      const double area = polygon_area(poly);
      if (area < 1e-9) continue;

      Grain g;
      g.area = area;
      polygon_centroid(poly, area, g.cx, g.cy);
      g.owner_pos = std::clamp(static_cast<int>(g.cx / bl), 0, length - 1);
      g.owner_track = std::clamp(static_cast<int>(g.cy / tp), 0, tracks - 1);
      const std::int32_t grain_idx = static_cast<std::int32_t>(tess->grains.size());
      tess->grains.push_back(g);

      // Split the grain into per-bit-cell pieces for the read quadrature.
      double bx0 = poly[0][0], bx1 = poly[0][0], by0 = poly[0][1], by1 = poly[0][1];
      for (const auto& v : poly) {
        bx0 = std::min(bx0, v[0]);
        bx1 = std::max(bx1, v[0]);
        by0 = std::min(by0, v[1]);
        by1 = std::max(by1, v[1]);
      }
      const int k0 = std::clamp(static_cast<int>(bx0 / bl), 0, length - 1);
      const int k1 = std::clamp(static_cast<int>(bx1 / bl), 0, length - 1);
      const int t0 = std::clamp(static_cast<int>(by0 / tp), 0, tracks - 1);
      const int t1 = std::clamp(static_cast<int>(by1 / tp), 0, tracks - 1);
      for (int t = t0; t <= t1; ++t) {
        for (int k = k0; k <= k1; ++k) {
          piece = poly;
          clip_rect(piece, k * bl, t * tp, (k + 1) * bl, (t + 1) * tp, scratch);
          const double pa = polygon_area(piece);
          if (pa < 1e-9) continue;
          CellPiece cp;
          cp.grain = grain_idx;
          cp.area = pa;
          polygon_centroid(piece, pa, cp.cx, cp.cy);
          tess->cell_pieces[static_cast<std::size_t>(t) * length + k].push_back(cp);
        }
      }
    }
  }

  std::vector<std::int8_t> mag(tess->grains.size(), +1);
  return GrainMedium(std::move(tess), std::move(mag));
}

GrainMedium write_block(const GrainMedium& medium, const BitBlock& bits, const FlipModel& flip,
                        std::uint64_t seed) {
  validate_bits(bits);
  const Tessellation& tess = medium.tessellation();
  if (bits.tracks() > tess.tracks || bits.length() > tess.length)
    throw std::invalid_argument("write_block: bit block does not fit within medium");

  const double bl = tess.geometry.bit_length;

  // Downtrack positions of write transitions per track, for the flip model.
  std::vector<std::vector<double>> transitions(bits.tracks());
  for (int t = 0; t < bits.tracks(); ++t) {
    const std::int8_t* row = bits.bits.row(t);
    for (int k = 1; k < bits.length(); ++k)
      if (row[k] != row[k - 1]) transitions[t].push_back(k * bl);
  }

  std::vector<std::int8_t> mag = medium.magnetizations();
  const std::uint64_t flip_seed = seed_for(seed, "grain-flip");
  for (std::size_t gi = 0; gi < tess.grains.size(); ++gi) {
    const Grain& g = tess.grains[gi];
    if (g.owner_track >= bits.tracks() || g.owner_pos >= bits.length()) continue;
    std::int8_t polarity = bits.bits.at(g.owner_track, g.owner_pos);

    double dist = std::numeric_limits<double>::infinity();
    const auto& tx = transitions[g.owner_track];
    if (!tx.empty()) {
      auto it = std::lower_bound(tx.begin(), tx.end(), g.cx);
      if (it != tx.end()) dist = std::min(dist, *it - g.cx);
      if (it != tx.begin()) dist = std::min(dist, g.cx - *std::prev(it));
    }
    const double p = flip.probability(dist);
    if (p > 0.0 && unit_draw(flip_seed, gi) < p) polarity = -polarity;
    mag[gi] = polarity;
  }
  return GrainMedium(medium.tessellation_ptr(), std::move(mag));
}

double GrainMedium::read_cell(int t, int k) const {
  const Tessellation& tess = *tess_;
  const double xc = (k + 0.5) * tess.geometry.bit_length;
  const double yc = (t + 0.5) * tess.geometry.track_pitch;
  const ReaderKernel& kernel = tess.geometry.reader;

  double acc = 0.0;
  for (int dt = -1; dt <= 1; ++dt) {
    const int tt = t + dt;
    if (tt < 0 || tt >= tess.tracks) continue;
    for (int dk = -1; dk <= 1; ++dk) {
      const int kk = k + dk;
      if (kk < 0 || kk >= tess.length) continue;
      for (const CellPiece& p : tess.pieces_for(tt, kk))
        acc += mag_[p.grain] * p.area * kernel.evaluate(p.cx - xc, p.cy - yc);
    }
  }
  return acc;
}

ReadbackBlock read_block(const GrainMedium& medium, const std::vector<int>& reader_tracks) {
  for (int t : reader_tracks)
    if (t < 0 || t >= medium.tracks()) throw std::invalid_argument("read_block: track out of range");
  ReadbackBlock out;
  out.samples = Block2D<double>(static_cast<int>(reader_tracks.size()), medium.length());
  for (std::size_t r = 0; r < reader_tracks.size(); ++r)
    for (int k = 0; k < medium.length(); ++k)
      out.samples.at(static_cast<int>(r), k) = medium.read_cell(reader_tracks[r], k);
  return out;
}

double empirical_grains_per_bit(const GrainMedium& medium) {
  return static_cast<double>(medium.grain_count()) /
         (static_cast<double>(medium.tracks()) * medium.length());
}

}  // namespace tdmr
