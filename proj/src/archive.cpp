#include "tdmr/archive.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <sstream>
#include <stdexcept>

namespace tdmr {

namespace {

class Writer {
 public:
  explicit Writer(const std::string& path) : f_(std::fopen(path.c_str(), "wb")) {
    if (!f_) throw std::runtime_error("cannot open " + path + " for writing");
  }
  ~Writer() {
    if (f_) std::fclose(f_);
  }
  void bytes(const void* p, std::size_t n) {
    if (std::fwrite(p, 1, n, f_) != n) throw std::runtime_error("archive write failed");
  }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u16(std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
    bytes(b, 2);
  }
  void u32(std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 4);
  }
  void u64(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 8);
  }
  void f64(double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    u64(u);
  }
  void f64s(const std::vector<double>& v) {
    u64(v.size());
    for (double x : v) f64(x);
  }

 private:
  std::FILE* f_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : f_(std::fopen(path.c_str(), "rb")) {
    if (!f_) throw std::runtime_error("cannot open " + path);
  }
  ~Reader() {
    if (f_) std::fclose(f_);
  }
  void bytes(void* p, std::size_t n) {
    if (std::fread(p, 1, n, f_) != n) throw std::runtime_error("archive truncated");
  }
  std::uint8_t u8() {
    std::uint8_t v;
    bytes(&v, 1);
    return v;
  }
  std::uint16_t u16() {
    unsigned char b[2];
    bytes(b, 2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }
  std::uint32_t u32() {
    unsigned char b[4];
    bytes(b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    unsigned char b[8];
    bytes(b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  double f64() {
    const std::uint64_t u = u64();
    double v;
    std::memcpy(&v, &u, 8);
    return v;
  }
  std::vector<double> f64s() {
    std::vector<double> v(u64());
    for (double& x : v) x = f64();
    return v;
  }

 private:
  std::FILE* f_;
};

void write_mask(Writer& w, const TargetMask& m) {
  w.u8(static_cast<std::uint8_t>(m.kind));
  w.u16(static_cast<std::uint16_t>(m.rows));
  w.u16(static_cast<std::uint16_t>(m.cols));
  w.f64s(m.taps);
}

TargetMask read_mask(Reader& r) {
  TargetMask m;
  m.kind = static_cast<TargetKind>(r.u8());
  m.rows = r.u16();
  m.cols = r.u16();
  m.taps = r.f64s();
  return m;
}

}  // namespace

void save_archive(const std::string& path, const LutArchive& a) {
  Writer w(path);
  w.bytes("LAIP", 4);
  w.u16(1);  // version

  w.f64(a.geometry.track_pitch);
  w.f64(a.geometry.bit_length);
  w.f64(a.geometry.grains_per_bit);
  w.f64(a.geometry.reader.amplitude);
  w.f64(a.geometry.reader.sigma_down);
  w.f64(a.geometry.reader.sigma_cross);
  w.f64(a.geometry.reader.half_span_down);
  w.f64(a.geometry.reader.half_span_cross);

  w.u32(static_cast<std::uint32_t>(a.laip.quantizers.size()));
  for (const auto& q : a.laip.quantizers) {
    w.u32(static_cast<std::uint32_t>(q.bins));
    w.f64s(q.boundaries);
    w.f64s(q.levels);
  }

  w.u32(static_cast<std::uint32_t>(a.laip.tables.size()));
  for (const auto& t : a.laip.tables) {
    w.u8(static_cast<std::uint8_t>(t.group()));
    w.u8(static_cast<std::uint8_t>(t.variant()));
    w.u8(static_cast<std::uint8_t>(t.reading_axes()));
    w.u8(static_cast<std::uint8_t>(t.bit_axes()));
    std::vector<std::uint64_t> keys;
    keys.reserve(t.cells().size());
    for (const auto& [k, v] : t.cells()) keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    w.u64(keys.size());
    for (std::uint64_t k : keys) {
      w.u64(k);
      const Pmf41& p = *t.find(k);
      for (double x : p) w.f64(x);
    }
  }

  w.u32(static_cast<std::uint32_t>(a.equalizers.size()));
  for (const auto& e : a.equalizers) {
    w.u8(static_cast<std::uint8_t>(e.shape));
    write_mask(w, e.target);
    w.u16(static_cast<std::uint16_t>(e.num_taps));
    w.u16(static_cast<std::uint16_t>(e.in_rows));
    w.u16(static_cast<std::uint16_t>(e.outputs));
    w.f64s(e.taps);
    w.f64s(e.residual_std);
    w.f64(e.condition_number);
  }

  w.u32(static_cast<std::uint32_t>(a.pdnp1d.size()));
  for (const auto& m : a.pdnp1d) {
    w.u32(static_cast<std::uint32_t>(m.predictor_order));
    w.u32(static_cast<std::uint32_t>(m.isi_length));
    w.u32(static_cast<std::uint32_t>(m.lookahead_bits));
    w.u32(static_cast<std::uint32_t>(m.pattern_past));
    write_mask(w, m.mask);
    w.f64s(m.coeffs);
    w.f64s(m.sigma);
  }

  w.u32(static_cast<std::uint32_t>(a.pdnp2d.size()));
  for (const auto& m : a.pdnp2d) {
    w.u32(static_cast<std::uint32_t>(m.predictor_order));
    w.u32(static_cast<std::uint32_t>(m.ahead));
    w.u32(static_cast<std::uint32_t>(m.behind));
    w.f64s(m.target);
    w.f64s(m.p0_cross);
    w.f64s(m.p_coeffs);
    w.f64s(m.lambda);
  }
}

LutArchive load_archive(const std::string& path) {
  Reader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, "LAIP", 4) != 0)
    throw std::runtime_error(path + ": not a LAIP LUT archive");
  if (r.u16() != 1) throw std::runtime_error(path + ": unsupported archive version");

  LutArchive a;
  a.geometry.track_pitch = r.f64();
  a.geometry.bit_length = r.f64();
  a.geometry.grains_per_bit = r.f64();
  a.geometry.reader.amplitude = r.f64();
  a.geometry.reader.sigma_down = r.f64();
  a.geometry.reader.sigma_cross = r.f64();
  a.geometry.reader.half_span_down = r.f64();
  a.geometry.reader.half_span_cross = r.f64();

  const std::uint32_t nq = r.u32();
  for (std::uint32_t i = 0; i < nq; ++i) {
    QuantizerSpec q;
    q.bins = static_cast<int>(r.u32());
    q.boundaries = r.f64s();
    q.levels = r.f64s();
    a.laip.quantizers.push_back(std::move(q));
  }

  const std::uint32_t nt = r.u32();
  for (std::uint32_t i = 0; i < nt; ++i) {
    const Group g = static_cast<Group>(r.u8());
    const TableVariant v = static_cast<TableVariant>(r.u8());
    PmfTable table(g, v);
    const int n_read = r.u8();
    const int n_bits = r.u8();
    if (n_read != table.reading_axes() || n_bits != table.bit_axes())
      throw std::runtime_error(path + ": table axis descriptor mismatch");
    const std::uint64_t entries = r.u64();
    for (std::uint64_t e = 0; e < entries; ++e) {
      const std::uint64_t key = r.u64();
      Pmf41 p;
      for (double& x : p) x = r.f64();
      table.insert_raw(key, p);
    }
    a.laip.tables.push_back(std::move(table));
  }

  const std::uint32_t ne = r.u32();
  for (std::uint32_t i = 0; i < ne; ++i) {
    EqualizerSpec e;
    e.shape = static_cast<IoShape>(r.u8());
    e.target = read_mask(r);
    e.num_taps = r.u16();
    e.in_rows = r.u16();
    e.outputs = r.u16();
    e.taps = r.f64s();
    e.residual_std = r.f64s();
    e.condition_number = r.f64();
    a.equalizers.push_back(std::move(e));
  }

  const std::uint32_t n1 = r.u32();
  for (std::uint32_t i = 0; i < n1; ++i) {
    Pdnp1dModel m;
    m.predictor_order = static_cast<int>(r.u32());
    m.isi_length = static_cast<int>(r.u32());
    m.lookahead_bits = static_cast<int>(r.u32());
    m.pattern_past = static_cast<int>(r.u32());
    m.mask = read_mask(r);
    m.coeffs = r.f64s();
    m.sigma = r.f64s();
    a.pdnp1d.push_back(std::move(m));
  }

  const std::uint32_t n2 = r.u32();
  for (std::uint32_t i = 0; i < n2; ++i) {
    Pdnp2dModel m;
    m.predictor_order = static_cast<int>(r.u32());
    m.ahead = static_cast<int>(r.u32());
    m.behind = static_cast<int>(r.u32());
    m.target = r.f64s();
    m.p0_cross = r.f64s();
    m.p_coeffs = r.f64s();
    m.lambda = r.f64s();
    a.pdnp2d.push_back(std::move(m));
  }
  return a;
}

std::string describe_archive(const LutArchive& a) {
  std::ostringstream os;
  os << "geometry: TP=" << a.geometry.track_pitch << "nm BL=" << a.geometry.bit_length
     << "nm GPB=" << a.geometry.grains_per_bit << "\n";
  os << "quantizers: " << a.laip.quantizers.size() << "\n";
  static const char* group_names[] = {"FAE", "BD", "GCH"};
  static const char* variant_names[] = {"full", "no-bits", "row-boundary", "first-col",
                                        "last-col"};
  for (const auto& t : a.laip.tables) {
    os << "table " << group_names[static_cast<int>(t.group())] << "/"
       << variant_names[static_cast<int>(t.variant())] << ": " << t.size() << " cells, "
       << t.reading_axes() << " reading axes, " << t.bit_axes() << " bit axes\n";
  }
  for (const auto& e : a.equalizers)
    os << "equalizer shape=" << static_cast<int>(e.shape) << " taps=" << e.taps.size()
       << " cond=" << e.condition_number << "\n";
  for (const auto& m : a.pdnp1d)
    os << "pdnp1d L=" << m.predictor_order << " I=" << m.isi_length
       << " delta=" << m.lookahead_bits << " M=" << m.pattern_past
       << " states=" << m.state_count() << "\n";
  for (const auto& m : a.pdnp2d)
    os << "pdnp2d Np=" << m.predictor_order << " I=" << m.ahead << " J=" << m.behind
       << " states=" << m.state_count() << "\n";
  return os.str();
}

}  // namespace tdmr
