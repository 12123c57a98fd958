#include "tdmr/training.hpp"

#include <cstdio>
#include <cstring>
#include <stdexcept>

#include "tdmr/rng.hpp"

namespace tdmr {

BitBlock training_bits(int pattern, int repeats, std::uint64_t guard_seed) {
  if (pattern < 0 || pattern >= kPatternCount) throw std::invalid_argument("pattern out of range");
  if (repeats < 1) throw std::invalid_argument("repeats >= 1");

  const int width = training_width(repeats);
  BitBlock block;
  block.bits = Block2D<std::int8_t>(3, width, +1);

  // The guard columns are random but shared by all 512 pattern files, so a
  // pattern and its flipped counterpart differ only in the flipped bits.
  Rng guards(seed_for(guard_seed, "training-guards"));
  auto fill_guard_column = [&](int k) {
    for (int t = 0; t < 3; ++t) block.bits.at(t, k) = static_cast<std::int8_t>(guards.sign_bit());
  };

  fill_guard_column(0);
  fill_guard_column(1);
  for (int i = 0; i < repeats; ++i) {
    const int base = 2 + 4 * i;
    for (int c = 0; c < 3; ++c)
      for (int t = 0; t < 3; ++t) block.bits.at(t, base + c) = pattern_cell(pattern, t * 3 + c);
    fill_guard_column(base + 3);
  }
  fill_guard_column(width - 1);
  return block;
}

void emit_training_files(const MediaGeometry& geometry, const TrainingSetConfig& cfg,
                         const std::function<void(TrainingFile&&)>& sink) {
  if (cfg.repeats < 1) throw std::invalid_argument("repeats >= 1");
  if (cfg.reads_per_file < 1) throw std::invalid_argument("reads_per_file >= 1");

  const int width = training_width(cfg.repeats);
  // One tessellation shared by every pattern and read.
  const GrainMedium blank =
      generate_medium(geometry, 3, width, seed_for(cfg.seed, "training-medium"));

  const std::vector<int> all_tracks = {0, 1, 2};
  for (int pattern = 0; pattern < kPatternCount; ++pattern) {
    const BitBlock bits = training_bits(pattern, cfg.repeats, cfg.seed);
    for (int read = 0; read < cfg.reads_per_file; ++read) {
      const std::uint64_t write_seed =
          seed_for(cfg.seed, "training-write", static_cast<std::uint64_t>(pattern) * 1024 + read);
      const GrainMedium written = write_block(blank, bits, cfg.flip, write_seed);
      TrainingFile f;
      f.pattern = pattern;
      f.read = read;
      f.bits = bits;
      f.reads = read_block(written, all_tracks);
      sink(std::move(f));
    }
  }
}

std::vector<TrainingFile> emit_training_files(const MediaGeometry& geometry,
                                              const TrainingSetConfig& cfg) {
  std::vector<TrainingFile> out;
  out.reserve(static_cast<std::size_t>(kPatternCount) * cfg.reads_per_file);
  emit_training_files(geometry, cfg, [&](TrainingFile&& f) { out.push_back(std::move(f)); });
  return out;
}

std::string training_file_name(int pattern, int read) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "pat%03d_read%d.tdmr", pattern, read);
  return buf;
}

namespace {

void put_u16(std::FILE* f, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  std::fwrite(b, 1, 2, f);
}
void put_u32(std::FILE* f, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  std::fwrite(b, 1, 4, f);
}
std::uint16_t get_u16(std::FILE* f) {
  unsigned char b[2];
  if (std::fread(b, 1, 2, f) != 2) throw std::runtime_error("tdmr file: truncated");
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}
std::uint32_t get_u32(std::FILE* f) {
  unsigned char b[4];
  if (std::fread(b, 1, 4, f) != 4) throw std::runtime_error("tdmr file: truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void save_training_file(const std::string& path, const TrainingFile& file) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  std::fwrite("TDMR", 1, 4, f);
  put_u16(f, 1);  // version
  put_u16(f, static_cast<std::uint16_t>(file.pattern));
  put_u16(f, static_cast<std::uint16_t>(file.read));
  put_u32(f, static_cast<std::uint32_t>(file.reads.tracks()));
  put_u32(f, static_cast<std::uint32_t>(file.reads.length()));
  std::fwrite(file.reads.samples.raw().data(), sizeof(double), file.reads.samples.raw().size(), f);
  std::fwrite(file.bits.bits.raw().data(), 1, file.bits.bits.raw().size(), f);
  std::fclose(f);
}

TrainingFile load_training_file(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw std::runtime_error("cannot open " + path);
  char magic[4];
  if (std::fread(magic, 1, 4, f) != 4 || std::memcmp(magic, "TDMR", 4) != 0) {
    std::fclose(f);
    throw std::runtime_error(path + ": not a TDMR training file");
  }
  TrainingFile out;
  const std::uint16_t version = get_u16(f);
  if (version != 1) {
    std::fclose(f);
    throw std::runtime_error(path + ": unsupported version");
  }
  out.pattern = get_u16(f);
  out.read = get_u16(f);
  const int tracks = static_cast<int>(get_u32(f));
  const int length = static_cast<int>(get_u32(f));
  out.reads.samples = Block2D<double>(tracks, length);
  out.bits.bits = Block2D<std::int8_t>(tracks, length);
  const std::size_t ns = out.reads.samples.raw().size();
  if (std::fread(out.reads.samples.raw().data(), sizeof(double), ns, f) != ns ||
      std::fread(out.bits.bits.raw().data(), 1, ns, f) != ns) {
    std::fclose(f);
    throw std::runtime_error(path + ": truncated");
  }
  std::fclose(f);
  return out;
}

}  // namespace tdmr
