#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tdmr/codec.hpp"
#include "tdmr/rng.hpp"

using namespace tdmr;

namespace {

std::vector<std::uint8_t> random_info(int k, std::uint64_t seed) {
  std::vector<std::uint8_t> v(k);
  Rng rng(seed);
  for (auto& b : v) b = static_cast<std::uint8_t>(rng.next_u64() & 1);
  return v;
}

}  // namespace

TEST_CASE("all-zero info encodes to the all-zero codeword") {
  const CodeSpec spec = make_ira_code(512, 0.66, 1);
  const std::vector<std::uint8_t> info(512, 0);
  const auto cw = encode(spec, info);
  for (auto b : cw) CHECK(b == 0);
  CHECK(syndrome_ok(spec, cw));
}

TEST_CASE("random codewords satisfy every parity check") {
  const CodeSpec spec = make_ira_code(512, 0.7, 2);
  for (int t = 0; t < 10; ++t) {
    const auto cw = encode(spec, random_info(512, 100 + t));
    CHECK(syndrome_ok(spec, cw));
  }
}

TEST_CASE("puncturing hits the requested rate exactly") {
  const CodeSpec spec = make_ira_code(1024, 0.66, 3);
  CHECK(spec.transmitted_length() == static_cast<int>(std::ceil(1024 / 0.66)));
  CHECK(spec.achieved_rate() == doctest::Approx(1024.0 / spec.transmitted_length()));
  const auto cw = encode(spec, random_info(1024, 5));
  const auto tx = puncture(spec, cw);
  CHECK(static_cast<int>(tx.size()) == spec.transmitted_length());
  // Systematic prefix survives puncturing.
  for (int i = 0; i < 1024; ++i) CHECK(tx[i] == cw[i]);
}

TEST_CASE("noiseless saturated input decodes immediately") {
  const CodeSpec spec = make_ira_code(256, 0.64, 4);
  const CosetSpec coset = make_coset(spec.transmitted_length(), 9);
  const auto info = random_info(256, 6);
  const auto tx = apply_coset(coset, puncture(spec, encode(spec, info)));
  std::vector<double> llrs(tx.size());
  for (std::size_t i = 0; i < tx.size(); ++i) llrs[i] = tx[i] ? 10.0 : -10.0;
  const DecodeResult r = decode(spec, coset, llrs, 1.0, 10.0, 50);
  CHECK(r.converged);
  CHECK(r.iterations <= 1);
  for (int i = 0; i < 256; ++i) CHECK((r.info_llrs[i] < 0.0 ? 1 : 0) == info[i]);
}

TEST_CASE("decoding corrects noisy LLRs at moderate noise") {
  const CodeSpec spec = make_ira_code(1024, 0.6, 7);
  const CosetSpec coset = make_coset(spec.transmitted_length(), 11);
  Rng rng(12);
  int failures = 0;
  for (int blk = 0; blk < 5; ++blk) {
    const auto info = random_info(1024, 200 + blk);
    const auto tx = apply_coset(coset, puncture(spec, encode(spec, info)));
    const double sigma = 0.75;
    std::vector<double> llrs(tx.size());
    for (std::size_t i = 0; i < tx.size(); ++i) {
      const double s = tx[i] ? 1.0 : -1.0;
      llrs[i] = 2.0 * (s + sigma * rng.gaussian()) / (sigma * sigma);
    }
    const DecodeResult r = decode(spec, coset, llrs, 1.0, 50.0, 60);
    int errors = 0;
    for (int i = 0; i < 1024; ++i) errors += (r.info_llrs[i] < 0.0 ? 1 : 0) != info[i];
    if (!r.converged || errors) ++failures;
  }
  CHECK(failures == 0);
}

TEST_CASE("zero weight reduces to the pure code prior") {
  const CodeSpec spec = make_ira_code(256, 0.6, 8);
  const CosetSpec coset = make_coset(spec.transmitted_length(), 13);
  Rng rng(14);
  std::vector<double> llrs(spec.transmitted_length());
  for (auto& l : llrs) l = rng.gaussian() * 3.0;
  const DecodeResult a = decode(spec, coset, llrs, 0.0, 10.0, 5);
  const std::vector<double> zeros(spec.transmitted_length(), 0.0);
  const DecodeResult b = decode(spec, coset, zeros, 1.0, 10.0, 5);
  for (std::size_t i = 0; i < a.info_llrs.size(); ++i)
    CHECK(a.info_llrs[i] == doctest::Approx(b.info_llrs[i]).epsilon(1e-12));
}

TEST_CASE("clip-then-weight bounds the decoder input") {
  const CodeSpec spec = make_ira_code(256, 0.6, 15);
  const CosetSpec coset = make_coset(spec.transmitted_length(), 16);
  // One huge LLR: with clip 10 and weight 0.75 the effective input magnitude
  // is 7.5; verify via the w=identity equivalence on a pre-clipped vector.
  std::vector<double> wild(spec.transmitted_length(), 0.0);
  wild[0] = 1e9;
  wild[1] = -123.0;
  std::vector<double> clipped(spec.transmitted_length(), 0.0);
  clipped[0] = 10.0 * 0.75;
  clipped[1] = -10.0 * 0.75;
  const DecodeResult a = decode(spec, coset, wild, 0.75, 10.0, 3);
  const DecodeResult b = decode(spec, coset, clipped, 1.0, 1e18, 3);
  for (std::size_t i = 0; i < a.coded_llrs.size(); ++i)
    CHECK(a.coded_llrs[i] == doctest::Approx(b.coded_llrs[i]).epsilon(1e-12));
}

TEST_CASE("coset transparency") {
  const CodeSpec spec = make_ira_code(512, 0.66, 17);
  const CosetSpec coset = make_coset(spec.transmitted_length(), 18);
  CosetSpec no_coset = coset;
  std::fill(no_coset.coset.begin(), no_coset.coset.end(), 0);

  const auto info = random_info(512, 19);
  const auto tx_plain = puncture(spec, encode(spec, info));
  const auto tx_coset = apply_coset(coset, tx_plain);

  Rng rng(20);
  std::vector<double> noise(tx_plain.size());
  for (auto& v : noise) v = 0.6 * rng.gaussian();

  const double sigma = 0.6;
  std::vector<double> llr_coset(tx_plain.size()), llr_plain(tx_plain.size());
  for (std::size_t i = 0; i < tx_plain.size(); ++i) {
    // Identical physical noise; the coset flips the transmitted symbol, so
    // the equivalent plain-run noise flips sign with it.
    const double s_coset = tx_coset[i] ? 1.0 : -1.0;
    llr_coset[i] = 2.0 * (s_coset + noise[i]) / (sigma * sigma);
    const double flip = coset.coset[i] ? -1.0 : 1.0;
    const double s_plain = tx_plain[i] ? 1.0 : -1.0;
    llr_plain[i] = 2.0 * (s_plain + flip * noise[i]) / (sigma * sigma);
  }
  const DecodeResult a = decode(spec, coset, llr_coset, 0.8, 10.0, 30);
  const DecodeResult b = decode(spec, no_coset, llr_plain, 0.8, 10.0, 30);
  for (std::size_t i = 0; i < a.info_llrs.size(); ++i)
    CHECK(a.info_llrs[i] == doctest::Approx(b.info_llrs[i]).epsilon(1e-12));
  // Coded-bit LLRs re-apply the coset, so they flip where the coset is set.
  for (std::size_t i = 0; i < a.coded_llrs.size(); ++i) {
    const double flip = coset.coset[i] ? -1.0 : 1.0;
    CHECK(a.coded_llrs[i] == doctest::Approx(flip * b.coded_llrs[i]).epsilon(1e-12));
  }
}

TEST_CASE("interleaver round trip and seeding") {
  const CosetSpec a = make_coset(512, 21);
  const CosetSpec b = make_coset(512, 22);
  CHECK(a.perm != b.perm);

  Rng rng(23);
  std::vector<double> data(512);
  for (auto& v : data) v = rng.gaussian();
  const auto shuffled = interleave<double>(a, data);
  const auto restored = deinterleave<double>(a, shuffled);
  CHECK(restored == data);

  CosetSpec identity = a;
  for (int i = 0; i < 512; ++i) identity.perm[i] = i;
  CHECK(interleave<double>(identity, data) == data);
}

TEST_CASE("higher punctured rate fails earlier under the same noise") {
  const CodeSpec low = make_ira_code(1024, 0.66, 30);
  const CodeSpec high = make_ira_code(1024, 0.705, 30);
  Rng rng(31);
  const double sigma = 0.82;
  long long err_low = 0, err_high = 0;
  for (int blk = 0; blk < 8; ++blk) {
    const auto info = random_info(1024, 400 + blk);
    for (const CodeSpec* spec : {&low, &high}) {
      CosetSpec c = make_coset(spec->transmitted_length(), 32);
      const auto tx = apply_coset(c, puncture(*spec, encode(*spec, info)));
      Rng noise_rng(500 + blk);  // common noise stream per block
      std::vector<double> llrs(tx.size());
      for (std::size_t i = 0; i < tx.size(); ++i) {
        const double s = tx[i] ? 1.0 : -1.0;
        llrs[i] = 2.0 * (s + sigma * noise_rng.gaussian()) / (sigma * sigma);
      }
      const DecodeResult r = decode(*spec, c, llrs, 1.0, 60.0, 60);
      long long e = 0;
      for (int i = 0; i < 1024; ++i) e += (r.info_llrs[i] < 0.0 ? 1 : 0) != info[i];
      (spec == &low ? err_low : err_high) += e;
    }
  }
  CHECK(err_high >= err_low);
}
