#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace tdmr {

// Systematic irregular repeat-accumulate code. The parity-check matrix is
// [H1 | H2]: H1 sparse with info-bit column weights drawn from a fixed
// {3, 8} degree mix, H2 the dual-diagonal accumulator. Rate above the base
// 1/2 is reached by puncturing parity bits on a uniform stride.
struct CodeSpec {
  int info_length = 0;   // k
  int block_length = 0;  // n = 2k before puncturing
  std::uint64_t seed = 0;
  std::vector<std::vector<int>> check_info;  // per check, info-bit neighbors
  std::vector<int> tx_to_code;               // transmitted position -> codeword index
  std::vector<std::uint8_t> punctured;       // per parity bit

  int parity_length() const { return block_length - info_length; }
  int transmitted_length() const { return static_cast<int>(tx_to_code.size()); }
  double achieved_rate() const {
    return static_cast<double>(info_length) / transmitted_length();
  }
};

// Builds a seeded code hitting `target_rate` (base rate 0.5 <= rate < 1) via
// parity puncturing; transmitted length is ceil(k / rate).
CodeSpec make_ira_code(int info_length, double target_rate, std::uint64_t seed);

// Known pseudo-random coset bits plus the row interleaver permutation.
struct CosetSpec {
  std::vector<std::uint8_t> coset;  // per transmitted position, 0/1
  std::vector<int> perm;            // written position j carries code position perm[j]
};

CosetSpec make_coset(int transmitted_length, std::uint64_t seed);

// Systematic encoding; returns the full n-bit codeword.
std::vector<std::uint8_t> encode(const CodeSpec& spec, std::span<const std::uint8_t> info);

// Drops punctured parities; output is in code order, transmitted length.
std::vector<std::uint8_t> puncture(const CodeSpec& spec, std::span<const std::uint8_t> codeword);

bool syndrome_ok(const CodeSpec& spec, std::span<const std::uint8_t> codeword);

std::vector<std::uint8_t> apply_coset(const CosetSpec& coset, std::span<const std::uint8_t> bits);

// Row interleaving between code order and written order; exact inverses.
template <typename T>
std::vector<T> interleave(const CosetSpec& coset, std::span<const T> code_order) {
  std::vector<T> out(code_order.size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = code_order[coset.perm[j]];
  return out;
}

template <typename T>
std::vector<T> deinterleave(const CosetSpec& coset, std::span<const T> written_order) {
  std::vector<T> out(written_order.size());
  for (std::size_t j = 0; j < out.size(); ++j) out[coset.perm[j]] = written_order[j];
  return out;
}

struct DecodeResult {
  std::vector<double> info_llrs;   // length k
  std::vector<double> coded_llrs;  // transmitted positions, coset re-applied
  bool converged = false;
  int iterations = 0;
};

// Soft coset decoding: channel LLRs (code order, transmitted positions) are
// clipped, weighted, coset-adjusted and sum-product decoded; punctured
// positions enter with zero LLR.
DecodeResult decode(const CodeSpec& spec, const CosetSpec& coset,
                    std::span<const double> channel_llrs, double weight, double clip,
                    int max_iters = 50);

}  // namespace tdmr
