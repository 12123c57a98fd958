#include "tdmr/codec.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tdmr/rng.hpp"

namespace tdmr {

CodeSpec make_ira_code(int info_length, double target_rate, std::uint64_t seed) {
  if (info_length < 8) throw std::invalid_argument("make_ira_code: info_length too small");
  if (!(target_rate >= 0.5) || !(target_rate < 1.0))
    throw std::invalid_argument("make_ira_code: supported rates are [0.5, 1)");

  CodeSpec spec;
  spec.info_length = info_length;
  spec.block_length = 2 * info_length;
  spec.seed = seed;
  const int m = spec.parity_length();

  // Repeat profile: 80% degree-3, 20% degree-8 info bits -> 4 edges per check.
  std::vector<int> degree(info_length, 3);
  const int high = info_length / 5;
  for (int i = 0; i < high; ++i) degree[i] = 8;

  std::vector<int> stubs;
  for (int i = 0; i < info_length; ++i) stubs.insert(stubs.end(), degree[i], i);
  while (static_cast<int>(stubs.size()) % m != 0) stubs.push_back(info_length - 1);

  Rng rng(seed_for(seed, "ira-edges"));
  for (std::size_t i = stubs.size(); i > 1; --i)
    std::swap(stubs[i - 1], stubs[rng.next_below(i)]);

  const int row_weight = static_cast<int>(stubs.size()) / m;
  spec.check_info.assign(m, {});
  for (int j = 0; j < m; ++j) {
    auto& row = spec.check_info[j];
    for (int e = 0; e < row_weight; ++e) {
      int bit = stubs[static_cast<std::size_t>(j) * row_weight + e];
      // A bit appearing twice in one check cancels over GF(2); swap with a
      // random stub from the remaining pool until the row is duplicate-free.
      int guard = 0;
      while (std::find(row.begin(), row.end(), bit) != row.end() && guard < 64) {
        const std::size_t here = static_cast<std::size_t>(j) * row_weight + e;
        const std::size_t other =
            here + 1 + rng.next_below(stubs.size() - here - 1 > 0 ? stubs.size() - here - 1 : 1);
        if (other < stubs.size()) std::swap(stubs[here], stubs[other]);
        bit = stubs[here];
        ++guard;
      }
      row.push_back(bit);
    }
    std::sort(row.begin(), row.end());
  }

  // Uniform-stride parity puncturing down to ceil(k / rate) transmitted bits.
  const int n_tx = static_cast<int>(std::ceil(info_length / target_rate));
  const int drop = spec.block_length - n_tx;
  if (drop < 0) throw std::invalid_argument("make_ira_code: rate below the base code rate");
  spec.punctured.assign(m, 0);
  for (int i = 0; i < drop; ++i)
    spec.punctured[static_cast<std::size_t>((i + 0.5) * m / drop)] = 1;
  // Rounding collisions would change the rate; nudge any duplicates forward.
  int have = 0;
  for (auto v : spec.punctured) have += v;
  for (int j = 0; have < drop && j < m; ++j)
    if (!spec.punctured[j]) {
      spec.punctured[j] = 1;
      ++have;
    }

  spec.tx_to_code.reserve(n_tx);
  for (int i = 0; i < info_length; ++i) spec.tx_to_code.push_back(i);
  for (int j = 0; j < m; ++j)
    if (!spec.punctured[j]) spec.tx_to_code.push_back(info_length + j);
  return spec;
}

CosetSpec make_coset(int transmitted_length, std::uint64_t seed) {
  CosetSpec c;
  c.coset.resize(transmitted_length);
  c.perm.resize(transmitted_length);
  Rng rng(seed_for(seed, "coset-bits"));
  for (auto& b : c.coset) b = static_cast<std::uint8_t>(rng.next_u64() & 1);
  for (int i = 0; i < transmitted_length; ++i) c.perm[i] = i;
  Rng prng(seed_for(seed, "row-interleaver"));
  for (std::size_t i = c.perm.size(); i > 1; --i)
    std::swap(c.perm[i - 1], c.perm[prng.next_below(i)]);
  return c;
}

std::vector<std::uint8_t> encode(const CodeSpec& spec, std::span<const std::uint8_t> info) {
  if (static_cast<int>(info.size()) != spec.info_length)
    throw std::invalid_argument("encode: info length mismatch");
  std::vector<std::uint8_t> cw(spec.block_length, 0);
  std::copy(info.begin(), info.end(), cw.begin());
  std::uint8_t acc = 0;
  for (int j = 0; j < spec.parity_length(); ++j) {
    std::uint8_t s = acc;
    for (int bit : spec.check_info[j]) s ^= info[bit];
    cw[spec.info_length + j] = s;
    acc = s;
  }
  return cw;
}

std::vector<std::uint8_t> puncture(const CodeSpec& spec, std::span<const std::uint8_t> codeword) {
  if (static_cast<int>(codeword.size()) != spec.block_length)
    throw std::invalid_argument("puncture: codeword length mismatch");
  std::vector<std::uint8_t> out;
  out.reserve(spec.tx_to_code.size());
  for (int idx : spec.tx_to_code) out.push_back(codeword[idx]);
  return out;
}

bool syndrome_ok(const CodeSpec& spec, std::span<const std::uint8_t> codeword) {
  if (static_cast<int>(codeword.size()) != spec.block_length) return false;
  std::uint8_t prev = 0;
  for (int j = 0; j < spec.parity_length(); ++j) {
    std::uint8_t s = codeword[spec.info_length + j] ^ prev;
    for (int bit : spec.check_info[j]) s ^= codeword[bit];
    if (s) return false;
    prev = codeword[spec.info_length + j];
  }
  return true;
}

std::vector<std::uint8_t> apply_coset(const CosetSpec& coset, std::span<const std::uint8_t> bits) {
  if (bits.size() != coset.coset.size()) throw std::invalid_argument("apply_coset: length mismatch");
  std::vector<std::uint8_t> out(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) out[i] = bits[i] ^ coset.coset[i];
  return out;
}

namespace {

// Flattened Tanner graph for the sum-product sweeps.
struct Graph {
  std::vector<int> adj;        // variable index per edge, check-major
  std::vector<int> row_begin;  // per check, offset into adj
};

Graph build_graph(const CodeSpec& spec) {
  Graph g;
  const int m = spec.parity_length();
  g.row_begin.reserve(m + 1);
  g.row_begin.push_back(0);
  for (int j = 0; j < m; ++j) {
    for (int bit : spec.check_info[j]) g.adj.push_back(bit);
    g.adj.push_back(spec.info_length + j);
    if (j > 0) g.adj.push_back(spec.info_length + j - 1);
    g.row_begin.push_back(static_cast<int>(g.adj.size()));
  }
  return g;
}

}  // namespace

DecodeResult decode(const CodeSpec& spec, const CosetSpec& coset,
                    std::span<const double> channel_llrs, double weight, double clip,
                    int max_iters) {
  if (static_cast<int>(channel_llrs.size()) != spec.transmitted_length())
    throw std::invalid_argument("decode: channel LLR length mismatch");
  if (coset.coset.size() != channel_llrs.size())
    throw std::invalid_argument("decode: coset length mismatch");
  const int n = spec.block_length;
  const int m = spec.parity_length();

  // Clip, weight, remove the coset, spread onto the full codeword. The
  // sum-product sweeps run in the log P(0)/P(1) domain where the plain tanh
  // rule is valid for any check degree, so flip sign on the way in and out.
  std::vector<double> lc(n, 0.0);
  for (std::size_t t = 0; t < channel_llrs.size(); ++t) {
    double l = std::clamp(channel_llrs[t], -clip, clip) * weight;
    if (coset.coset[t]) l = -l;
    lc[spec.tx_to_code[t]] = -l;
  }

  const Graph g = build_graph(spec);
  const std::size_t n_edges = g.adj.size();
  std::vector<double> r(n_edges, 0.0);     // check -> variable messages
  std::vector<double> total = lc;          // variable posterior
  std::vector<double> t_in(64), prefix(64), suffix(64);
  std::vector<std::uint8_t> hard(n);

  DecodeResult result;
  constexpr double kMsgClip = 30.0;

  for (int iter = 1; iter <= max_iters; ++iter) {
    for (int j = 0; j < m; ++j) {
      const int begin = g.row_begin[j], end = g.row_begin[j + 1];
      const int deg = end - begin;
      for (int e = 0; e < deg; ++e) {
        const double q = std::clamp(total[g.adj[begin + e]] - r[begin + e], -kMsgClip, kMsgClip);
        t_in[e] = std::tanh(0.5 * q);
      }
      prefix[0] = 1.0;
      for (int e = 0; e < deg; ++e) prefix[e + 1] = prefix[e] * t_in[e];
      suffix[deg] = 1.0;
      for (int e = deg - 1; e >= 0; --e) suffix[e] = suffix[e + 1] * t_in[e];
      for (int e = 0; e < deg; ++e) {
        double prod = prefix[e] * suffix[e + 1];
        prod = std::clamp(prod, -0.9999999999999, 0.9999999999999);
        const double msg = std::clamp(2.0 * std::atanh(prod), -kMsgClip, kMsgClip);
        const int v = g.adj[begin + e];
        total[v] += msg - r[begin + e];
        r[begin + e] = msg;
      }
    }
    result.iterations = iter;
    for (int v = 0; v < n; ++v) hard[v] = total[v] < 0.0 ? 1 : 0;
    if (syndrome_ok(spec, hard)) {
      result.converged = true;
      break;
    }
  }

  result.info_llrs.resize(spec.info_length);
  for (int v = 0; v < spec.info_length; ++v) result.info_llrs[v] = -total[v];
  result.coded_llrs.resize(spec.transmitted_length());
  for (int t = 0; t < spec.transmitted_length(); ++t) {
    double l = -total[spec.tx_to_code[t]];
    if (coset.coset[t]) l = -l;
    result.coded_llrs[t] = l;
  }
  return result;
}

}  // namespace tdmr
