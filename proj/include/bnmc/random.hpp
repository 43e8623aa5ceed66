#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace bnmc {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// 64-bit FNV-1a over the bytes of `text`.
inline std::uint64_t stable_hash(std::string_view text) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (const unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

/// Seed of the substream named `label` under `master`: splitmix64(master ^ fnv1a(label)).
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label) {
  return splitmix64(master ^ stable_hash(label));
}

/// Seedable pseudo-random stream.
/**
 * Wraps std::mt19937_64, whose output sequence is fixed by the standard, and
 * converts to doubles with the top 53 bits so draws are identical on every
 * conforming platform. A stream must not be shared between threads.
 */
class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n); n must be positive.
  std::size_t below(std::size_t n) {
    const std::uint64_t bound = n;
    const std::uint64_t threshold = (0 - bound) % bound;  // 2^64 mod n
    std::uint64_t x = engine_();
    while (x < threshold) {
      x = engine_();
    }
    return static_cast<std::size_t>(x % bound);
  }

 private:
  std::mt19937_64 engine_;
};

/// Seeds for the independent streams of one estimator run.
/**
 * Labels are "evidence", "query/<i>" and "schedule" (stratified query
 * selection), each hashed under the run's master seed.
 */
struct StreamSeeds {
  std::uint64_t evidence = 0;
  std::vector<std::uint64_t> queries;
  std::uint64_t schedule = 0;

  static StreamSeeds derive(std::uint64_t master, std::size_t query_count) {
    StreamSeeds seeds;
    seeds.evidence = derive_seed(master, "evidence");
    seeds.schedule = derive_seed(master, "schedule");
    for (std::size_t i = 0; i < query_count; ++i) {
      seeds.queries.push_back(derive_seed(master, "query/" + std::to_string(i)));
    }
    return seeds;
  }
};

}  // namespace bnmc
