#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace cpod {

// Stateless 64-bit mixers used to derive independent seed streams.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view s);

// Purpose-scoped stream seed: hash of (master seed, purpose tag, index).
// Streams for different purposes never depend on how often other streams
// were consumed, so e.g. adding clustering restarts cannot change the
// generated inputs.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                          std::uint64_t index = 0);

// Deterministic random stream with explicit draw helpers. Distribution
// sampling is implemented here (not via std:: distributions) so that a
// given seed yields the same draws on every standard library.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in [0,1) with 53-bit resolution.
  double uniform01();

  // Standard normal via Box-Muller; the second value of each pair is cached.
  double normal();

  std::vector<double> normals(std::size_t count);

  // Uniform integer in [0, n); rejection sampling keeps it exact.
  std::size_t pick(std::size_t n);

  // Fisher-Yates shuffled 0..n-1.
  std::vector<std::size_t> shuffled_indices(std::size_t n);

 private:
  std::mt19937_64 eng_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace cpod
