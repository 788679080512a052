#include "cpod/rng.hpp"

#include <cmath>
#include <numbers>

#include "cpod/error.hpp"

namespace cpod {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                          std::uint64_t index) {
  return splitmix64(splitmix64(master ^ fnv1a64(tag)) + index);
}

double RandomStream::uniform01() {
  return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
}

double RandomStream::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  double u1 = uniform01();
  while (u1 <= 0.0) u1 = uniform01();
  const double u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  cached_ = r * std::sin(a);
  has_cached_ = true;
  return r * std::cos(a);
}

std::vector<double> RandomStream::normals(std::size_t count) {
  std::vector<double> out(count);
  for (auto& v : out) v = normal();
  return out;
}

std::size_t RandomStream::pick(std::size_t n) {
  if (n == 0) throw Error("domain", "pick: empty range");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t u = eng_();
  while (u >= limit) u = eng_();
  return static_cast<std::size_t>(u % n);
}

std::vector<std::size_t> RandomStream::shuffled_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    std::swap(idx[i - 1], idx[pick(i)]);
  }
  return idx;
}

}  // namespace cpod
