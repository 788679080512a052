#pragma once

#include <cstddef>
#include <span>

namespace cpod {

// Pairwise (cascade) summation: associativity-robust fold whose value does
// not depend on how callers batched the inputs, only on their order.
inline double pairwise_sum(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n == 0) return 0.0;
  if (n <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

}  // namespace cpod
