#pragma once

#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace patchy {

/// Exponent vector of a monomial / mixed partial derivative.
using MultiIndex = std::vector<int>;

inline int order_of(const MultiIndex& alpha) {
  return std::accumulate(alpha.begin(), alpha.end(), 0);
}

inline std::size_t binomial(int n, int k) {
  if (k < 0 || n < 0 || k > n) return 0;
  std::size_t result = 1;
  for (int i = 1; i <= k; ++i) {
    result = result * static_cast<std::size_t>(n - k + i) / static_cast<std::size_t>(i);
  }
  return result;
}

/// Number of multi-indices of total order `j` in dimension `n`: C(n+j-1, j).
inline std::size_t block_size(int n, int j) { return binomial(n + j - 1, j); }

inline double factorial(int k) {
  double out = 1.0;
  for (int i = 2; i <= k; ++i) out *= i;
  return out;
}

/// alpha! = prod alpha_i!
inline double multi_factorial(const MultiIndex& alpha) {
  double out = 1.0;
  for (int a : alpha) out *= factorial(a);
  return out;
}

/// All order-j multi-indices in dimension n, graded lexicographic
/// (descending exponent of x_1 first): (2,0), (1,1), (0,2).
inline std::vector<MultiIndex> enumerate_indices(int n, int j) {
  if (n < 1 || j < 0) throw std::invalid_argument("enumerate_indices: need n >= 1, j >= 0");
  std::vector<MultiIndex> out;
  out.reserve(block_size(n, j));
  MultiIndex current(static_cast<std::size_t>(n), 0);
  // Recursive fill of position `pos` with the remaining budget.
  auto fill = [&](auto&& self, int pos, int remaining) -> void {
    if (pos == n - 1) {
      current[static_cast<std::size_t>(pos)] = remaining;
      out.push_back(current);
      return;
    }
    for (int e = remaining; e >= 0; --e) {
      current[static_cast<std::size_t>(pos)] = e;
      self(self, pos + 1, remaining - e);
    }
  };
  fill(fill, 0, j);
  return out;
}

/// Position of `alpha` within enumerate_indices(n, |alpha|).
inline std::size_t rank_of(const MultiIndex& alpha) {
  const int n = static_cast<int>(alpha.size());
  int remaining = order_of(alpha);
  std::size_t rank = 0;
  for (int pos = 0; pos + 1 < n; ++pos) {
    const int a = alpha[static_cast<std::size_t>(pos)];
    const int slots = n - pos - 1;
    // Entries with a larger exponent at `pos` come first.
    for (int e = remaining; e > a; --e) rank += block_size(slots, remaining - e);
    remaining -= a;
  }
  return rank;
}

/// Multi-index counting occurrences of each coordinate in an index tuple
/// (0-based coordinates): (0, 1, 0) in n=2 -> (2, 1).
inline MultiIndex tuple_to_multi_index(std::span<const int> tuple, int n) {
  MultiIndex alpha(static_cast<std::size_t>(n), 0);
  for (int i : tuple) {
    if (i < 0 || i >= n) throw std::out_of_range("index tuple entry out of range");
    ++alpha[static_cast<std::size_t>(i)];
  }
  return alpha;
}

inline std::string to_string(const MultiIndex& alpha) {
  std::string out;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(alpha[i]);
  }
  return out;
}

}  // namespace patchy
