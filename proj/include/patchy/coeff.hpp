#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <istream>
#include <iomanip>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "patchy/error.hpp"
#include "patchy/multi_index.hpp"
#include "patchy/ortho.hpp"

namespace patchy {

/// All order-j partial derivatives of a scalar function at a point, indexed
/// by the graded-lex multi-index enumeration. Values are raw partials
/// d^j f / dx^alpha (not divided by alpha!).
struct CoeffBlock {
  int order = 0;
  int dim = 0;
  std::vector<double> values;

  CoeffBlock() = default;
  CoeffBlock(int dim_, int order_)
      : order(order_), dim(dim_), values(block_size(dim_, order_), 0.0) {}

  std::size_t size() const { return values.size(); }

  double at(const MultiIndex& alpha) const { return values[rank_of(alpha)]; }
  double& at(const MultiIndex& alpha) { return values[rank_of(alpha)]; }

  /// Lookup by an index tuple, e.g. {0, 1, 1} for d^3/dx_1 dx_2 dx_2.
  double at(std::initializer_list<int> tuple) const {
    return at(tuple_to_multi_index(std::span<const int>(tuple.begin(), tuple.size()), dim));
  }
  double& at(std::initializer_list<int> tuple) {
    return at(tuple_to_multi_index(std::span<const int>(tuple.begin(), tuple.size()), dim));
  }
  double at_tuple(std::span<const int> tuple) const {
    return at(tuple_to_multi_index(tuple, dim));
  }

  double norm() const {
    double s = 0.0;
    for (double v : values) s += v * v;
    return std::sqrt(s);
  }
};

/// Blocks of orders 0..D of a polynomial, expanded about `center`.
struct CoeffSet {
  Vec center;
  std::vector<CoeffBlock> blocks;

  CoeffSet() = default;
  CoeffSet(int dim, int max_order, Vec center_) : center(std::move(center_)) {
    if (center.size() != dim) throw Error("coeff", "center dimension mismatch");
    for (int k = 0; k <= max_order; ++k) blocks.emplace_back(dim, k);
  }
  static CoeffSet zero(int dim, int max_order) { return CoeffSet(dim, max_order, Vec::Zero(dim)); }

  int dim() const { return static_cast<int>(center.size()); }
  int max_order() const { return static_cast<int>(blocks.size()) - 1; }
  const CoeffBlock& operator[](int k) const { return blocks[static_cast<std::size_t>(k)]; }
  CoeffBlock& operator[](int k) { return blocks[static_cast<std::size_t>(k)]; }
};

/// Kronecker-derivative layout: n^k entries, tuple (i_1..i_k) at position
/// sum_m i_m n^(k-m) (first factor most significant).
struct KronRow {
  int order = 0;
  int dim = 0;
  std::vector<double> values;
};

namespace detail {

inline std::size_t ipow(int base, int exp) {
  std::size_t out = 1;
  for (int i = 0; i < exp; ++i) out *= static_cast<std::size_t>(base);
  return out;
}

inline std::vector<int> decode_position(std::size_t pos, int n, int k) {
  std::vector<int> tuple(static_cast<std::size_t>(k));
  for (int m = k - 1; m >= 0; --m) {
    tuple[static_cast<std::size_t>(m)] = static_cast<int>(pos % static_cast<std::size_t>(n));
    pos /= static_cast<std::size_t>(n);
  }
  return tuple;
}

}  // namespace detail

inline KronRow sym_to_kron(const CoeffBlock& block) {
  if (block.values.size() != block_size(block.dim, block.order)) {
    throw Error("sym_to_kron", "block length does not match (dim, order)");
  }
  KronRow row{block.order, block.dim, {}};
  const std::size_t len = detail::ipow(block.dim, block.order);
  row.values.resize(len);
  for (std::size_t p = 0; p < len; ++p) {
    const auto tuple = detail::decode_position(p, block.dim, block.order);
    row.values[p] = block.at_tuple(tuple);
  }
  return row;
}

/// Inverse of sym_to_kron. A non-symmetric row is averaged over all
/// positions that map to the same multi-index.
inline CoeffBlock kron_to_sym(const KronRow& row) {
  if (row.values.size() != detail::ipow(row.dim, row.order)) {
    throw Error("kron_to_sym", "row length does not match dim^order");
  }
  CoeffBlock block(row.dim, row.order);
  std::vector<int> counts(block.size(), 0);
  std::vector<double> first(block.size(), 0.0);
  std::vector<bool> uniform(block.size(), true);
  for (std::size_t p = 0; p < row.values.size(); ++p) {
    const auto tuple = detail::decode_position(p, row.dim, row.order);
    const std::size_t r = rank_of(tuple_to_multi_index(tuple, row.dim));
    if (counts[r] == 0) {
      first[r] = row.values[p];
    } else if (row.values[p] != first[r]) {
      uniform[r] = false;
    }
    block.values[r] += row.values[p];
    ++counts[r];
  }
  for (std::size_t r = 0; r < block.size(); ++r) {
    block.values[r] = uniform[r] ? first[r] : block.values[r] / counts[r];
  }
  return block;
}

/// Contracts every slot of the derivative tensor with `m`:
///   out(j_1..j_k) = sum_i in(i_1..i_k) m(i_1, j_1) ... m(i_k, j_k).
/// With m = V this gives partials of s(a + V xi) w.r.t. xi; with m = V^T it
/// maps them back.
inline CoeffBlock transform_block(const CoeffBlock& block, const Mat& m) {
  const int n = block.dim;
  const int k = block.order;
  if (m.rows() != n || m.cols() != n) throw Error("transform_block", "matrix dimension mismatch");
  if (k == 0) return block;
  KronRow row = sym_to_kron(block);
  std::vector<double> next(row.values.size());
  for (int mode = 0; mode < k; ++mode) {
    const std::size_t stride = detail::ipow(n, k - 1 - mode);
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t p = 0; p < row.values.size(); ++p) {
      const double v = row.values[p];
      if (v == 0.0) continue;
      const int i = static_cast<int>((p / stride) % static_cast<std::size_t>(n));
      const std::size_t base = p - static_cast<std::size_t>(i) * stride;
      for (int j = 0; j < n; ++j) next[base + static_cast<std::size_t>(j) * stride] += v * m(i, j);
    }
    row.values.swap(next);
  }
  return kron_to_sym(row);
}

/// P(C, x) = sum_alpha C[alpha] (x - center)^alpha / alpha!
inline double poly_eval(const CoeffSet& c, const Vec& x) {
  if (x.size() != c.dim()) throw Error("poly_eval", "point dimension mismatch");
  const Vec dx = x - c.center;
  const int n = c.dim();
  double sum = 0.0;
  for (int k = 0; k <= c.max_order(); ++k) {
    const auto indices = enumerate_indices(n, k);
    for (std::size_t r = 0; r < indices.size(); ++r) {
      const double coef = c[k].values[r];
      if (coef == 0.0) continue;
      double mono = 1.0;
      for (int i = 0; i < n; ++i) mono *= std::pow(dx(i), indices[r][static_cast<std::size_t>(i)]);
      sum += coef * mono / multi_factorial(indices[r]);
    }
  }
  return sum;
}

/// Order-k partials of P(C, .) at x.
inline CoeffBlock poly_partials(const CoeffSet& c, const Vec& x, int k) {
  if (k < 0 || k > c.max_order()) throw Error("poly_partials", "requested order exceeds polynomial degree");
  if (x.size() != c.dim()) throw Error("poly_partials", "point dimension mismatch");
  const int n = c.dim();
  const Vec dx = x - c.center;
  CoeffBlock out(n, k);
  const auto targets = enumerate_indices(n, k);
  for (int l = k; l <= c.max_order(); ++l) {
    const auto sources = enumerate_indices(n, l);
    for (std::size_t s = 0; s < sources.size(); ++s) {
      const double coef = c[l].values[s];
      if (coef == 0.0) continue;
      for (std::size_t t = 0; t < targets.size(); ++t) {
        double term = coef;
        bool ok = true;
        for (int i = 0; i < n && ok; ++i) {
          const int e = sources[s][static_cast<std::size_t>(i)] - targets[t][static_cast<std::size_t>(i)];
          if (e < 0) {
            ok = false;
          } else {
            term *= std::pow(dx(i), e) / factorial(e);
          }
        }
        if (ok) out.values[t] += term;
      }
    }
  }
  return out;
}

/// Re-expands C about `a` in rotated coordinates: the result C' is centered
/// at xi = 0 and satisfies P(C', xi) = P(C, a + V xi).
inline CoeffSet affine_change(const CoeffSet& c, const OrthoBasis& basis, const Vec& a) {
  const int n = c.dim();
  if (basis.dim() != n || a.size() != n) throw Error("affine_change", "dimension mismatch");
  CoeffSet out = CoeffSet::zero(n, c.max_order());
  for (int k = 0; k <= c.max_order(); ++k) {
    out[k] = transform_block(poly_partials(c, a, k), basis.columns);
  }
  return out;
}

/// Maps partials w.r.t. xi (at xi = 0) back to partials w.r.t. the original
/// state coordinates, order by order.
inline std::vector<CoeffBlock> recover_partials(const std::vector<CoeffBlock>& hat_blocks,
                                                const OrthoBasis& basis) {
  std::vector<CoeffBlock> out;
  out.reserve(hat_blocks.size());
  const Mat vt = basis.columns.transpose();
  for (const auto& b : hat_blocks) {
    if (b.dim != basis.dim()) throw Error("recover_partials", "dimension mismatch");
    out.push_back(transform_block(b, vt));
  }
  return out;
}

/// Elementwise difference, used for error reporting.
inline CoeffSet subtract(const CoeffSet& a, const CoeffSet& b) {
  if (a.dim() != b.dim() || a.max_order() != b.max_order()) throw Error("coeff", "shape mismatch");
  CoeffSet out = a;
  for (int k = 0; k <= a.max_order(); ++k) {
    for (std::size_t r = 0; r < a[k].size(); ++r) out[k].values[r] -= b[k].values[r];
  }
  return out;
}

/// One row per multi-index: "order,exponents,value" with space-separated
/// exponents. The first line holds the center.
inline void write_csv(std::ostream& os, const CoeffSet& c) {
  os << "center";
  for (int i = 0; i < c.dim(); ++i) os << (i ? " " : ",") << std::setprecision(17) << c.center(i);
  os << "\norder,exponents,value\n";
  for (int k = 0; k <= c.max_order(); ++k) {
    const auto indices = enumerate_indices(c.dim(), k);
    for (std::size_t r = 0; r < indices.size(); ++r) {
      os << k << ',' << to_string(indices[r]) << ',' << std::setprecision(17) << c[k].values[r] << '\n';
    }
  }
}

inline CoeffSet read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("center,", 0) != 0) throw Error("read_csv", "missing center line");
  std::vector<double> center;
  {
    std::istringstream ss(line.substr(7));
    double v;
    while (ss >> v) center.push_back(v);
  }
  const int n = static_cast<int>(center.size());
  std::getline(is, line);  // header
  std::vector<std::pair<MultiIndex, double>> rows;
  int max_order = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) throw Error("read_csv", "malformed row: " + line);
    MultiIndex alpha;
    std::istringstream es(line.substr(c1 + 1, c2 - c1 - 1));
    int e;
    while (es >> e) alpha.push_back(e);
    if (static_cast<int>(alpha.size()) != n) throw Error("read_csv", "exponent count mismatch");
    max_order = std::max(max_order, order_of(alpha));
    rows.emplace_back(std::move(alpha), std::stod(line.substr(c2 + 1)));
  }
  CoeffSet out(n, max_order, Eigen::Map<const Vec>(center.data(), n));
  for (const auto& [alpha, v] : rows) out[order_of(alpha)].at(alpha) = v;
  return out;
}

}  // namespace patchy
