#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "patchy/coeff.hpp"
#include "patchy/error.hpp"
#include "patchy/multi_index.hpp"

namespace patchy {

/// Index bookkeeping shared by every Taylor series of a given (dim, order).
class TaylorLayout {
 public:
  TaylorLayout(int dim, int max_order) : dim_(dim), max_order_(max_order) {
    if (dim < 1 || max_order < 0) throw Error("taylor", "invalid layout");
    for (int k = 0; k <= max_order; ++k) {
      offsets_.push_back(indices_.size());
      for (auto& a : enumerate_indices(dim, k)) indices_.push_back(std::move(a));
    }
    offsets_.push_back(indices_.size());
    for (std::size_t i = 0; i < indices_.size(); ++i) {
      for (std::size_t j = 0; j < indices_.size(); ++j) {
        if (order_of(indices_[i]) + order_of(indices_[j]) > max_order) continue;
        MultiIndex sum = indices_[i];
        for (int d = 0; d < dim; ++d) sum[static_cast<std::size_t>(d)] += indices_[j][static_cast<std::size_t>(d)];
        products_.push_back({i, j, flat(sum)});
      }
    }
  }

  int dim() const { return dim_; }
  int max_order() const { return max_order_; }
  std::size_t size() const { return indices_.size(); }
  const MultiIndex& index(std::size_t flat_pos) const { return indices_[flat_pos]; }
  std::size_t offset(int order) const { return offsets_[static_cast<std::size_t>(order)]; }
  std::size_t flat(const MultiIndex& alpha) const { return offsets_[static_cast<std::size_t>(order_of(alpha))] + rank_of(alpha); }

  struct Product {
    std::size_t lhs, rhs, out;
  };
  const std::vector<Product>& products() const { return products_; }

 private:
  int dim_;
  int max_order_;
  std::vector<MultiIndex> indices_;
  std::vector<std::size_t> offsets_;
  std::vector<Product> products_;
};

using LayoutPtr = std::shared_ptr<const TaylorLayout>;

inline LayoutPtr make_layout(int dim, int max_order) {
  return std::make_shared<const TaylorLayout>(dim, max_order);
}

/// Truncated multivariate Taylor series in the displacement from an
/// expansion point. Stores Taylor coefficients c_alpha = d^alpha f / alpha!;
/// products drop every term above the layout's max order.
class Taylor {
 public:
  Taylor() = default;
  explicit Taylor(LayoutPtr layout) : layout_(std::move(layout)), c_(layout_->size(), 0.0) {}

  static Taylor constant(LayoutPtr layout, double value) {
    Taylor t(std::move(layout));
    t.c_[0] = value;
    return t;
  }
  /// x_i expanded about x_i = value: value + dx_i.
  static Taylor variable(LayoutPtr layout, int i, double value) {
    Taylor t = constant(layout, value);
    if (layout->max_order() >= 1) {
      MultiIndex e(static_cast<std::size_t>(layout->dim()), 0);
      e[static_cast<std::size_t>(i)] = 1;
      t.c_[layout->flat(e)] = 1.0;
    }
    return t;
  }

  const LayoutPtr& layout() const { return layout_; }
  int dim() const { return layout_->dim(); }
  int max_order() const { return layout_->max_order(); }
  double value() const { return c_[0]; }
  const std::vector<double>& coefficients() const { return c_; }

  double coeff(const MultiIndex& alpha) const { return c_[layout_->flat(alpha)]; }
  double& coeff(const MultiIndex& alpha) { return c_[layout_->flat(alpha)]; }
  double coeff_flat(std::size_t i) const { return c_[i]; }
  double& coeff_flat(std::size_t i) { return c_[i]; }

  /// Raw partial d^alpha f at the expansion point.
  double partial(const MultiIndex& alpha) const { return coeff(alpha) * multi_factorial(alpha); }

  CoeffBlock block(int k) const {
    CoeffBlock b(dim(), k);
    if (k > max_order()) return b;
    const std::size_t off = layout_->offset(k);
    for (std::size_t r = 0; r < b.size(); ++r) {
      b.values[r] = c_[off + r] * multi_factorial(layout_->index(off + r));
    }
    return b;
  }

  void set_block(const CoeffBlock& b) {
    if (b.dim != dim()) throw Error("taylor", "block dimension mismatch");
    if (b.order > max_order()) return;
    const std::size_t off = layout_->offset(b.order);
    for (std::size_t r = 0; r < b.size(); ++r) {
      c_[off + r] = b.values[r] / multi_factorial(layout_->index(off + r));
    }
  }

  void zero_order(int k) {
    if (k > max_order()) return;
    for (std::size_t i = layout_->offset(k); i < layout_->offset(k + 1); ++i) c_[i] = 0.0;
  }

  /// Raw-partial CoeffSet of orders 0..max_order, centered at `center`.
  CoeffSet to_coeffs(const Vec& center) const {
    CoeffSet out(dim(), max_order(), center);
    for (int k = 0; k <= max_order(); ++k) out[k] = block(k);
    return out;
  }

  static Taylor from_coeffs(LayoutPtr layout, const CoeffSet& c) {
    Taylor t(std::move(layout));
    for (int k = 0; k <= std::min(c.max_order(), t.max_order()); ++k) t.set_block(c[k]);
    return t;
  }

  /// d/dx_i, truncated to the same layout (top order becomes zero).
  Taylor derivative(int i) const {
    Taylor out(layout_);
    for (std::size_t p = 0; p < c_.size(); ++p) {
      const MultiIndex& alpha = layout_->index(p);
      const int a = alpha[static_cast<std::size_t>(i)];
      if (a == 0) continue;
      MultiIndex lower = alpha;
      --lower[static_cast<std::size_t>(i)];
      out.c_[layout_->flat(lower)] += a * c_[p];
    }
    return out;
  }

  /// Evaluates the truncated series at displacement dx.
  double eval(const Vec& dx) const {
    double sum = 0.0;
    for (std::size_t p = 0; p < c_.size(); ++p) {
      if (c_[p] == 0.0) continue;
      double mono = c_[p];
      const MultiIndex& alpha = layout_->index(p);
      for (int d = 0; d < dim(); ++d) mono *= std::pow(dx(d), alpha[static_cast<std::size_t>(d)]);
      sum += mono;
    }
    return sum;
  }

  Taylor& operator+=(const Taylor& o) {
    for (std::size_t p = 0; p < c_.size(); ++p) c_[p] += o.c_[p];
    return *this;
  }
  Taylor& operator-=(const Taylor& o) {
    for (std::size_t p = 0; p < c_.size(); ++p) c_[p] -= o.c_[p];
    return *this;
  }
  Taylor& operator*=(double s) {
    for (double& v : c_) v *= s;
    return *this;
  }
  Taylor& operator+=(double s) {
    c_[0] += s;
    return *this;
  }

  friend Taylor operator+(Taylor a, const Taylor& b) { return a += b; }
  friend Taylor operator-(Taylor a, const Taylor& b) { return a -= b; }
  friend Taylor operator*(Taylor a, double s) { return a *= s; }
  friend Taylor operator*(double s, Taylor a) { return a *= s; }
  friend Taylor operator+(Taylor a, double s) { return a += s; }
  friend Taylor operator-(Taylor a) { return a *= -1.0; }

  friend Taylor operator*(const Taylor& a, const Taylor& b) {
    Taylor out(a.layout_);
    for (const auto& p : a.layout_->products()) {
      out.c_[p.out] += a.c_[p.lhs] * b.c_[p.rhs];
    }
    return out;
  }

 private:
  LayoutPtr layout_;
  std::vector<double> c_;
};

namespace detail {

/// Splits t into (value, t - value).
inline Taylor without_constant(const Taylor& t) {
  Taylor u = t;
  u.coeff_flat(0) = 0.0;
  return u;
}

}  // namespace detail

/// 1 / t via the geometric series in the non-constant part.
inline Taylor reciprocal(const Taylor& t) {
  const double a0 = t.value();
  if (a0 == 0.0) throw Error("taylor", "reciprocal of a series with zero constant term");
  const Taylor u = detail::without_constant(t) * (-1.0 / a0);
  Taylor sum = Taylor::constant(t.layout(), 1.0);
  Taylor power = sum;
  for (int m = 1; m <= t.max_order(); ++m) {
    power = power * u;
    sum += power;
  }
  return sum * (1.0 / a0);
}

inline void sincos(const Taylor& t, Taylor& s, Taylor& c) {
  const double a0 = t.value();
  const Taylor u = detail::without_constant(t);
  Taylor su = Taylor::constant(t.layout(), 0.0);
  Taylor cu = Taylor::constant(t.layout(), 1.0);
  Taylor power = Taylor::constant(t.layout(), 1.0);
  for (int m = 1; m <= t.max_order(); ++m) {
    power = power * u * (1.0 / m);  // u^m / m!
    switch (m % 4) {
      case 1: su += power; break;
      case 2: cu -= power; break;
      case 3: su -= power; break;
      default: cu += power; break;
    }
  }
  s = su * std::cos(a0) + cu * std::sin(a0);
  c = cu * std::cos(a0) - su * std::sin(a0);
}

inline Taylor sin(const Taylor& t) {
  Taylor s, c;
  sincos(t, s, c);
  return s;
}

inline Taylor cos(const Taylor& t) {
  Taylor s, c;
  sincos(t, s, c);
  return c;
}

/// Rotates a Taylor series in its argument: returns the series of
/// s(a + V xi) in xi, given the series of s about a.
inline Taylor rotate(const Taylor& t, const Mat& v) {
  Taylor out(t.layout());
  for (int k = 0; k <= t.max_order(); ++k) out.set_block(transform_block(t.block(k), v));
  return out;
}

}  // namespace patchy
