#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "patchy/coeff.hpp"
#include "patchy/error.hpp"
#include "patchy/problem.hpp"
#include "patchy/riccati.hpp"
#include "patchy/taylor.hpp"

namespace patchy {

/// Highest cost degree with closed-form characteristic formulas.
inline constexpr int kMaxCostDegree = 4;

/// Taylor polynomials of the optimal cost (degree D) and control (degree
/// D-1) at the origin.
struct AlbrekhtSolution {
  CoeffSet cost;
  CoeffSet control;
  Mat riccati;
};

inline Mat solve_are(const LinearData& lin) { return solve_are(lin.F, lin.G, lin.Q, lin.R); }

/// Jets of the two HJB residuals
///   h1 = dpi/dx (f + g kappa) + q + r kappa^2 / 2
///   h2 = dpi/dx g + r kappa
/// for polynomial cost/control given as Taylor series in the same layout as
/// the problem jets.
struct HjbResidualJets {
  Taylor h1;
  Taylor h2;
};

inline HjbResidualJets hjb_residual_jets(const ProblemJets& jets, const Taylor& cost, const Taylor& control) {
  const int n = cost.dim();
  Taylor h1 = jets.q + (jets.r * control * control) * 0.5;
  Taylor h2 = jets.r * control;
  for (int i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const Taylor dpi = cost.derivative(i);
    h1 += dpi * (jets.f[ui] + jets.g[ui] * control);
    h2 += dpi * jets.g[ui];
  }
  return {h1, h2};
}

/// Al'brekht's power-series method: the degree-2 cost / degree-1 control
/// pair comes from the Riccati equation; each further pair (k, k-1) solves
/// a linear system whose operator is p -> dp/dx (F + G K) x on homogeneous
/// degree-k polynomials, with the lower-order terms as data. The degree k-1
/// control term drops out of the degree-k cost equation because the
/// lowest-order control equation already holds.
inline AlbrekhtSolution albrekht_expand(const Problem& problem, int cost_degree) {
  if (cost_degree < 2 || cost_degree > kMaxCostDegree) {
    throw Error("albrekht", "cost degree must be in [2, " + std::to_string(kMaxCostDegree) + "]");
  }
  const int n = problem.dim();
  const LinearData lin = linearize(problem);
  const Mat p = solve_are(lin);
  const double r0 = lin.R(0, 0);
  const Mat gain = -(lin.G.transpose() * p) / r0;  // 1 x n
  const Mat closed = lin.F + lin.G * gain;

  auto layout = make_layout(n, cost_degree);
  const ProblemJets jets = jet_eval(problem, Vec::Zero(n), cost_degree);

  Taylor cost(layout);
  {
    CoeffBlock hess(n, 2);
    for (int a = 0; a < n; ++a) {
      for (int b = a; b < n; ++b) hess.at({a, b}) = p(a, b);
    }
    cost.set_block(hess);
  }
  Taylor control(layout);
  {
    CoeffBlock lin_gain(n, 1);
    for (int a = 0; a < n; ++a) lin_gain.values[static_cast<std::size_t>(a)] = gain(0, a);
    control.set_block(lin_gain);
  }

  // Closed-loop linear vector field as Taylor series.
  std::vector<Taylor> closed_field;
  for (int i = 0; i < n; ++i) {
    Taylor ai(layout);
    for (int k = 0; k < n; ++k) ai += Taylor::variable(layout, k, 0.0) * closed(i, k);
    closed_field.push_back(ai);
  }

  for (int k = 3; k <= cost_degree; ++k) {
    const std::size_t off = layout->offset(k);
    const std::size_t m = layout->offset(k + 1) - off;

    const HjbResidualJets res = hjb_residual_jets(jets, cost, control);
    Vec rhs(static_cast<Eigen::Index>(m));
    for (std::size_t r = 0; r < m; ++r) rhs(static_cast<Eigen::Index>(r)) = -res.h1.coeff_flat(off + r);

    Mat op(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    for (std::size_t col = 0; col < m; ++col) {
      Taylor basis(layout);
      basis.coeff_flat(off + col) = 1.0;
      Taylor image(layout);
      for (int i = 0; i < n; ++i) image += basis.derivative(i) * closed_field[static_cast<std::size_t>(i)];
      for (std::size_t r = 0; r < m; ++r) {
        op(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col)) = image.coeff_flat(off + r);
      }
    }
    Eigen::FullPivLU<Mat> lu(op);
    if (lu.rank() < static_cast<Eigen::Index>(m)) {
      throw Error("albrekht", "singular cascade system at degree " + std::to_string(k));
    }
    const Vec sol = lu.solve(rhs);
    for (std::size_t r = 0; r < m; ++r) cost.coeff_flat(off + r) = sol(static_cast<Eigen::Index>(r));

    // Control term of degree k-1 from the degree k-1 part of h2.
    const HjbResidualJets res2 = hjb_residual_jets(jets, cost, control);
    for (std::size_t r = layout->offset(k - 1); r < layout->offset(k); ++r) {
      control.coeff_flat(r) = -res2.h2.coeff_flat(r) / r0;
    }
  }

  AlbrekhtSolution out;
  out.riccati = p;
  out.cost = cost.to_coeffs(Vec::Zero(n));
  CoeffSet kappa = CoeffSet::zero(n, cost_degree - 1);
  for (int k = 0; k < cost_degree; ++k) kappa[k] = control.block(k);
  out.control = std::move(kappa);
  return out;
}

/// Largest absolute Taylor coefficient of the HJB residuals of (cost,
/// control) at the origin: h1 through the cost degree, h2 through the
/// control degree.
struct AlbrekhtResidual {
  double cost_equation = 0.0;
  double control_equation = 0.0;
};

inline AlbrekhtResidual albrekht_residual(const Problem& problem, const AlbrekhtSolution& sol) {
  const int n = problem.dim();
  const int degree = sol.cost.max_order();
  auto layout = make_layout(n, degree);
  const ProblemJets jets = jet_eval(problem, Vec::Zero(n), degree);
  const Taylor cost = Taylor::from_coeffs(layout, sol.cost);
  const Taylor control = Taylor::from_coeffs(layout, sol.control);
  const HjbResidualJets res = hjb_residual_jets(jets, cost, control);
  AlbrekhtResidual out;
  for (std::size_t i = 0; i < layout->size(); ++i) {
    out.cost_equation = std::max(out.cost_equation, std::abs(res.h1.coeff_flat(i)));
    if (i < layout->offset(degree)) out.control_equation = std::max(out.control_equation, std::abs(res.h2.coeff_flat(i)));
  }
  return out;
}

/// Largest level c whose sublevel set {pi <= c} around the origin stays
/// inside the circle of the given radius (planar problems): the minimum of
/// pi over that circle.
inline double level_within_radius(const CoeffSet& cost, double radius) {
  if (cost.dim() != 2) throw Error("albrekht", "level_within_radius is defined for planar problems");
  if (!(radius > 0.0)) throw Error("albrekht", "radius must be positive");
  auto at = [&](double theta) {
    Vec x(2);
    x << radius * std::cos(theta), radius * std::sin(theta);
    return poly_eval(cost, x);
  };
  constexpr int samples = 720;
  const double step = 2.0 * std::numbers::pi / samples;
  int best = 0;
  double best_v = at(0.0);
  for (int i = 1; i < samples; ++i) {
    const double v = at(i * step);
    if (v < best_v) {
      best_v = v;
      best = i;
    }
  }
  // Golden-section refinement around the best sample.
  double lo = (best - 1) * step, hi = (best + 1) * step;
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - gr * (hi - lo), d = lo + gr * (hi - lo);
  for (int it = 0; it < 80; ++it) {
    if (at(c) < at(d)) {
      hi = d;
    } else {
      lo = c;
    }
    c = hi - gr * (hi - lo);
    d = lo + gr * (hi - lo);
  }
  return std::min(best_v, at(0.5 * (lo + hi)));
}

}  // namespace patchy
