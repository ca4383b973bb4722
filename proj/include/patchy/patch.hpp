#pragma once

#include <cmath>
#include <functional>
#include <initializer_list>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "patchy/albrekht.hpp"
#include "patchy/coeff.hpp"
#include "patchy/error.hpp"
#include "patchy/ortho.hpp"
#include "patchy/problem.hpp"
#include "patchy/taylor.hpp"

namespace patchy {

// ---------------------------------------------------------------------------
// First-order data: the scalar HJB equation along the inherited normal.
// ---------------------------------------------------------------------------

/// Inputs of  -g_n^2 z^2 / (2r) + f_n z + q = 0.  The scales |f|, |g| set the
/// threshold below which g_n (or f_n) counts as zero.
struct ZInputs {
  double f_n = 0.0;
  double g_n = 0.0;
  double q = 0.0;
  double r = 1.0;
  double f_scale = 0.0;
  double g_scale = 0.0;
};

inline double scalar_hjb_residual(const ZInputs& in, double z) {
  return -in.g_n * in.g_n * z * z / (2.0 * in.r) + in.f_n * z + in.q;
}

/// The unique strictly positive root z_+.
inline double solve_scalar_hjb(const ZInputs& in) {
  if (!(in.r > 0.0)) throw Error("scalar_hjb", "r must be positive");
  if (in.q < 0.0) throw Error("scalar_hjb", "q must be nonnegative");
  const double g_tol = 1e-12 * (1.0 + in.g_scale);
  const double f_tol = 1e-12 * (1.0 + in.f_scale);
  if (std::abs(in.g_n) <= g_tol) {
    if (std::abs(in.f_n) <= f_tol) throw Error("scalar_hjb", "f_n and g_n are both degenerate");
    if (!(in.f_n < -f_tol)) {
      throw Error("scalar_hjb", "no strictly positive root: g_n = 0 and f_n >= 0 (Lyapunov consistency violated)");
    }
    const double z = -in.q / in.f_n;
    if (!(z > 0.0)) throw Error("scalar_hjb", "no strictly positive root (q = 0)");
    return z;
  }
  const double disc = std::sqrt(in.f_n * in.f_n + 2.0 * (in.q / in.r) * in.g_n * in.g_n);
  // Both forms are algebraically equal; pick the one without cancellation.
  const double z = in.f_n >= 0.0 ? (in.f_n + disc) * in.r / (in.g_n * in.g_n) : 2.0 * in.q / (disc - in.f_n);
  if (!(z > 0.0) || !std::isfinite(z)) {
    throw Error("scalar_hjb", "no strictly positive root (Lyapunov consistency violated)");
  }
  return z;
}

struct FirstOrder {
  double value = 0.0;
  Vec gradient;   // z_+ n
  double control = 0.0;
  Vec direction;  // f + g * control
  double z = 0.0;
};

/// Value by inheritance, gradient z_+ n along the source gradient direction,
/// control and closed-loop direction at the new patch point.
inline FirstOrder new_first_order(const CoeffSet& source, const Vec& x, const Problem& problem) {
  const CoeffBlock src_grad = poly_partials(source, x, 1);
  const Vec grad = Eigen::Map<const Vec>(src_grad.values.data(), static_cast<Eigen::Index>(src_grad.size()));
  const double norm = grad.norm();
  if (!(norm > 0.0)) throw Error("first_order", "source cost gradient vanishes at the new patch point");
  const Vec normal = grad / norm;

  const ProblemJets j = jet_eval(problem, x, 0);
  const Vec f = j.f_value();
  const Vec g = j.g_value();
  ZInputs in{normal.dot(f), normal.dot(g), j.q.value(), j.r.value(), f.norm(), g.norm()};

  FirstOrder out;
  out.value = poly_eval(source, x);
  out.z = solve_scalar_hjb(in);
  out.gradient = out.z * normal;
  out.control = -out.gradient.dot(g) / in.r;
  out.direction = f + g * out.control;
  if (!(out.direction.norm() > 0.0)) throw Error("first_order", "optimal direction vanishes");
  return out;
}

// ---------------------------------------------------------------------------
// Higher-order data in the rotated frame x = x_new + V xi.
// ---------------------------------------------------------------------------

/// Everything the characteristic and control formulas read, expressed in xi
/// coordinates at xi = 0. Coordinate 0 is the optimal direction.
struct FrameData {
  OrthoBasis basis;
  double speed = 0.0;          // |xdot|
  std::vector<CoeffSet> f;     // components of V^T f(x + V xi)
  std::vector<CoeffSet> g;     // components of V^T g(x + V xi)
  CoeffSet q;
  CoeffSet r;
  std::vector<CoeffBlock> cost;     // cost partials, orders 0..
  std::vector<CoeffBlock> control;  // control partials, orders 0..
};

/// Jets of f, g, q, r pushed through the change of variables.
inline void rotate_problem_jets(const ProblemJets& jets, FrameData& frame) {
  const Mat& v = frame.basis.columns;
  const int n = frame.basis.dim();
  const Vec origin = Vec::Zero(n);
  auto rotate_field = [&](const std::vector<Taylor>& field) {
    std::vector<CoeffSet> out;
    for (int a = 0; a < n; ++a) {
      Taylor comp(field.front().layout());
      for (int i = 0; i < n; ++i) comp += field[static_cast<std::size_t>(i)] * v(i, a);
      out.push_back(rotate(comp, v).to_coeffs(origin));
    }
    return out;
  };
  frame.f = rotate_field(jets.f);
  frame.g = rotate_field(jets.g);
  frame.q = rotate(jets.q, v).to_coeffs(origin);
  frame.r = rotate(jets.r, v).to_coeffs(origin);
}

namespace detail {

/// Index tuple (sorted coordinates) of a multi-index.
inline std::vector<int> to_tuple(const MultiIndex& alpha) {
  std::vector<int> t;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    for (int c = 0; c < alpha[i]; ++c) t.push_back(static_cast<int>(i));
  }
  return t;
}

inline void require_orders(const std::vector<CoeffBlock>& blocks, int needed, const char* what) {
  if (static_cast<int>(blocks.size()) <= needed) {
    throw Error("characteristic", std::string("missing lower-order ") + what + " partials");
  }
}

/// Accessors for frame quantities by index tuple.
struct FrameView {
  const FrameData& fr;

  double pi(std::initializer_list<int> t) const { return fr.cost[t.size()].at(t); }
  double kap(std::initializer_list<int> t) const { return fr.control[t.size()].at(t); }
  double q(std::initializer_list<int> t) const { return fr.q[static_cast<int>(t.size())].at(t); }
  double r(std::initializer_list<int> t) const { return fr.r[static_cast<int>(t.size())].at(t); }
  double g(int i, std::initializer_list<int> t) const {
    return fr.g[static_cast<std::size_t>(i)][static_cast<int>(t.size())].at(t);
  }
  /// d^T (f_i + g_i kappa(0)): closed-loop field with the control frozen.
  double b(int i, std::initializer_list<int> t) const {
    return fr.f[static_cast<std::size_t>(i)][static_cast<int>(t.size())].at(t) + g(i, t) * kap({});
  }
};

}  // namespace detail

/// Characteristic partials of order k in {2, 3, 4}: every d^k pi / d xi^gamma
/// with gamma_1 >= 1, obtained from the (k-1)-th derivative of the cost HJB
/// equation along the remaining indices (j, l, m):
///
///  k=2: |xdot| pi_1j = -[ pi_i b_i,j + q_j + r_j k^2/2 ]
///  k=3: |xdot| pi_1jl = -[ pi_ij b_i,l + pi_il b_i,j + pi_i b_i,jl
///                          + q_jl + r_jl k^2/2 - r k_j k_l ]
///  k=4: |xdot| pi_1jlm = -[ pi_ijl b_i,m + pi_ijm b_i,l + pi_ilm b_i,j
///                          + pi_ij b_i,lm + pi_il b_i,jm + pi_im b_i,jl
///                          + pi_i b_i,jlm + q_jlm + r_jlm k^2/2
///                          - r_j k_l k_m - r_l k_j k_m - r_m k_j k_l
///                          - r (k_j k_lm + k_l k_jm + k_m k_jl) ]
///
/// with b_i = f_i + g_i k(0) and summation over i. Entries with gamma_1 = 0
/// are returned as zero.
inline CoeffBlock characteristic_cost_partials(int k, const FrameData& frame) {
  if (k < 2 || k > kMaxCostDegree) throw Error("characteristic", "cost order must be in [2, 4]");
  if (!(frame.speed > 0.0)) throw Error("characteristic", "optimal direction has zero norm");
  detail::require_orders(frame.cost, k - 1, "cost");
  detail::require_orders(frame.control, k - 2, "control");
  const int n = frame.basis.dim();
  const detail::FrameView v{frame};
  const double kap = v.kap({});
  const double rr = v.r({});

  CoeffBlock out(n, k);
  const auto indices = enumerate_indices(n, k);
  for (std::size_t idx = 0; idx < indices.size(); ++idx) {
    if (indices[idx][0] == 0) continue;
    MultiIndex rest = indices[idx];
    --rest[0];
    const auto t = detail::to_tuple(rest);
    double s = 0.0;
    if (k == 2) {
      const int j = t[0];
      for (int i = 0; i < n; ++i) s += v.pi({i}) * v.b(i, {j});
      s += v.q({j}) + 0.5 * v.r({j}) * kap * kap;
    } else if (k == 3) {
      const int j = t[0], l = t[1];
      for (int i = 0; i < n; ++i) {
        s += v.pi({i, j}) * v.b(i, {l}) + v.pi({i, l}) * v.b(i, {j}) + v.pi({i}) * v.b(i, {j, l});
      }
      s += v.q({j, l}) + 0.5 * v.r({j, l}) * kap * kap - rr * v.kap({j}) * v.kap({l});
    } else {
      const int j = t[0], l = t[1], m = t[2];
      for (int i = 0; i < n; ++i) {
        s += v.pi({i, j, l}) * v.b(i, {m}) + v.pi({i, j, m}) * v.b(i, {l}) + v.pi({i, l, m}) * v.b(i, {j});
        s += v.pi({i, j}) * v.b(i, {l, m}) + v.pi({i, l}) * v.b(i, {j, m}) + v.pi({i, m}) * v.b(i, {j, l});
        s += v.pi({i}) * v.b(i, {j, l, m});
      }
      const double kj = v.kap({j}), kl = v.kap({l}), km = v.kap({m});
      s += v.q({j, l, m}) + 0.5 * v.r({j, l, m}) * kap * kap;
      s -= v.r({j}) * kl * km + v.r({l}) * kj * km + v.r({m}) * kj * kl;
      s -= rr * (kj * v.kap({l, m}) + kl * v.kap({j, m}) + km * v.kap({j, l}));
    }
    out.values[idx] = -s / frame.speed;
  }
  return out;
}

/// Control partials of order k in {0, 1, 2, 3} from the k-th derivative of
///   dpi/dxi g + r kappa = 0,
/// i.e. r kappa_T = -[ sum over splits T = A + B of pi_{iA} g_{i,B}
///                     + sum over splits with B nonempty of r_B kappa_A ].
/// Needs cost partials through order k+1 and control through k-1.
inline CoeffBlock control_partials(int k, const FrameData& frame) {
  if (k < 0 || k > kMaxCostDegree - 1) throw Error("control_partials", "control order must be in [0, 3]");
  detail::require_orders(frame.cost, k + 1, "cost");
  if (k > 0) detail::require_orders(frame.control, k - 1, "control");
  const int n = frame.basis.dim();
  const detail::FrameView v{frame};
  const double rr = v.r({});
  if (!(rr > 0.0)) throw Error("control_partials", "r must be positive");

  CoeffBlock out(n, k);
  const auto indices = enumerate_indices(n, k);
  for (std::size_t idx = 0; idx < indices.size(); ++idx) {
    const auto t = detail::to_tuple(indices[idx]);
    double s = 0.0;
    if (k == 0) {
      for (int i = 0; i < n; ++i) s += v.pi({i}) * v.g(i, {});
    } else if (k == 1) {
      const int j = t[0];
      for (int i = 0; i < n; ++i) s += v.pi({i, j}) * v.g(i, {}) + v.pi({i}) * v.g(i, {j});
      s += v.r({j}) * v.kap({});
    } else if (k == 2) {
      const int j = t[0], l = t[1];
      for (int i = 0; i < n; ++i) {
        s += v.pi({i, j, l}) * v.g(i, {}) + v.pi({i, j}) * v.g(i, {l}) + v.pi({i, l}) * v.g(i, {j}) +
             v.pi({i}) * v.g(i, {j, l});
      }
      s += v.r({j, l}) * v.kap({}) + v.r({j}) * v.kap({l}) + v.r({l}) * v.kap({j});
    } else {
      const int j = t[0], l = t[1], m = t[2];
      for (int i = 0; i < n; ++i) {
        s += v.pi({i, j, l, m}) * v.g(i, {});
        s += v.pi({i, j, l}) * v.g(i, {m}) + v.pi({i, j, m}) * v.g(i, {l}) + v.pi({i, l, m}) * v.g(i, {j});
        s += v.pi({i, j}) * v.g(i, {l, m}) + v.pi({i, l}) * v.g(i, {j, m}) + v.pi({i, m}) * v.g(i, {j, l});
        s += v.pi({i}) * v.g(i, {j, l, m});
      }
      s += v.r({j, l, m}) * v.kap({});
      s += v.r({j, l}) * v.kap({m}) + v.r({j, m}) * v.kap({l}) + v.r({l, m}) * v.kap({j});
      s += v.r({j}) * v.kap({l, m}) + v.r({l}) * v.kap({j, m}) + v.r({m}) * v.kap({j, l});
    }
    out.values[idx] = -s / rr;
  }
  return out;
}

/// Order-k partials of pi_source(x + V xi) at xi = 0 whose index tuples
/// avoid the optimal direction (gamma_1 = 0); other entries are zero.
inline CoeffBlock inherit_noncharacteristic(const CoeffSet& source, const OrthoBasis& basis, const Vec& x, int k) {
  if (source.max_order() < k) throw Error("inherit", "source polynomial degree is below the requested order");
  if (basis.dim() != source.dim()) throw Error("inherit", "dimension mismatch");
  CoeffBlock out = transform_block(poly_partials(source, x, k), basis.columns);
  const auto indices = enumerate_indices(source.dim(), k);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i][0] > 0) out.values[i] = 0.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

struct PatchSolution {
  Vec point;
  CoeffSet cost;     // orders 0..d+1, centered at point
  CoeffSet control;  // orders 0..d, centered at point
  Vec direction;     // computed optimal direction at point
  int parent = -1;
};

/// Completes the normalized optimal direction into an orthonormal basis.
using BasisFactory = std::function<OrthoBasis(const Vec&)>;

struct PatchOptions {
  double max_distance = std::numeric_limits<double>::infinity();
  BasisFactory basis;             // default: householder_basis
  std::optional<int> patch_id;    // for diagnostics
  int parent = -1;
};

namespace detail {

inline std::string point_string(const Vec& x) {
  std::ostringstream os;
  os << '(';
  for (Eigen::Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x(i);
  os << ')';
  return os.str();
}

}  // namespace detail

/// Rotated-frame data at a new patch point with cost partials through order
/// d+1 and control partials through order d, before recovery.
struct PatchFrame {
  FirstOrder first;
  FrameData frame;
};

/// Stages of the patch map up to (not including) recovery. Stage names in
/// thrown errors identify the failing step.
inline PatchFrame build_patch_frame(const CoeffSet& source, const Vec& x, const Problem& problem, int d,
                                    const PatchOptions& options = {}) {
  const int n = problem.dim();
  std::string stage = "assemble";
  try {
    if (d < 1 || d + 1 > kMaxCostDegree) throw Error(stage, "control degree d must satisfy 1 <= d <= 3");
    if (source.dim() != n || x.size() != n) throw Error(stage, "dimension mismatch");
    if (source.max_order() < d + 1) throw Error(stage, "source polynomial degree is below d+1");
    if ((x - source.center).norm() > options.max_distance) {
      throw Error(stage, "new patch point is farther than the maximum consecutive patch point distance");
    }

    stage = "first_order";
    PatchFrame out;
    out.first = new_first_order(source, x, problem);
    const FirstOrder& first = out.first;
    if (!(first.gradient.dot(first.direction) < 0.0)) {
      throw Error(stage, "computed optimal direction is not a strict descent direction");
    }

    stage = "basis";
    FrameData& frame = out.frame;
    frame.basis = options.basis ? options.basis(first.direction) : householder_basis(first.direction);
    if ((frame.basis.first() - first.direction.normalized()).norm() > 1e-12) {
      throw Error(stage, "basis first column must be the normalized optimal direction");
    }
    frame.speed = first.direction.norm();
    const Mat& v = frame.basis.columns;

    stage = "jets";
    rotate_problem_jets(jet_eval(problem, x, d), frame);

    frame.cost.emplace_back(n, 0);
    frame.cost[0].values[0] = first.value;
    frame.cost.emplace_back(n, 1);
    const Vec grad_hat = v.transpose() * first.gradient;
    for (int i = 0; i < n; ++i) frame.cost[1].values[static_cast<std::size_t>(i)] = grad_hat(i);
    frame.control.emplace_back(n, 0);
    frame.control[0].values[0] = first.control;

    for (int k = 2; k <= d + 1; ++k) {
      stage = "inherit";
      CoeffBlock block = inherit_noncharacteristic(source, frame.basis, x, k);
      stage = "characteristic";
      const CoeffBlock ch = characteristic_cost_partials(k, frame);
      for (std::size_t i = 0; i < block.size(); ++i) block.values[i] += ch.values[i];
      frame.cost.push_back(std::move(block));
      stage = "control";
      frame.control.push_back(control_partials(k - 1, frame));
    }
    return out;
  } catch (const Error& e) {
    throw Error(e.stage(), e.message() + " at x=" + detail::point_string(x), options.patch_id ? options.patch_id : e.patch());
  }
}

/// One step of the patch map: cost polynomial of degree d+1 and control of
/// degree d at `x`, computed from the source cost polynomial (whose center
/// is the source patch point).
inline PatchSolution assemble_patch(const CoeffSet& source, const Vec& x, const Problem& problem, int d,
                                    const PatchOptions& options = {}) {
  const int n = problem.dim();
  const PatchFrame pf = build_patch_frame(source, x, problem, d, options);
  const FrameData& frame = pf.frame;
  PatchSolution out;
  out.point = x;
  out.direction = pf.first.direction;
  out.parent = options.parent;
  out.cost = CoeffSet(n, d + 1, x);
  out.control = CoeffSet(n, d, x);
  const auto cost_x = recover_partials(frame.cost, frame.basis);
  const auto control_x = recover_partials(frame.control, frame.basis);
  for (int k = 0; k <= d + 1; ++k) out.cost[k] = cost_x[static_cast<std::size_t>(k)];
  for (int k = 0; k <= d; ++k) out.control[k] = control_x[static_cast<std::size_t>(k)];
  for (const auto& b : out.cost.blocks) {
    for (double val : b.values) {
      if (!std::isfinite(val)) {
        throw Error("recover", "non-finite cost coefficient at x=" + detail::point_string(x), options.patch_id);
      }
    }
  }
  return out;
}

}  // namespace patchy
