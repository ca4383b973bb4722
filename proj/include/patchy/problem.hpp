#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "patchy/error.hpp"
#include "patchy/riccati.hpp"
#include "patchy/taylor.hpp"

namespace patchy {

/// Taylor data of the control-affine problem  xdot = f(x) + g(x) u,
/// l(x, u) = q(x) + r(x) u^2 / 2  about a point.
struct ProblemJets {
  std::vector<Taylor> f;  // n components
  std::vector<Taylor> g;  // n components
  Taylor q;
  Taylor r;

  Vec f_value() const {
    Vec out(static_cast<Eigen::Index>(f.size()));
    for (std::size_t i = 0; i < f.size(); ++i) out(static_cast<Eigen::Index>(i)) = f[i].value();
    return out;
  }
  Vec g_value() const {
    Vec out(static_cast<Eigen::Index>(g.size()));
    for (std::size_t i = 0; i < g.size(); ++i) out(static_cast<Eigen::Index>(i)) = g[i].value();
    return out;
  }
};

/// Linear-quadratic part at the origin.
struct LinearData {
  Mat F, G, Q, R;
};

/// Optimal-control problem with scalar control. Implementations return exact
/// jets (no numerical differentiation). Library users may subclass this to
/// plug their own dynamics into the solver.
class Problem {
 public:
  virtual ~Problem() = default;
  virtual std::string name() const = 0;
  virtual int dim() const = 0;
  virtual bool in_domain(const Vec&) const { return true; }
  virtual std::string domain_description() const { return "R^n"; }

  /// Jets of f, g, q, r at x through `order`.
  virtual ProblemJets jets(const Vec& x, int order) const = 0;

  /// Jet of the exact optimal cost at x, when a closed form is known.
  virtual std::optional<Taylor> exact_cost(const Vec&, int) const { return std::nullopt; }
};

inline constexpr int kMaxJetOrder = 8;

/// Validated jet query.
inline ProblemJets jet_eval(const Problem& problem, const Vec& x, int order) {
  if (x.size() != problem.dim()) throw Error("jet_eval", "point dimension mismatch");
  if (order < 0 || order > kMaxJetOrder) throw Error("jet_eval", "jet order out of range");
  if (!problem.in_domain(x)) {
    throw Error("jet_eval", "point outside the validity region " + problem.domain_description() + " of " +
                                problem.name());
  }
  ProblemJets j = problem.jets(x, order);
  if (!(j.r.value() > 0.0)) throw Error("jet_eval", "r must be positive");
  if (j.q.value() < -1e-14) throw Error("jet_eval", "q must be nonnegative");
  return j;
}

inline LinearData linearize(const Problem& problem) {
  const int n = problem.dim();
  const ProblemJets j = jet_eval(problem, Vec::Zero(n), 2);
  const double tol = 1e-10;
  if (j.f_value().cwiseAbs().maxCoeff() > tol) throw Error("linearize", "origin is not a rest point: f(0) != 0");
  if (std::abs(j.q.value()) > tol) throw Error("linearize", "running cost q(0) != 0");
  LinearData lin{Mat(n, n), Mat(n, 1), Mat(n, n), Mat(1, 1)};
  for (int i = 0; i < n; ++i) {
    const CoeffBlock fi = j.f[static_cast<std::size_t>(i)].block(1);
    for (int k = 0; k < n; ++k) lin.F(i, k) = fi.at({k});
    lin.G(i, 0) = j.g[static_cast<std::size_t>(i)].value();
  }
  const CoeffBlock dq = j.q.block(1);
  for (double v : dq.values) {
    if (std::abs(v) > tol) throw Error("linearize", "running cost gradient at the origin is nonzero");
  }
  const CoeffBlock hq = j.q.block(2);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) lin.Q(a, b) = hq.at({a, b});
  }
  lin.R(0, 0) = j.r.value();
  return lin;
}

struct CostValue {
  double value;
  Vec gradient;
};

/// Exact optimal cost and gradient at x, for problems that provide one.
inline CostValue exact_cost_oracle(const Problem& problem, const Vec& x) {
  if (!problem.in_domain(x)) throw Error("exact_cost_oracle", "point outside the validity region");
  const auto jet = problem.exact_cost(x, 1);
  if (!jet) throw Error("exact_cost_oracle", problem.name() + " has no exact solution");
  Vec grad(problem.dim());
  const CoeffBlock b = jet->block(1);
  for (int i = 0; i < problem.dim(); ++i) grad(i) = b.values[static_cast<std::size_t>(i)];
  return {jet->value(), grad};
}

/// Residual of  grad . (f + g k) + q + r k^2 / 2  with k = -(grad . g) / r.
inline double hjb_residual(const Problem& problem, const Vec& x, const Vec& grad) {
  const ProblemJets j = jet_eval(problem, x, 0);
  const Vec f = j.f_value();
  const Vec g = j.g_value();
  const double r = j.r.value();
  const double u = -grad.dot(g) / r;
  return grad.dot(f + g * u) + j.q.value() + 0.5 * r * u * u;
}

/// xdot = F x + G u,  l = (x^T Q x + R u^2) / 2.
class LqrProblem : public Problem {
 public:
  LqrProblem(std::string name, Mat f, Mat g, Mat q, double r)
      : name_(std::move(name)), f_(std::move(f)), g_(std::move(g)), q_(std::move(q)), r_(r) {
    if (g_.cols() != 1 || g_.rows() != f_.rows()) throw Error("lqr", "G must be n x 1");
    p_ = solve_are(f_, g_, q_, Mat::Constant(1, 1, r_));
  }

  /// Double integrator with Q = I, R = 1.
  static std::unique_ptr<LqrProblem> double_integrator() {
    Mat f(2, 2);
    f << 0, 1, 0, 0;
    Mat g(2, 1);
    g << 0, 1;
    return std::make_unique<LqrProblem>("lqr2d", f, g, Mat::Identity(2, 2), 1.0);
  }

  std::string name() const override { return name_; }
  int dim() const override { return static_cast<int>(f_.rows()); }
  const Mat& riccati() const { return p_; }

  ProblemJets jets(const Vec& x, int order) const override {
    const int n = dim();
    auto layout = make_layout(n, order);
    std::vector<Taylor> vars;
    for (int i = 0; i < n; ++i) vars.push_back(Taylor::variable(layout, i, x(i)));
    ProblemJets j;
    for (int i = 0; i < n; ++i) {
      Taylor fi = Taylor::constant(layout, 0.0);
      for (int k = 0; k < n; ++k) fi += vars[static_cast<std::size_t>(k)] * f_(i, k);
      j.f.push_back(fi);
      j.g.push_back(Taylor::constant(layout, g_(i, 0)));
    }
    j.q = quadratic(vars, q_, layout);
    j.r = Taylor::constant(layout, r_);
    return j;
  }

  std::optional<Taylor> exact_cost(const Vec& x, int order) const override {
    auto layout = make_layout(dim(), order);
    std::vector<Taylor> vars;
    for (int i = 0; i < dim(); ++i) vars.push_back(Taylor::variable(layout, i, x(i)));
    return quadratic(vars, p_, layout);
  }

 private:
  static Taylor quadratic(const std::vector<Taylor>& v, const Mat& m, const LayoutPtr& layout) {
    Taylor out = Taylor::constant(layout, 0.0);
    for (std::size_t a = 0; a < v.size(); ++a) {
      for (std::size_t b = 0; b < v.size(); ++b) {
        const double w = m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
        if (w != 0.0) out += (v[a] * v[b]) * (0.5 * w);
      }
    }
    return out;
  }

  std::string name_;
  Mat f_, g_, q_;
  double r_;
  Mat p_;
};

/// Nonlinear two-dimensional benchmark that becomes the double-integrator LQR
/// under y = T(x) = (sin x1, x2 - x1^3 / 3):
///   x1' = (x2 - x1^3/3) sec x1
///   x2' = (x1^2 x2 - x1^5/3) sec x1 + u
///   l   = (sin^2 x1 + (x2 - x1^3/3)^2 + u^2) / 2
/// The exact cost is (1/2) T(x)^T P T(x) with P the double-integrator
/// Riccati solution. Jets are valid for |x1| <= limit < pi/2.
class HuntKrenerProblem : public Problem {
 public:
  explicit HuntKrenerProblem(double x1_limit = 1.5) : limit_(x1_limit) {
    if (!(limit_ > 0.0 && limit_ < std::numbers::pi / 2)) throw Error("problem", "x1 limit must lie in (0, pi/2)");
    Mat f(2, 2);
    f << 0, 1, 0, 0;
    Mat g(2, 1);
    g << 0, 1;
    p_ = solve_are(f, g, Mat::Identity(2, 2), Mat::Identity(1, 1));
  }

  std::string name() const override { return "hunt-krener-testproblem"; }
  int dim() const override { return 2; }
  bool in_domain(const Vec& x) const override { return std::abs(x(0)) <= limit_ && std::isfinite(x(1)); }
  std::string domain_description() const override { return "|x1| <= " + std::to_string(limit_); }
  double x1_limit() const { return limit_; }
  const Mat& riccati() const { return p_; }

  ProblemJets jets(const Vec& x, int order) const override {
    auto layout = make_layout(2, order);
    const Taylor x1 = Taylor::variable(layout, 0, x(0));
    const Taylor x2 = Taylor::variable(layout, 1, x(1));
    const Taylor w = x2 - (x1 * x1 * x1) * (1.0 / 3.0);
    Taylor s, c;
    sincos(x1, s, c);
    const Taylor sec = reciprocal(c);
    ProblemJets j;
    const Taylor f1 = w * sec;
    j.f = {f1, (x1 * x1) * f1};
    j.g = {Taylor::constant(layout, 0.0), Taylor::constant(layout, 1.0)};
    j.q = (s * s + w * w) * 0.5;
    j.r = Taylor::constant(layout, 1.0);
    return j;
  }

  std::optional<Taylor> exact_cost(const Vec& x, int order) const override {
    auto layout = make_layout(2, order);
    const Taylor x1 = Taylor::variable(layout, 0, x(0));
    const Taylor x2 = Taylor::variable(layout, 1, x(1));
    const Taylor y1 = sin(x1);
    const Taylor y2 = x2 - (x1 * x1 * x1) * (1.0 / 3.0);
    return (y1 * y1) * (0.5 * p_(0, 0)) + (y1 * y2) * p_(0, 1) + (y2 * y2) * (0.5 * p_(1, 1));
  }

 private:
  double limit_;
  Mat p_;
};

struct ProblemOptions {
  double x1_limit = 1.5;
};

/// Name -> factory map used by the CLI. Custom problems can be added with
/// `add` before lookup.
class ProblemRegistry {
 public:
  using Factory = std::function<std::unique_ptr<Problem>(const ProblemOptions&)>;

  static ProblemRegistry with_builtins() {
    ProblemRegistry reg;
    reg.add("lqr2d", [](const ProblemOptions&) -> std::unique_ptr<Problem> {
      return LqrProblem::double_integrator();
    });
    reg.add("hunt-krener-testproblem", [](const ProblemOptions& o) -> std::unique_ptr<Problem> {
      return std::make_unique<HuntKrenerProblem>(o.x1_limit);
    });
    return reg;
  }

  void add(const std::string& name, Factory factory) { factories_[name] = std::move(factory); }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : factories_) out.push_back(k);
    return out;
  }

  std::unique_ptr<Problem> create(const std::string& name, const ProblemOptions& options = {}) const {
    const auto it = factories_.find(name);
    if (it == factories_.end()) {
      std::string known;
      for (const auto& n : names()) known += (known.empty() ? "" : ", ") + n;
      throw Error("problem", "unknown problem '" + name + "'; builtins: " + known);
    }
    return it->second(options);
  }

 private:
  std::map<std::string, Factory> factories_;
};

}  // namespace patchy
