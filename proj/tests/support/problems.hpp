#pragma once

// Extra problems used only by the tests.

#include <string>

#include "patchy/problem.hpp"

namespace patchy::testing {

/// Planar problem with state-dependent g and r:
/// f = (x2, -x1 + x1^2 x2), g = (0, 1 + x1^2/2),
/// q = (x1^2 + x2^2)/2 + x1^4/4, r = 1 + x2^2.
class VaryingProblem : public Problem {
 public:
  std::string name() const override { return "varying"; }
  int dim() const override { return 2; }
  ProblemJets jets(const Vec& x, int order) const override {
    auto layout = make_layout(2, order);
    const Taylor x1 = Taylor::variable(layout, 0, x(0));
    const Taylor x2 = Taylor::variable(layout, 1, x(1));
    ProblemJets j;
    j.f = {x2, x1 * x1 * x2 - x1};
    j.g = {Taylor::constant(layout, 0.0), Taylor::constant(layout, 1.0) + (x1 * x1) * 0.5};
    j.q = (x1 * x1 + x2 * x2) * 0.5 + (x1 * x1 * x1 * x1) * 0.25;
    j.r = Taylor::constant(layout, 1.0) + x2 * x2;
    return j;
  }
};

/// Three-dimensional nonlinear chain:
/// f = (x2, x3 + x1 x2 / 2, -x1 + sin(x2) x3), g = (x1 x3 / 4, 0, 1 + x1^2/2),
/// q = |x|^2/2 + x2^4/4, r = 1 + x1^2.
class ChainProblem : public Problem {
 public:
  std::string name() const override { return "chain3d"; }
  int dim() const override { return 3; }
  ProblemJets jets(const Vec& x, int order) const override {
    auto layout = make_layout(3, order);
    const Taylor x1 = Taylor::variable(layout, 0, x(0));
    const Taylor x2 = Taylor::variable(layout, 1, x(1));
    const Taylor x3 = Taylor::variable(layout, 2, x(2));
    ProblemJets j;
    j.f = {x2, x3 + (x1 * x2) * 0.5, sin(x2) * x3 - x1};
    j.g = {(x1 * x3) * 0.25, Taylor::constant(layout, 0.0), Taylor::constant(layout, 1.0) + (x1 * x1) * 0.5};
    j.q = (x1 * x1 + x2 * x2 + x3 * x3) * 0.5 + (x2 * x2 * x2 * x2) * 0.25;
    j.r = Taylor::constant(layout, 1.0) + x1 * x1;
    return j;
  }
};

}  // namespace patchy::testing
