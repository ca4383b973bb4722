#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "patchy/error.hpp"

namespace patchy {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Orthogonal matrix whose first column is the normalized optimal direction.
/// The remaining columns complete an orthonormal basis of R^n.
struct OrthoBasis {
  Mat columns;

  int dim() const { return static_cast<int>(columns.rows()); }
  Vec first() const { return columns.col(0); }
};

/// Householder completion of v / |v|. The reflector sign is chosen to avoid
/// cancellation in w = u + sign(u_1) e_1; the first column is then flipped so
/// it equals u exactly up to rounding.
inline OrthoBasis householder_basis(const Vec& v) {
  const double norm = v.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw Error("householder_basis", "direction vector must be nonzero and finite");
  }
  const Eigen::Index n = v.size();
  const Vec u = v / norm;
  const double s = u(0) >= 0.0 ? 1.0 : -1.0;
  Vec w = u;
  w(0) += s;
  // H = I - 2 w w^T / (w^T w);  H u = -s e_1, so H e_1 = -s u.
  Mat h = Mat::Identity(n, n) - (2.0 / w.squaredNorm()) * (w * w.transpose());
  h.col(0) = u;  // equals -s * H e_1 up to rounding
  return OrthoBasis{std::move(h)};
}

}  // namespace patchy
