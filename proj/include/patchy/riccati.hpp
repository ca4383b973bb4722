#pragma once

#include <cmath>
#include <complex>
#include <string>

#include <Eigen/Dense>

#include "patchy/error.hpp"
#include "patchy/ortho.hpp"

namespace patchy {

namespace detail {

/// Solves A^T X + X A = C for X via the Kronecker-vectorized system.
/// Only meant for the small state dimensions used here.
inline Mat solve_lyapunov(const Mat& a, const Mat& c) {
  const Eigen::Index n = a.rows();
  const Mat id = Mat::Identity(n, n);
  Mat k = Mat::Zero(n * n, n * n);
  // vec(A^T X) = (I kron A^T) vec X,  vec(X A) = (A^T kron I) vec X
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      k.block(i * n, j * n, n, n) += id(i, j) * a.transpose();
      k.block(i * n, j * n, n, n) += a(j, i) * id;
    }
  }
  const Vec rhs = Eigen::Map<const Vec>(c.data(), n * n);
  const Vec x = k.fullPivLu().solve(rhs);
  return Eigen::Map<const Mat>(x.data(), n, n);
}

inline Mat care_residual(const Mat& f, const Mat& s, const Mat& q, const Mat& p) {
  return f.transpose() * p + p * f - p * s * p + q;
}

}  // namespace detail

/// Stabilizing solution of F^T P + P F - P G R^-1 G^T P + Q = 0.
///
/// Stable invariant subspace of the Hamiltonian [[F, -S], [-Q, -F^T]]
/// (S = G R^-1 G^T) from its eigenvectors, followed by Newton-Kleinman
/// refinement. Throws when no stabilizing solution exists.
inline Mat solve_are(const Mat& f, const Mat& g, const Mat& q, const Mat& r) {
  const Eigen::Index n = f.rows();
  if (f.cols() != n || g.rows() != n || q.rows() != n || q.cols() != n || r.rows() != g.cols() ||
      r.cols() != g.cols()) {
    throw Error("solve_are", "inconsistent matrix dimensions");
  }
  if ((q - q.transpose()).cwiseAbs().maxCoeff() > 1e-10 || (r - r.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
    throw Error("solve_are", "Q and R must be symmetric");
  }
  Eigen::LLT<Mat> r_chol(r);
  if (r_chol.info() != Eigen::Success) throw Error("solve_are", "R must be positive definite");
  const Mat s = g * r_chol.solve(g.transpose());

  Mat h(2 * n, 2 * n);
  h << f, -s, -q, -f.transpose();
  const double scale = 1.0 + h.cwiseAbs().maxCoeff();

  Eigen::EigenSolver<Mat> es(h);
  if (es.info() != Eigen::Success) throw Error("solve_are", "Hamiltonian eigen-decomposition failed");
  const auto& lambda = es.eigenvalues();
  const auto& vecs = es.eigenvectors();

  Eigen::MatrixXcd u(n, n), w(n, n);
  Eigen::Index count = 0;
  for (Eigen::Index i = 0; i < 2 * n; ++i) {
    if (lambda(i).real() < -1e-9 * scale) {
      if (count == n) break;
      u.col(count) = vecs.col(i).head(n);
      w.col(count) = vecs.col(i).tail(n);
      ++count;
    }
  }
  if (count != n) {
    throw Error("solve_are",
                "Hamiltonian has eigenvalues on the imaginary axis; (F,G) is not stabilizable "
                "or (Q,F) is not detectable");
  }
  Eigen::FullPivLU<Eigen::MatrixXcd> u_lu(u);
  if (u_lu.rank() < n || std::abs(u_lu.determinant()) < 1e-12 * std::pow(u.norm(), static_cast<double>(n))) {
    throw Error("solve_are", "stable subspace is not a graph; (F,G) is not stabilizable");
  }
  Mat p = (w * u_lu.inverse()).real();
  p = 0.5 * (p + p.transpose());

  for (int iter = 0; iter < 30; ++iter) {
    const Mat res = detail::care_residual(f, s, q, p);
    if (res.cwiseAbs().maxCoeff() < 1e-15 * scale * (1.0 + p.cwiseAbs().maxCoeff())) break;
    const Mat a = f - s * p;
    Mat dp = detail::solve_lyapunov(a, -res);
    p += 0.5 * (dp + dp.transpose());
  }

  const Mat res = detail::care_residual(f, s, q, p);
  if (!(res.cwiseAbs().maxCoeff() < 1e-10)) {
    throw Error("solve_are", "Riccati iteration did not converge (residual " +
                                 std::to_string(res.cwiseAbs().maxCoeff()) + ")");
  }
  const Eigen::VectorXcd cl = (f - s * p).eigenvalues();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(cl(i).real() < 0.0)) throw Error("solve_are", "closed loop F - G R^-1 G^T P is not Hurwitz");
  }
  Eigen::LLT<Mat> p_chol(p);
  if (p_chol.info() != Eigen::Success) throw Error("solve_are", "solution P is not positive definite");
  return p;
}

}  // namespace patchy
