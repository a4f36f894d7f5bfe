#pragma once

#include <Eigen/Dense>

#include <cmath>

namespace penning {

struct SymmetricEigen {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // orthonormal columns
};

namespace detail {

// Flip each column so its largest-magnitude entry (first on ties) is positive.
inline void fix_signs(Eigen::MatrixXd& v) {
  for (Eigen::Index c = 0; c < v.cols(); ++c) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      const double a = std::abs(v(r, c));
      if (a > best * (1.0 + 1e-12)) {
        best = a;
        arg = r;
      }
    }
    if (v(arg, c) < 0.0) v.col(c) *= -1.0;
  }
}

// Replace the basis of a degenerate block by the Gram-Schmidt orthonormalization
// of its projections of e_0, e_1, ... taken in canonical order.
inline void canonical_block(Eigen::MatrixXd& v, Eigen::Index begin, Eigen::Index size) {
  const Eigen::MatrixXd block = v.middleCols(begin, size);
  Eigen::MatrixXd basis(v.rows(), size);
  Eigen::Index found = 0;
  for (Eigen::Index i = 0; i < v.rows() && found < size; ++i) {
    Eigen::VectorXd p = block * block.row(i).transpose();
    for (Eigen::Index k = 0; k < found; ++k) p -= basis.col(k).dot(p) * basis.col(k);
    const double norm = p.norm();
    if (norm > 1e-4) basis.col(found++) = p / norm;
  }
  if (found == size) v.middleCols(begin, size) = basis;
}

}  // namespace detail

/// Dense real symmetric eigendecomposition with deterministic eigenvectors:
/// eigenvalues closer than degeneracy_tol form blocks that get a canonical basis,
/// and every column's largest component is made positive.
inline SymmetricEigen symmetric_eigen(const Eigen::MatrixXd& a, double degeneracy_tol = 1e-10) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
  SymmetricEigen out{solver.eigenvalues(), solver.eigenvectors()};
  const Eigen::Index n = out.values.size();
  Eigen::Index start = 0;
  while (start < n) {
    Eigen::Index end = start + 1;
    while (end < n && std::abs(out.values(end) - out.values(end - 1)) < degeneracy_tol) ++end;
    if (end - start > 1) detail::canonical_block(out.vectors, start, end - start);
    start = end;
  }
  detail::fix_signs(out.vectors);
  return out;
}

}  // namespace penning
