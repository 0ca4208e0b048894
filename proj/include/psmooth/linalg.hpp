#pragma once

#include "psmooth/core.hpp"

#include <Eigen/SVD>

#include <algorithm>

namespace psmooth {

/// Relative singular-value threshold for numerical rank decisions.
inline constexpr double kRankTol = 1e-8;

namespace detail {
// Absolute floor so that an all-zero matrix is reported as rank 0.
inline constexpr double kRankAbsFloor = 1e-300;
}  // namespace detail

template <typename Derived>
Index numerical_rank(const Eigen::MatrixBase<Derived>& a,
                     double rel_tol = kRankTol) {
  if (a.rows() == 0 || a.cols() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(a.eval());
  const auto& s = svd.singularValues();
  const double cut = std::max(rel_tol * s(0), detail::kRankAbsFloor);
  Index r = 0;
  for (Index i = 0; i < s.size(); ++i)
    if (s(i) > cut && s(0) > 0.0) ++r;
  return r;
}

/// Orthonormal basis (as columns) of the column space of `a`.
template <typename Derived>
Matrix range_basis(const Eigen::MatrixBase<Derived>& a,
                   double rel_tol = kRankTol) {
  const Index n = a.rows();
  if (a.cols() == 0 || n == 0) return Matrix(n, 0);
  Eigen::JacobiSVD<Matrix> svd(a.eval(), Eigen::ComputeFullU);
  const auto& s = svd.singularValues();
  const double cut = std::max(rel_tol * s(0), detail::kRankAbsFloor);
  Index r = 0;
  for (Index i = 0; i < s.size(); ++i)
    if (s(i) > cut && s(0) > 0.0) ++r;
  return svd.matrixU().leftCols(r);
}

/// Orthonormal basis (as columns) of ker `a`.
template <typename Derived>
Matrix null_space(const Eigen::MatrixBase<Derived>& a,
                  double rel_tol = kRankTol) {
  const Index n = a.cols();
  if (a.rows() == 0) return Matrix::Identity(n, n);
  Eigen::JacobiSVD<Matrix> svd(a.eval(), Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double cut = std::max(rel_tol * (s.size() ? s(0) : 0.0),
                              detail::kRankAbsFloor);
  Index r = 0;
  for (Index i = 0; i < s.size(); ++i)
    if (s(i) > cut) ++r;
  return svd.matrixV().rightCols(n - r);
}

/// Orthogonal projector onto the span of the orthonormal columns of `basis`.
template <typename Derived>
Matrix projector(const Eigen::MatrixBase<Derived>& basis, Index n) {
  if (basis.cols() == 0) return Matrix::Zero(n, n);
  return basis * basis.transpose();
}

/// Largest component of `u` outside span(basis); basis columns orthonormal.
template <typename DerivedU, typename DerivedB>
double containment_defect(const Eigen::MatrixBase<DerivedU>& u,
                          const Eigen::MatrixBase<DerivedB>& basis) {
  if (u.cols() == 0) return 0.0;
  Matrix residual = u;
  if (basis.cols() > 0) residual -= basis * (basis.transpose() * u);
  double worst = 0.0;
  for (Index j = 0; j < residual.cols(); ++j) {
    const double scale = std::max(1.0, u.col(j).norm());
    worst = std::max(worst, residual.col(j).norm() / scale);
  }
  return worst;
}

/// Subspace equality by mutual containment of orthonormal bases.
template <typename DerivedA, typename DerivedB>
bool same_subspace(const Eigen::MatrixBase<DerivedA>& a,
                   const Eigen::MatrixBase<DerivedB>& b, double tol = 1e-8) {
  if (a.cols() != b.cols()) return false;
  return containment_defect(a, b) <= tol && containment_defect(b, a) <= tol;
}

/// Infinity norm; 0 for empty inputs.
template <typename Derived>
double inf_norm(const Eigen::MatrixBase<Derived>& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

/// Symmetric part, used wherever a Hessian is assembled from pieces.
template <typename Derived>
Matrix symmetrized(const Eigen::MatrixBase<Derived>& a) {
  return 0.5 * (a + a.transpose());
}

}  // namespace psmooth
