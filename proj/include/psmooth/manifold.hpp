#pragma once

#include "psmooth/core.hpp"

#include <functional>
#include <vector>

namespace psmooth {

inline constexpr double kOnManifoldTol = 1e-9;
inline constexpr double kResidualTol = 1e-8;

/// Local defining map of a C2 manifold M = { y : phi(y) = 0 } around a point.
struct ManifoldChart {
  Index ambient_dim = 0;
  Index codim = 0;
  std::function<Vector(const Vector&)> phi;
  std::function<Matrix(const Vector&)> jacobian;                   // codim x n
  std::function<std::vector<Matrix>(const Vector&)> hessian_tensor;  // codim n x n forms
  Vector center;                 // chart is valid on the ball around center
  double validity_radius = kInf;
  double on_manifold_tol = kOnManifoldTol;
  bool affine = false;

  bool valid_at(const Vector& x) const;
  bool on_manifold(const Vector& x) const;

  /// Open subset of R^n (codim 0).
  static ManifoldChart whole_space(Index n);
  /// Affine manifold { y : a y = b }; rows of `a` must be independent.
  static ManifoldChart affine_subspace(const Matrix& a, const Vector& b);
};

struct TangentBasis {
  Vector point;
  Matrix basis;  // n x (n - m), orthonormal columns spanning ker jacobian(point)
};

TangentBasis tangent_basis(const ManifoldChart& chart, const Vector& x);

/// Orthonormal basis of N_M(x) = rge jacobian(x)^T.
Matrix normal_basis(const ManifoldChart& chart, const Vector& x);

Vector project_tangent(const ManifoldChart& chart, const Vector& x, const Vector& u);

/// Unique mu with jacobian(x)^T mu = rhs; NotInRange when rhs is not normal.
Vector solve_multiplier(const ManifoldChart& chart, const Vector& x, const Vector& rhs,
                        double residual_tol = kResidualTol);

/// sum_j mu_j hess(phi_j)(x).
Matrix multiplier_hessian(const ManifoldChart& chart, const Vector& x, const Vector& mu);

}  // namespace psmooth
