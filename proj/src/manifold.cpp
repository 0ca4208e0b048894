#include "psmooth/manifold.hpp"

#include "psmooth/linalg.hpp"

#include <Eigen/QR>

namespace psmooth {

bool ManifoldChart::valid_at(const Vector& x) const {
  if (x.size() != ambient_dim) return false;
  if (center.size() == 0 || validity_radius == kInf) return true;
  return (x - center).norm() <= validity_radius;
}

bool ManifoldChart::on_manifold(const Vector& x) const {
  if (codim == 0) return true;
  return phi(x).norm() <= on_manifold_tol;
}

ManifoldChart ManifoldChart::whole_space(Index n) {
  ManifoldChart c;
  c.ambient_dim = n;
  c.codim = 0;
  c.phi = [](const Vector&) { return Vector(0); };
  c.jacobian = [n](const Vector&) { return Matrix(0, n); };
  c.hessian_tensor = [](const Vector&) { return std::vector<Matrix>{}; };
  c.affine = true;
  return c;
}

ManifoldChart ManifoldChart::affine_subspace(const Matrix& a, const Vector& b) {
  require(a.rows() == b.size(), ErrorKind::DimensionMismatch, "affine chart");
  ManifoldChart c;
  c.ambient_dim = a.cols();
  c.codim = a.rows();
  c.phi = [a, b](const Vector& y) -> Vector { return a * y - b; };
  c.jacobian = [a](const Vector&) { return a; };
  const Index m = a.rows();
  const Index n = a.cols();
  c.hessian_tensor = [m, n](const Vector&) {
    return std::vector<Matrix>(static_cast<std::size_t>(m), Matrix::Zero(n, n));
  };
  c.affine = true;
  return c;
}

namespace {

Matrix checked_jacobian(const ManifoldChart& chart, const Vector& x) {
  require(x.size() == chart.ambient_dim, ErrorKind::DimensionMismatch, "chart point size");
  const Matrix j = chart.jacobian(x);
  require(j.rows() == chart.codim && j.cols() == chart.ambient_dim,
          ErrorKind::DimensionMismatch, "jacobian shape");
  require(numerical_rank(j) == chart.codim, ErrorKind::RankDeficient,
          "defining map is not submersive at the query point");
  return j;
}

}  // namespace

TangentBasis tangent_basis(const ManifoldChart& chart, const Vector& x) {
  const Matrix j = checked_jacobian(chart, x);
  TangentBasis t;
  t.point = x;
  t.basis = null_space(j);
  if (t.basis.cols() != chart.ambient_dim - chart.codim)
    throw Error(ErrorKind::RankDeficient, "tangent dimension mismatch");
  return t;
}

Matrix normal_basis(const ManifoldChart& chart, const Vector& x) {
  const Matrix j = checked_jacobian(chart, x);
  return range_basis(j.transpose());
}

Vector project_tangent(const ManifoldChart& chart, const Vector& x, const Vector& u) {
  const Matrix t = tangent_basis(chart, x).basis;
  return t * (t.transpose() * u);
}

Vector solve_multiplier(const ManifoldChart& chart, const Vector& x, const Vector& rhs,
                        double residual_tol) {
  const Matrix j = checked_jacobian(chart, x);
  require(rhs.size() == chart.ambient_dim, ErrorKind::DimensionMismatch, "multiplier rhs");
  Vector mu(chart.codim);
  if (chart.codim > 0) {
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(j.transpose());
    mu = cod.solve(rhs);
  }
  const Vector residual = (chart.codim > 0 ? Vector(j.transpose() * mu) : Vector::Zero(rhs.size())) - rhs;
  require(residual.norm() <= residual_tol * (1.0 + rhs.norm()), ErrorKind::NotInRange,
          "right-hand side is not in the normal space");
  return mu;
}

Matrix multiplier_hessian(const ManifoldChart& chart, const Vector& x, const Vector& mu) {
  const Index n = chart.ambient_dim;
  Matrix h = Matrix::Zero(n, n);
  if (chart.codim == 0) return h;
  const std::vector<Matrix> hs = chart.hessian_tensor(x);
  require(static_cast<Index>(hs.size()) == chart.codim && mu.size() == chart.codim,
          ErrorKind::DimensionMismatch, "hessian tensor size");
  for (Index j = 0; j < chart.codim; ++j) h += mu(j) * hs[static_cast<std::size_t>(j)];
  return symmetrized(h);
}

}  // namespace psmooth
