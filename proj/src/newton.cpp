#include "psmooth/newton.hpp"

#include "psmooth/linalg.hpp"

#include <Eigen/LU>
#include <Eigen/QR>

#include <cmath>

namespace psmooth {

namespace {

struct Kkt {
  Vector f;
  double scale = 1.0;
};

Kkt residual(const ActiveManifold& am, const std::function<Vector(const Vector&)>& psi, const Vector& x,
             const Vector& mu) {
  const ManifoldChart& c = am.chart;
  const Index n = x.size();
  const Index m = c.codim;
  const Vector p = psi(x);
  const Vector g = am.representative.gradient(x);
  Kkt k;
  k.f.resize(n + m);
  k.f.head(n) = p + g;
  if (m > 0) {
    k.f.head(n) += c.jacobian(x).transpose() * mu;
    k.f.tail(m) = c.phi(x);
  }
  k.scale = 1.0 + inf_norm(p) + inf_norm(g);
  return k;
}

}  // namespace

NewtonResult manifold_newton(const ActiveManifold& am, const std::function<Vector(const Vector&)>& psi,
                             const std::function<Matrix(const Vector&)>& psi_jacobian, const Vector& x0,
                             const NewtonOptions& opt) {
  const ManifoldChart& c = am.chart;
  const Index n = x0.size();
  const Index m = c.codim;
  require(c.ambient_dim == n, ErrorKind::DimensionMismatch, "manifold_newton start size");

  // Start on the manifold: Gauss-Newton on phi.
  Vector x = x0;
  for (int it = 0; it < 50 && m > 0; ++it) {
    const Vector phi = c.phi(x);
    if (inf_norm(phi) <= 1e-15 * (1.0 + inf_norm(x))) break;
    const Matrix j = c.jacobian(x);
    x -= Eigen::CompleteOrthogonalDecomposition<Matrix>(j).solve(phi);
  }
  Vector mu(m);
  if (m > 0) {
    const Vector rhs = -(psi(x) + am.representative.gradient(x));
    mu = Eigen::CompleteOrthogonalDecomposition<Matrix>(c.jacobian(x).transpose()).solve(rhs);
  }

  NewtonResult out;
  Kkt k = residual(am, psi, x, mu);
  for (int it = 0;; ++it) {
    const double res = inf_norm(k.f);
    require(std::isfinite(res), ErrorKind::NewtonDiverged, "non-finite KKT residual");
    if (res <= opt.tol * k.scale) {
      out.x = x;
      out.mu = mu;
      out.residual = res;
      out.iterations = it;
      return out;
    }
    require(it < opt.max_iter, ErrorKind::NewtonDiverged, "iteration limit reached");
    Matrix d = Matrix::Zero(n + m, n + m);
    Matrix h = psi_jacobian(x) + am.representative.hessian(x);
    if (m > 0) {
      h += multiplier_hessian(c, x, mu);
      const Matrix j = c.jacobian(x);
      d.block(0, n, n, m) = j.transpose();
      d.block(n, 0, m, n) = j;
    }
    d.topLeftCorner(n, n) = h;
    Eigen::FullPivLU<Matrix> lu(d);
    require(lu.isInvertible(), ErrorKind::NewtonDiverged, "singular KKT matrix");
    const Vector step = lu.solve(-k.f);
    const double merit = 0.5 * k.f.squaredNorm();
    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls, alpha *= 0.5) {
      const Vector xn = x + alpha * step.head(n);
      const Vector mn = mu + alpha * step.tail(m);
      const Kkt kn = residual(am, psi, xn, mn);
      const double mn_merit = 0.5 * kn.f.squaredNorm();
      if (std::isfinite(mn_merit) && mn_merit <= (1.0 - 1e-4 * alpha) * merit) {
        x = xn;
        mu = mn;
        k = kn;
        accepted = true;
        break;
      }
    }
    require(accepted, ErrorKind::NewtonDiverged, "line search failed");
  }
}

}  // namespace psmooth
