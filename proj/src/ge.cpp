#include "psmooth/ge.hpp"

#include "psmooth/linalg.hpp"
#include "psmooth/parallel.hpp"
#include "psmooth/second_order.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace psmooth {

GEProblem tilt_ge(FunctionPtr fm) {
  const Index n = fm->dim();
  GEProblem ge;
  ge.fm = std::move(fm);
  ge.param_dim = n;
  ge.psi = [](const Vector& p, const Vector& x) -> Vector { return x - p; };
  ge.dpsi_dx = [n](const Vector&, const Vector&) -> Matrix { return Matrix::Identity(n, n); };
  ge.dpsi_dp = [n](const Vector&, const Vector&) -> Matrix { return -Matrix::Identity(n, n); };
  ge.family = "tilt";
  return ge;
}

GEProblem linear_ge(FunctionPtr fm, Matrix a, Matrix c, Vector b) {
  const Index n = fm->dim();
  require(a.rows() == n && a.cols() == n && c.rows() == n && b.size() == n, ErrorKind::DimensionMismatch,
          "linear_ge sizes");
  GEProblem ge;
  ge.fm = std::move(fm);
  ge.param_dim = c.cols();
  ge.psi = [a, c, b](const Vector& p, const Vector& x) -> Vector { return a * x - c * p + b; };
  ge.dpsi_dx = [a](const Vector&, const Vector&) -> Matrix { return a; };
  ge.dpsi_dp = [c](const Vector&, const Vector&) -> Matrix { return -c; };
  ge.family = "linear";
  return ge;
}

GEProblem cubic_tilt_ge(FunctionPtr fm, double kappa) {
  const Index n = fm->dim();
  GEProblem ge;
  ge.fm = std::move(fm);
  ge.param_dim = n;
  ge.psi = [kappa](const Vector& p, const Vector& x) -> Vector {
    Vector out = x - p;
    out(0) += kappa * x(0) * x(0) * x(0);
    return out;
  };
  ge.dpsi_dx = [n, kappa](const Vector&, const Vector& x) -> Matrix {
    Matrix j = Matrix::Identity(n, n);
    j(0, 0) += 3.0 * kappa * x(0) * x(0);
    return j;
  };
  ge.dpsi_dp = [n](const Vector&, const Vector&) -> Matrix { return -Matrix::Identity(n, n); };
  ge.family = "cubic_tilt";
  return ge;
}

double ge_residual(const GEProblem& ge, const Vector& p, const Vector& x) {
  const SubdifferentialRep s = ge.fm->subdifferential(x);
  if (s.empty) return kInf;
  return project_inf(s, -ge.psi(p, x)).distance;
}

namespace {

void require_solution(const GEProblem& ge, const Vector& x, const Vector& p, const GeOptions& opt) {
  require(x.size() == ge.fm->dim() && p.size() == ge.param_dim, ErrorKind::DimensionMismatch, "GE point sizes");
  const Vector v = -ge.psi(p, x);
  require(ge_residual(ge, p, x) <= opt.solution_tol * (1.0 + inf_norm(v)), ErrorKind::NotASolution,
          "x does not solve the generalized equation at p");
  const RiTest ri = relative_interior_test(ge.fm->subdifferential(x), v);
  require(ri.inside && ri.margin > kRiMarginTol, ErrorKind::RiViolated, "-psi(p, x) is not in ri df(x)");
}

}  // namespace

RegularityReport check_regularity(const GEProblem& ge, const Vector& xbar, const Vector& pbar,
                                  const GeOptions& opt) {
  require_solution(ge, xbar, pbar, opt);
  const LagrangianData lag = lagrangian_at(*ge.fm, xbar, -ge.psi(pbar, xbar));
  RegularityReport rep;
  rep.tangent = lag.tangent.basis;
  const Matrix& t = rep.tangent;
  if (t.cols() == 0) {
    rep.regular = true;
    rep.min_singular_value = kInf;
    rep.reduced = Matrix(0, 0);
    return rep;
  }
  rep.reduced = t.transpose() * (ge.dpsi_dx(pbar, xbar) + lag.hessian) * t;
  Eigen::JacobiSVD<Matrix> svd(rep.reduced);
  const auto& s = svd.singularValues();
  rep.min_singular_value = s.minCoeff();
  rep.regular = rep.min_singular_value > 1e-10 * std::max(1.0, s.maxCoeff());
  return rep;
}

Matrix solution_jacobian(const GEProblem& ge, const Vector& x, const Vector& p, const GeOptions& opt) {
  const RegularityReport rep = check_regularity(ge, x, p, opt);
  const Index n = x.size();
  if (rep.tangent.cols() == 0) return Matrix::Zero(n, n);
  require(rep.regular, ErrorKind::SingularReducedMap, "reduced GE map is singular on the tangent space");
  return rep.tangent * rep.reduced.inverse() * rep.tangent.transpose();
}

Vector solve_ge(const GEProblem& ge, const Vector& p, const Vector& x0, const GeOptions& opt,
                const std::optional<ActiveManifold>& manifold) {
  require(x0.size() == ge.fm->dim() && p.size() == ge.param_dim, ErrorKind::DimensionMismatch, "solve_ge sizes");
  const ActiveManifold am = manifold ? *manifold : ge.fm->active_manifold(x0);
  auto psi = [&](const Vector& x) { return ge.psi(p, x); };
  auto dpsi = [&](const Vector& x) { return ge.dpsi_dx(p, x); };
  const NewtonResult nr = manifold_newton(am, psi, dpsi, x0, opt.newton);
  const Vector v = -ge.psi(p, nr.x);
  const RiTest ri = relative_interior_test(ge.fm->subdifferential(nr.x), v);
  require(ri.inside && ri.margin > kRiMarginTol, ErrorKind::RiViolated,
          "solution left the region where -psi stays in ri df(x)");
  return nr.x;
}

Vector semiderivative(const GEProblem& ge, const Vector& xbar, const Vector& pbar, const Vector& q,
                      const GeOptions& opt) {
  require(q.size() == ge.param_dim, ErrorKind::DimensionMismatch, "parameter direction size");
  return -solution_jacobian(ge, xbar, pbar, opt) * (ge.dpsi_dp(pbar, xbar) * q);
}

PathCheck solution_path_check(const GEProblem& ge, const Vector& xbar, const Vector& pbar, const Vector& q,
                              const std::vector<double>& steps, const GeOptions& opt, int jobs) {
  const Vector ds = semiderivative(ge, xbar, pbar, q, opt);
  const ActiveManifold am = ge.fm->active_manifold(xbar);
  PathCheck out;
  out.steps = steps;
  out.discrepancies.assign(steps.size(), 0.0);
  parallel_for(steps.size(), jobs, [&](std::size_t k) {
    const double t = steps[k];
    const Vector xt = solve_ge(ge, pbar + t * q, xbar, opt, am);
    out.discrepancies[k] = ((xt - xbar) / t - ds).norm();
  });
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    out.max_discrepancy = std::max(out.max_discrepancy, out.discrepancies[k]);
    if (out.discrepancies[k] > 0.0 && steps[k] > 0.0) {
      const double lx = std::log(steps[k]);
      const double ly = std::log(out.discrepancies[k]);
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
      ++cnt;
    }
  }
  if (cnt >= 2) {
    const double den = cnt * sxx - sx * sx;
    if (den != 0.0) out.loglog_slope = (cnt * sxy - sx * sy) / den;
  }
  return out;
}

}  // namespace psmooth
