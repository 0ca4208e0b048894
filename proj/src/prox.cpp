#include "psmooth/prox.hpp"

#include "psmooth/linalg.hpp"
#include "psmooth/parallel.hpp"
#include "psmooth/rng.hpp"
#include "psmooth/second_order.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace psmooth {

namespace {

double moreau(const FunctionModel& fm, double r, const Vector& z, const Vector& x) {
  return fm.value(x) + 0.5 * (x - z).squaredNorm() / r;
}

double inclusion_residual(const FunctionModel& fm, const Vector& x, const Vector& v) {
  const SubdifferentialRep s = fm.subdifferential(x);
  if (s.empty) return kInf;
  return project_inf(s, v).distance;
}

}  // namespace

Vector prox_subgradient(const ProxResult& p) { return (p.z - p.x) / p.r; }

ProxResult prox(const FunctionModel& fm, double r, const Vector& z, const ProxOptions& opt) {
  require(r > 0.0, ErrorKind::ConfigInvalid, "prox parameter r must be positive");
  require(z.size() == fm.dim(), ErrorKind::DimensionMismatch, "prox input size");
  const double rho = fm.prox_regularity_modulus();
  require(rho == 0.0 || r * rho < 0.5, ErrorKind::ConfigInvalid, "prox needs r * rho < 1/2");

  ProxResult out;
  out.z = z;
  out.r = r;
  if (const auto cf = fm.prox_closed_form(r, z)) {
    out.x = *cf;
    out.closed_form = true;
    out.residual = inclusion_residual(fm, out.x, prox_subgradient(out));
    try {
      const ActiveManifold am = fm.active_manifold(out.x);
      out.chart_used = am.chart;
      out.signature = am.signature;
    } catch (const Error&) {
    }
    return out;
  }

  const auto candidates = fm.prox_candidates(r, z);
  require(!candidates.empty(), ErrorKind::NoCandidateManifold, "model offers no prox candidates");
  const Index n = z.size();
  auto psi = [&](const Vector& x) -> Vector { return (x - z) / r; };
  auto dpsi = [&](const Vector&) -> Matrix { return Matrix::Identity(n, n) / r; };
  bool any_converged = false;
  double best = kInf;
  for (const auto& cand : candidates) {
    NewtonResult nr;
    try {
      nr = manifold_newton(cand.manifold, psi, dpsi, cand.start, opt.newton);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NewtonDiverged) throw;
      continue;
    }
    any_converged = true;
    const Vector v = (z - nr.x) / r;
    const double res = inclusion_residual(fm, nr.x, v);
    if (!(res <= opt.tol * (1.0 + inf_norm(v)))) continue;
    const double obj = moreau(fm, r, z, nr.x);
    if (obj < best) {
      best = obj;
      out.x = nr.x;
      out.residual = res;
      out.chart_used = cand.manifold.chart;
      out.signature = cand.manifold.signature;
    }
    if (fm.convex()) break;  // the prox of a convex function is unique
  }
  if (!std::isfinite(best)) {
    require(any_converged, ErrorKind::NewtonDiverged, "Newton failed on every candidate manifold");
    throw Error(ErrorKind::NoCandidateManifold, "no candidate manifold yields a verified prox point");
  }
  return out;
}

Matrix prox_jacobian(const FunctionModel& fm, double r, const Vector& z, const ProxOptions& opt) {
  const ProxResult p = prox(fm, r, z, opt);
  const Vector v = prox_subgradient(p);
  const RiTest ri = relative_interior_test(fm.subdifferential(p.x), v);
  require(ri.inside && ri.margin > kRiMarginTol, ErrorKind::RiViolated,
          "(z - prox(z))/r is not in the relative interior of df(prox(z))");
  const LagrangianData lag = lagrangian_at(fm, p.x, v);
  const Index n = z.size();
  const Matrix& t = lag.tangent.basis;
  if (t.cols() == 0) return Matrix::Zero(n, n);
  const Matrix b = Matrix::Identity(t.cols(), t.cols()) + r * reduced_hessian(lag);
  Eigen::JacobiSVD<Matrix> svd(b);
  const double smin = svd.singularValues().minCoeff();
  require(smin > 1e-12 * std::max(1.0, svd.singularValues().maxCoeff()), ErrorKind::SingularReducedMap,
          "I + r T'HT is singular on the tangent space");
  return t * b.inverse() * t.transpose();
}

Matrix prox_jacobian_fd(const FunctionModel& fm, double r, const Vector& z, double h, const ProxOptions& opt) {
  const Index n = z.size();
  Matrix j(n, n);
  for (Index i = 0; i < n; ++i) {
    const Vector e = Vector::Unit(n, i);
    j.col(i) = (prox(fm, r, z + h * e, opt).x - prox(fm, r, z - h * e, opt).x) / (2.0 * h);
  }
  return j;
}

IdentificationReport identification_test(const FunctionModel& fm, const Vector& xbar, const Vector& vbar,
                                         double r, int num_samples, double radius, std::uint64_t seed,
                                         int jobs) {
  const RiTest ri = relative_interior_test(fm.subdifferential(xbar), vbar);
  require(ri.inside && ri.margin > kRiMarginTol, ErrorKind::RiViolated, "vbar must be in ri df(xbar)");
  const ActiveManifold am = fm.active_manifold(xbar);
  const Vector center = xbar + r * vbar;
  const Index n = xbar.size();
  std::vector<char> hit(static_cast<std::size_t>(std::max(num_samples, 0)), 0);
  parallel_for(hit.size(), jobs, [&](std::size_t s) {
    RandomStream rng(seed, static_cast<std::uint32_t>(s), 0x69647400u);
    Vector u = rng.normal_vector(n);
    u *= radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(n)) / std::max(u.norm(), 1e-300);
    try {
      const ProxResult p = prox(fm, r, center + u);
      hit[s] = am.chart.on_manifold(p.x) ? 1 : 0;
    } catch (const Error&) {
      hit[s] = 0;
    }
  });
  IdentificationReport rep;
  rep.samples = num_samples;
  for (char h : hit) rep.on_manifold += h;
  rep.fraction = num_samples > 0 ? static_cast<double>(rep.on_manifold) / num_samples : 0.0;
  return rep;
}

}  // namespace psmooth
