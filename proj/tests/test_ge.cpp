#include "doctest.h"

#include "catalog_cases.hpp"
#include "oracles.hpp"
#include "psmooth/catalog.hpp"
#include "psmooth/ge.hpp"
#include "psmooth/linalg.hpp"
#include "psmooth/prox.hpp"
#include "psmooth/second_order.hpp"

#include <Eigen/LU>

#include <cmath>

using namespace psmooth;
using oracle::vec;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::ConfigInvalid;
}

Matrix diag2(double a, double b) {
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = a;
  d(1, 1) = b;
  return d;
}

}  // namespace

TEST_CASE("GE problem derivatives match finite differences") {
  RandomStream rng(2, 0);
  Matrix a(2, 2);
  a << 1.0, 0.4, -0.2, 2.0;
  Matrix c(2, 3);
  c << 1.0, 0.0, 0.5, 0.0, 1.0, -1.0;
  const FunctionPtr f = make_l1(2, 1.0);
  for (const GEProblem& ge : {tilt_ge(f), linear_ge(f, a, c, vec({0.1, 0.2})), cubic_tilt_ge(f, 0.1)}) {
    CAPTURE(ge.family);
    const Vector p = rng.normal_vector(ge.param_dim);
    const Vector x = rng.normal_vector(2);
    const double h = 1e-6;
    Matrix jx(2, 2), jp(2, ge.param_dim);
    for (Index i = 0; i < 2; ++i)
      jx.col(i) = (ge.psi(p, x + h * Vector::Unit(2, i)) - ge.psi(p, x - h * Vector::Unit(2, i))) / (2 * h);
    for (Index i = 0; i < ge.param_dim; ++i)
      jp.col(i) = (ge.psi(p + h * Vector::Unit(ge.param_dim, i), x) -
                   ge.psi(p - h * Vector::Unit(ge.param_dim, i), x)) / (2 * h);
    CHECK((jx - ge.dpsi_dx(p, x)).cwiseAbs().maxCoeff() <= 1e-5);
    CHECK((jp - ge.dpsi_dp(p, x)).cwiseAbs().maxCoeff() <= 1e-5);
  }
}

TEST_CASE("regularity examples") {
  const FunctionPtr l1 = make_l1(2, 1.0);
  const GEProblem tilt = tilt_ge(l1);
  const RegularityReport r = check_regularity(tilt, vec({1, 0}), vec({2, 0.3}));
  CHECK(r.regular);
  CHECK(r.min_singular_value == doctest::Approx(1.0));

  // psi = -p constant in x: B = T' L'' T = 0 for l1.
  const GEProblem constant = linear_ge(l1, Matrix::Zero(2, 2), Matrix::Identity(2, 2), Vector::Zero(2));
  const RegularityReport rc = check_regularity(constant, vec({1, 0}), vec({1, 0.3}));
  CHECK_FALSE(rc.regular);
  CHECK(rc.min_singular_value == 0.0);
  CHECK(kind_of([&] { solution_jacobian(constant, vec({1, 0}), vec({1, 0.3})); }) ==
        ErrorKind::SingularReducedMap);

  // Manifold {0}: tangent space trivial.
  const RegularityReport r0 = check_regularity(tilt, vec({0, 0}), vec({0.2, -0.5}));
  CHECK(r0.regular);
  CHECK(r0.min_singular_value == kInf);
  CHECK(solution_jacobian(tilt, vec({0, 0}), vec({0.2, -0.5})).norm() == 0.0);

  CHECK(kind_of([&] { check_regularity(tilt, vec({1, 0}), vec({2, 1.3})); }) == ErrorKind::NotASolution);
  CHECK(kind_of([&] { check_regularity(tilt, vec({1, 0}), vec({2, 1.0})); }) == ErrorKind::RiViolated);
}

TEST_CASE("solution jacobian and semiderivative examples") {
  const FunctionPtr l1 = make_l1(2, 1.0);
  const GEProblem tilt = tilt_ge(l1);
  const Vector xbar = vec({1, 0});
  const Vector pbar = vec({2, 0.3});
  CHECK((solution_jacobian(tilt, xbar, pbar) - diag2(1, 0)).norm() < 1e-15);
  CHECK((semiderivative(tilt, xbar, pbar, vec({1, 0})) - vec({1, 0})).norm() < 1e-15);
  CHECK(semiderivative(tilt, xbar, pbar, vec({0, 1})).norm() < 1e-15);
  CHECK(semiderivative(tilt, xbar, pbar, vec({0, 0})).norm() == 0.0);

  // Smooth case: psi = Q x - p with f = 1/2 x'Ax + b'x.
  Matrix a(2, 2), q(2, 2);
  a << 2.0, 0.3, 0.3, 1.0;
  q << 1.0, -0.2, -0.2, 0.5;
  const Vector b = vec({0.1, -0.4});
  const FunctionPtr f = make_quadratic(a, b);
  const GEProblem ge = linear_ge(f, q, Matrix::Identity(2, 2), Vector::Zero(2));
  const Vector x = vec({0.3, 0.7});
  const Vector p = q * x + a * x + b;
  const Matrix expect = (q + a).inverse();
  CHECK((solution_jacobian(ge, x, p) - expect).norm() < 1e-12);
  const Vector dir = vec({0.5, -1});
  CHECK((semiderivative(ge, x, p, dir) - expect * dir).norm() < 1e-12);
}

TEST_CASE("solve_ge examples") {
  const FunctionPtr l1 = make_l1(2, 1.0);
  const GEProblem tilt = tilt_ge(l1);
  CHECK((solve_ge(tilt, vec({2, 0.3}), vec({1.2, 0})) - vec({1, 0})).norm() < 1e-12);
  CHECK((solve_ge(tilt, vec({2, 0.3}), vec({1, 0})) - vec({1, 0})).norm() == 0.0);
  const FunctionPtr half_sq = make_quadratic(Matrix::Identity(3, 3), Vector::Zero(3));
  const Vector p = vec({1, -2, 4});
  CHECK((solve_ge(tilt_ge(half_sq), p, Vector::Zero(3)) - p / 2).norm() < 1e-12);
  // Leaving the support pattern of x0 is reported.
  CHECK(kind_of([&] { solve_ge(tilt, vec({2, 1.5}), vec({1, 0})); }) == ErrorKind::RiViolated);
}

TEST_CASE("solution path checks") {
  const FunctionPtr l1 = make_l1(2, 1.0);
  const Vector xbar = vec({1, 0});
  const Vector pbar = vec({2, 0.3});
  const std::vector<double> steps{1e-1, 1e-2, 1e-3, 1e-4};
  const PathCheck lin = solution_path_check(tilt_ge(l1), xbar, pbar, vec({0.6, 0.8}), steps);
  CHECK(lin.max_discrepancy <= 1e-8);
  const PathCheck zero = solution_path_check(tilt_ge(l1), xbar, pbar, vec({0, 0}), {1e-2, 1e-3});
  CHECK(zero.max_discrepancy == 0.0);

  const GEProblem cubic = cubic_tilt_ge(l1, 0.1);
  const Vector pc = cubic.psi(Vector::Zero(2), xbar) + vec({1, 0.3});
  REQUIRE(ge_residual(cubic, pc, xbar) <= 1e-14);
  const PathCheck nl = solution_path_check(cubic, xbar, pc, vec({0.6, 0.8}), {1e-2, 1e-3, 1e-4});
  CHECK(nl.loglog_slope == doctest::Approx(1.0).epsilon(0.15));
  CHECK(nl.discrepancies[2] < nl.discrepancies[0]);
  const PathCheck nl3 = solution_path_check(cubic, xbar, pc, vec({0.6, 0.8}), {1e-2, 1e-3, 1e-4}, {}, 3);
  CHECK(nl3.discrepancies == nl.discrepancies);
}

TEST_CASE("ge1 kernel condition agrees with nonsingularity of B") {
  RandomStream rng(44, 0);
  int singular_seen = 0;
  for (int trial = 0; trial < 50; ++trial) {
    rng.seek(static_cast<std::uint32_t>(trial));
    const Index n = 2 + trial % 4;
    // l1 at a point with some zero coordinates, v in ri.
    Vector x = rng.normal_vector(n);
    Vector v(n);
    for (Index i = 0; i < n; ++i) {
      if (i % 2 == 1) {
        x(i) = 0.0;
        v(i) = 0.8 * (2.0 * rng.uniform() - 1.0);
      } else {
        v(i) = x(i) > 0 ? 1.0 : -1.0;
      }
    }
    const FunctionPtr f = make_l1(n, 1.0);
    const LagrangianData lag = lagrangian_at(*f, x, v);
    const Matrix& t = lag.tangent.basis;
    Matrix m = rng.normal_vector(n * n).reshaped(n, n);
    if (trial % 3 == 0) {
      // Make T'(M)T singular by removing its component along a tangent direction.
      const Vector u = t.col(0);
      m -= (m * u) * u.transpose();
    }
    const GEProblem ge = linear_ge(f, m, Matrix::Identity(n, n), Vector::Zero(n));
    const Vector p = m * x + v;
    const RegularityReport rep = check_regularity(ge, x, p);
    // Brute force: ker of (I - P_N)(M + H) on T, in ambient coordinates.
    const Matrix pn = projector(lag.normal, n);
    const Matrix op = (Matrix::Identity(n, n) - pn) * (m + lag.hessian) * t;
    Eigen::FullPivLU<Matrix> lu(op);
    lu.setThreshold(1e-9);
    const bool trivial_kernel = lu.rank() == t.cols();
    CHECK(rep.regular == trivial_kernel);
    if (!rep.regular) ++singular_seen;
    if (rep.regular) {
      // J (grad psi + L'') is the identity on T.
      const Matrix j = solution_jacobian(ge, x, p);
      CHECK((j * (m + lag.hessian) * t - t).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }
  CHECK(singular_seen >= 10);
}

TEST_CASE("tilt GE agrees with prox and stays on the manifold") {
  RandomStream rng(71, 0);
  for (const auto& raw : cases::catalog_cases()) {
    const auto c = cases::resolved(raw);
    if (!c.f->convex()) continue;
    CAPTURE(c.f->kind());
    const GEProblem ge = tilt_ge(c.f);
    const ActiveManifold am = c.f->active_manifold(c.x);
    for (int k = 0; k < 10; ++k) {
      const Vector p = c.x + c.v + 1e-3 * rng.normal_vector(c.f->dim());
      Vector x;
      try {
        x = solve_ge(ge, p, c.x, {}, am);
      } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::RiViolated);
        continue;
      }
      CHECK((x - prox(*c.f, 1.0, p).x).norm() <= 1e-9);
      if (am.chart.codim > 0) CHECK(am.chart.phi(x).norm() <= 1e-9);
    }
  }
}
