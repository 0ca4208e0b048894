#include "doctest.h"

#include "catalog_cases.hpp"
#include "oracles.hpp"
#include "psmooth/catalog.hpp"
#include "psmooth/cplq.hpp"
#include "psmooth/linalg.hpp"

#include <cmath>

using namespace psmooth;
using oracle::vec;
using cases::circle_max;
using cases::CatalogCase;
using cases::catalog_cases;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::ConfigInvalid;
}

Vector on_manifold_sample(const ActiveManifold& am, const Vector& x, RandomStream& rng, double scale) {
  // Tangent step followed by Newton projection back onto phi = 0.
  const Matrix t = tangent_basis(am.chart, x).basis;
  Vector y = x + t * (scale * rng.normal_vector(t.cols()));
  for (int it = 0; it < 50 && am.chart.codim > 0; ++it) {
    const Matrix j = am.chart.jacobian(y);
    const Vector phi = am.chart.phi(y);
    if (phi.norm() < 1e-15) break;
    y -= j.transpose() * (j * j.transpose()).ldlt().solve(phi);
  }
  return y;
}

}  // namespace

TEST_CASE("l1 subdifferential and active chart") {
  const FunctionPtr f = make_l1(2, 1.0);
  const SubdifferentialRep s = subdifferential(*f, vec({1, 0}));
  CHECK(contains(s, vec({1, 0.7})));
  CHECK(contains(s, vec({1, -1})));
  CHECK_FALSE(contains(s, vec({1, 1.1})));
  CHECK_FALSE(contains(s, vec({0.9, 0})));
  CHECK(same_subspace(parallel_basis(s), Matrix(vec({0, 1}))));

  const SubdifferentialRep s2 = subdifferential(*f, vec({1, 2}));
  CHECK(parallel_basis(s2).cols() == 0);
  CHECK(contains(s2, vec({1, 1})));

  const ManifoldChart c = active_chart(*f, vec({1, 0}), vec({1, 0.3}));
  CHECK(c.codim == 1);
  CHECK(c.phi(vec({4, -2}))(0) == -2.0);
  CHECK(active_chart(*f, vec({1, 2}), vec({1, 1})).codim == 0);
  CHECK(kind_of([&] { active_chart(*f, vec({1, 0}), vec({1, 2})); }) == ErrorKind::NotASubgradient);
}

TEST_CASE("half max squared: subdifferential and chart at 0") {
  const FunctionPtr f = make_cplq(cplq_half_max_squared());
  const SubdifferentialRep s = subdifferential(*f, vec({0}));
  CHECK(contains(s, vec({0})));
  CHECK_FALSE(contains(s, vec({1e-6})));
  CHECK_FALSE(contains(s, vec({-1e-6})));
  const ManifoldChart c = active_chart(*f, vec({0}), vec({0}));
  CHECK(c.codim == 1);
  CHECK(std::abs(c.phi(vec({0.25}))(0)) == doctest::Approx(0.25));
}

TEST_CASE("critical cone matches the directional-derivative definition") {
  const FunctionPtr f = make_cplq(cplq_abs());
  // K = { w : f'(x; w) = <v, w> }, with f'(0; w) = |w| read off by a quotient.
  auto in_brute = [&](const Vector& x, double v, double w) {
    const double t = 1e-7;
    const double fd = (f->value(x + t * vec({w})) - f->value(x)) / t;
    return std::abs(fd - v * w) <= 1e-6;
  };
  const SubdifferentialRep k0 = critical_cone(*f, vec({0}), vec({0}));
  const SubdifferentialRep k1 = critical_cone(*f, vec({0}), vec({1}));
  const SubdifferentialRep k2 = critical_cone(*f, vec({2}), vec({1}));
  for (double w : {-2.0, -0.5, 0.0, 0.5, 2.0}) {
    CHECK(contains(k0, vec({w})) == in_brute(vec({0}), 0.0, w));
    CHECK(contains(k1, vec({w})) == in_brute(vec({0}), 1.0, w));
    CHECK(contains(k2, vec({w})) == in_brute(vec({2}), 1.0, w));
  }
  CHECK(parallel_basis(k0).cols() == 0);
  CHECK(parallel_basis(k2).cols() == 1);
  CHECK(kind_of([&] { critical_cone(*f, vec({0}), vec({2})); }) == ErrorKind::NotASubgradient);
}

TEST_CASE("critical cone equals the tangent space for ri subgradients") {
  const FunctionPtr f = make_l1(3, 1.0);
  const Vector x = vec({1, 0, -2});
  const Vector v = vec({1, 0.3, -1});
  const SubdifferentialRep k = critical_cone(*f, x, v);
  const Matrix t = tangent_basis(active_chart(*f, x, v), x).basis;
  CHECK(same_subspace(parallel_basis(k), t));
  CHECK(contains(k, t.col(0)));
  CHECK(contains(k, -t.col(1)));
}

TEST_CASE("max of quadratics: subdifferential, chart, degeneracy") {
  const FunctionPtr f = circle_max();
  const Vector x = vec({0, 0});
  const SubdifferentialRep s = subdifferential(*f, x);
  CHECK(contains(s, vec({1, 0})));
  CHECK_FALSE(contains(s, vec({1, 0.1})));
  const ManifoldChart c = active_chart(*f, x, vec({1, 0}));
  CHECK(c.codim == 1);
  CHECK(c.phi(vec({1, 1}))(0) == doctest::Approx(0.0));
  CHECK(std::abs(c.phi(vec({2, 0}))(0)) < 1e-15);

  // Three pieces whose gradients at 0 are collinear.
  QuadraticPiece a{Matrix::Zero(1, 1), vec({-1}), 0.0};
  QuadraticPiece b{Matrix::Zero(1, 1), vec({0}), 0.0};
  QuadraticPiece d{Matrix::Zero(1, 1), vec({1}), 0.0};
  const FunctionPtr g = make_max_quadratics({a, b, d});
  CHECK(kind_of([&] { active_chart(*g, vec({0}), vec({0})); }) == ErrorKind::DegenerateActiveSet);
}

TEST_CASE("catalog invariants") {
  RandomStream rng(17, 0);
  int idx = 0;
  for (auto c : catalog_cases()) {
    const int case_index = idx++;
    CAPTURE(case_index);
    rng.seek(static_cast<std::uint32_t>(case_index));
    const FunctionModel& f = *c.f;
    c = cases::resolved(c);
    const SubdifferentialRep s = subdifferential(f, c.x);
    REQUIRE(contains(s, c.v));
    REQUIRE(relative_interior_test(s, c.v).inside);
    const ActiveManifold am = f.active_manifold(c.x);

    // Subgradient inequality at generators for convex entries.
    if (f.convex()) {
      std::vector<Vector> gens;
      Vector anchor = s.anchor();
      gens.push_back(anchor);
      for (std::size_t b = 0; b < s.blocks.size(); ++b)
        for (Index j = 0; j < s.blocks[b].cols(); ++j)
          gens.push_back(anchor - s.blocks[b].col(0) + s.blocks[b].col(j));
      for (int k = 0; k < 50; ++k) {
        const Vector y = c.x + rng.normal_vector(f.dim());
        for (const auto& g : gens)
          CHECK(f.value(y) >= f.value(c.x) + g.dot(y - c.x) - 1e-12 * (1.0 + std::abs(f.value(y))));
      }
    }

    // f_hat agrees with f on the manifold.
    for (int k = 0; k < 100; ++k) {
      const Vector y = on_manifold_sample(am, c.x, rng, 0.05);
      CHECK(std::abs(am.representative.value(y) - f.value(y)) <= 1e-10);
    }

    // Normal sharpness: par(df(x)) = N_M(x).
    CHECK(same_subspace(parallel_basis(s), normal_basis(am.chart, c.x)));

    // Subgradient continuity along M: dist(v, df(y)) decreases to 0.
    double prev = kInf;
    const Matrix t = tangent_basis(am.chart, c.x).basis;
    if (t.cols() > 0) {
      const Vector dir = t.col(0);
      for (int j = 1; j <= 8; ++j) {
        Vector y = c.x + std::pow(0.5, j) * 0.2 * dir;
        for (int it = 0; it < 50 && am.chart.codim > 0; ++it) {
          const Matrix jac = am.chart.jacobian(y);
          y -= jac.transpose() * (jac * jac.transpose()).ldlt().solve(am.chart.phi(y));
        }
        const double d = project_inf(subdifferential(f, y), c.v).distance;
        CHECK(d <= prev + 1e-12);
        prev = d;
      }
      CHECK(prev < 1e-2);
    }

    // Local graph representation: w - grad f_hat(y) in N_M(y), and conversely.
    for (int k = 0; k < 20; ++k) {
      const Vector y = on_manifold_sample(am, c.x, rng, 0.01);
      const SubdifferentialRep sy = subdifferential(f, y);
      const Vector w = sy.anchor();
      CHECK_NOTHROW(solve_multiplier(am.chart, y, w - am.representative.gradient(y)));
      const Matrix nb = normal_basis(am.chart, y);
      const Vector mu = solve_multiplier(am.chart, c.x, c.v - am.representative.gradient(c.x));
      Vector cand = am.representative.gradient(y) + am.chart.jacobian(y).transpose() * mu;
      if (nb.cols() > 0) cand += nb * (1e-3 * rng.normal_vector(nb.cols()));
      CHECK(contains(sy, cand, 1e-8));
    }
  }
}
