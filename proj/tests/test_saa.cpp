#include "doctest.h"

#include "oracles.hpp"
#include "psmooth/catalog.hpp"
#include "psmooth/linalg.hpp"
#include "psmooth/saa.hpp"

#include <Eigen/QR>

#include <cmath>

using namespace psmooth;
using oracle::vec;

namespace {

Matrix test_cov() {
  Matrix c(5, 5);
  c << 1.0, 0.3, 0.1, 0.0, 0.0,
       0.3, 0.5, 0.0, 0.1, 0.0,
       0.1, 0.0, 0.8, 0.0, 0.2,
       0.0, 0.1, 0.0, 0.6, 0.0,
       0.0, 0.0, 0.2, 0.0, 0.4;
  return c;
}

Vector test_mu() { return vec({2, -1.5, 0.3, -0.2, 0.1}); }

Vector soft_threshold(const Vector& z, double lambda) {
  Vector x(z.size());
  for (Index i = 0; i < z.size(); ++i) x(i) = std::copysign(std::max(std::abs(z(i)) - lambda, 0.0), z(i));
  return x;
}

}  // namespace

TEST_CASE("sigma examples") {
  const StochasticPtr m = make_gaussian_shift(test_mu(), test_cov());
  const Vector x = vec({0.1, 0.2, 0, 0, 0});
  const SigmaEstimate a = sigma(*m, x);
  CHECK(a.analytic);
  CHECK((a.sigma - test_cov()).norm() == 0.0);
  const SigmaEstimate mc = sigma(*m, x, 100000, 3, true);
  CHECK_FALSE(mc.analytic);
  CHECK(mc.standard_error > 0.0);
  CHECK((mc.sigma - test_cov()).norm() <= 5.0 * mc.standard_error);

  const StochasticPtr det = make_gaussian_shift(test_mu(), Matrix::Zero(5, 5));
  CHECK(sigma(*det, x, 1000, 3, true).sigma.norm() <= 1e-24);
  CHECK(sigma(*det, x).sigma.norm() == 0.0);
}

TEST_CASE("stochastic model invariants") {
  Matrix a = Matrix::Identity(5, 5);
  a(0, 1) = a(1, 0) = 0.4;
  const StochasticPtr m = make_gaussian_linear(a, test_mu(), test_cov());
  const Vector x = vec({0.5, -1, 0.2, 0, 0.3});
  const Matrix z = draw_samples(*m, 100000, 9, 0);
  const Vector avg = m->average_grad(x, z);
  const Vector se = test_cov().diagonal().cwiseSqrt() / std::sqrt(100000.0);
  for (Index i = 0; i < 5; ++i) CHECK(std::abs(avg(i) - m->mean_grad(x)(i)) <= 3.0 * se(i));
  // Default averaging loop agrees with the specialised one.
  Vector loop = Vector::Zero(5);
  for (Index i = 0; i < 1000; ++i) loop += m->grad(x, z.col(i));
  CHECK((loop / 1000.0 - m->average_grad(x, z.leftCols(1000))).norm() <= 1e-12);
  // Lipschitz spot check of the sampled gradient: constant A.
  const Vector y = x + vec({0.1, 0, -0.2, 0.3, 0});
  CHECK((m->grad(y, z.col(0)) - m->grad(x, z.col(0))).norm() <= a.norm() * (y - x).norm() + 1e-12);

  // Samples do not depend on how many were drawn.
  CHECK((draw_samples(*m, 10, 9, 0) - z.leftCols(10)).norm() == 0.0);
  CHECK((draw_samples(*m, 10, 9, 1) - z.leftCols(10)).norm() > 0.0);

  bool rejected = false;
  try {
    make_gaussian_shift(vec({0, 0}), vec({1, -1}).asDiagonal());
  } catch (const Error& e) {
    rejected = e.kind() == ErrorKind::ConfigInvalid;
  }
  CHECK(rejected);
}

TEST_CASE("theoretical law examples") {
  const StochasticPtr m = make_gaussian_shift(test_mu(), test_cov());
  const FunctionPtr l1 = make_l1(5, 1.0);
  const Vector xbar = soft_threshold(test_mu(), 1.0);
  CHECK((reference_solution(m, l1, Vector::Zero(5)) - xbar).norm() <= 1e-12);
  const AsymptoticLaw law = theoretical_law(m, l1, xbar);
  Matrix expect = Matrix::Zero(5, 5);
  expect.topLeftCorner(2, 2) = test_cov().topLeftCorner(2, 2);
  CHECK((law.limit_covariance - expect).norm() <= 1e-14);
  CHECK(law.ri_margin == doctest::Approx(0.7));
  // Range inside T and PSD.
  const Matrix pt = law.tangent * law.tangent.transpose();
  CHECK((pt * law.limit_covariance * pt - law.limit_covariance).norm() <= 1e-14);

  // All coordinates off support: T = {0}.
  const StochasticPtr small = make_gaussian_shift(0.1 * test_mu(), test_cov());
  const AsymptoticLaw zero = theoretical_law(small, l1, Vector::Zero(5));
  CHECK(zero.tangent.cols() == 0);
  CHECK(zero.limit_covariance.norm() == 0.0);

  // Smooth case: classical sandwich A^-1 C A^-1.
  Matrix a = 2.0 * Matrix::Identity(5, 5);
  a(0, 1) = a(1, 0) = 0.5;
  a(3, 4) = a(4, 3) = -0.3;
  const StochasticPtr lin = make_gaussian_linear(a, test_mu(), test_cov());
  const FunctionPtr none = make_quadratic(Matrix::Zero(5, 5), Vector::Zero(5));
  const Vector xs = a.inverse() * test_mu();
  const AsymptoticLaw s = theoretical_law(lin, none, xs);
  CHECK((s.limit_covariance - a.inverse() * test_cov() * a.inverse()).norm() <= 1e-12);

  bool ri = false;
  try {
    theoretical_law(m, l1, vec({1, -0.5, 0, 0, 0.0}) + vec({0, 0, 0, 0, 0.5}));
  } catch (const Error& e) {
    ri = e.kind() == ErrorKind::NotASolution || e.kind() == ErrorKind::RiViolated;
  }
  CHECK(ri);
}

TEST_CASE("limit covariance properties") {
  RandomStream rng(5, 0);
  const Matrix t = Eigen::HouseholderQR<Matrix>(rng.normal_vector(15).reshaped(5, 3))
                       .householderQ() * Matrix::Identity(5, 3);
  Matrix b = rng.normal_vector(9).reshaped(3, 3);
  b += 4.0 * Matrix::Identity(3, 3);
  const Matrix sig = test_cov();
  const Matrix l = limit_covariance(t, b, sig);
  CHECK((limit_covariance(t, b, 2.0 * sig) - 2.0 * l).norm() <= 1e-15 * (1.0 + l.norm()));
  // Orthonormal change of tangent basis: T -> T Q, B -> Q' B Q.
  const Matrix q = Eigen::HouseholderQR<Matrix>(rng.normal_vector(9).reshaped(3, 3)).householderQ();
  CHECK((limit_covariance(t * q, q.transpose() * b * q, sig) - l).norm() <= 1e-12);
  CHECK((l - l.transpose()).norm() == 0.0);
}

TEST_CASE("run_saa examples") {
  const FunctionPtr l1 = make_l1(5, 1.0);
  const Vector xbar = soft_threshold(test_mu(), 1.0);
  // Degenerate sample Z_1 = E Z.
  const StochasticPtr det = make_gaussian_shift(test_mu(), Matrix::Zero(5, 5));
  CHECK((run_saa(det, l1, xbar, 1, 42) - xbar).norm() == 0.0);

  const StochasticPtr m = make_gaussian_shift(test_mu(), test_cov());
  const Vector a = run_saa(m, l1, xbar, 500, 42, 3);
  const Vector b = run_saa(m, l1, xbar, 500, 42, 3);
  CHECK((a - b).norm() == 0.0);
  // Closed form: soft threshold of the sample mean.
  const Matrix z = draw_samples(*m, 500, 42, 3);
  CHECK((a - soft_threshold(z.rowwise().mean(), 1.0)).norm() <= 1e-12);
  CHECK((run_saa(m, l1, xbar, 200000, 42) - xbar).norm() <= 1e-2);

  // Non-diagonal A: the SAA point solves its own GE.
  Matrix aa = Matrix::Identity(5, 5);
  aa(0, 2) = aa(2, 0) = 0.3;
  const StochasticPtr lin = make_gaussian_linear(aa, test_mu(), test_cov());
  const Vector xr = reference_solution(lin, l1, Vector::Zero(5));
  CHECK(ge_residual(true_ge(lin, l1), Vector(0), xr) <= 1e-12);
  const Matrix zl = draw_samples(*lin, 1000, 1, 0);
  const Vector xl = run_saa(lin, l1, xr, zl);
  CHECK(ge_residual(saa_ge(lin, l1, zl), Vector(0), xl) <= 1e-12);
}

TEST_CASE("empirical distribution") {
  const StochasticPtr m = make_gaussian_shift(test_mu(), test_cov());
  const FunctionPtr l1 = make_l1(5, 1.0);
  const Vector xbar = soft_threshold(test_mu(), 1.0);
  const EmpiricalReport one = empirical_distribution(m, l1, xbar, 100, 1, 42);
  CHECK_FALSE(one.covariance.has_value());

  const int reps = 400;
  const EmpiricalReport e1 = empirical_distribution(m, l1, xbar, 1000, reps, 42, 1);
  const EmpiricalReport e3 = empirical_distribution(m, l1, xbar, 1000, reps, 42, 3);
  REQUIRE(e1.covariance.has_value());
  CHECK((*e1.covariance - *e3.covariance).norm() == 0.0);
  CHECK(e1.on_manifold_fraction == 1.0);
  for (int r = 0; r < reps; ++r) {
    CHECK((e1.samples[r] - e3.samples[r]).norm() == 0.0);
    if (e1.on_manifold[r]) CHECK(e1.samples[r].tail(3).norm() == 0.0);
  }
  // On-support variances within 3 SE of Cov(Z); SE of a Gaussian variance estimate is sqrt(2/R) sigma^2.
  for (Index i = 0; i < 2; ++i) {
    const double c = test_cov()(i, i);
    CHECK(std::abs((*e1.covariance)(i, i) - c) <= 3.0 * std::sqrt(2.0 / reps) * c);
  }
  const AsymptoticComparison cmp = compare_asymptotics(e1, theoretical_law(m, l1, xbar));
  CHECK(cmp.frobenius_rel_error <= 0.2);
  CHECK(cmp.max_abs_z <= 4.0);
  CHECK(cmp.z_scores[4] == 0.0);
}

TEST_CASE("relative frobenius conventions") {
  const Matrix a = test_cov();
  CHECK(relative_frobenius(a, a) == 0.0);
  CHECK(relative_frobenius(a, Matrix::Zero(5, 5)) == 1.0);
  CHECK(relative_frobenius(Matrix::Zero(5, 5), Matrix::Zero(5, 5)) == 0.0);
  CHECK(relative_frobenius(2.0 * a, a) == doctest::Approx(1.0));
  bool mismatch = false;
  try {
    relative_frobenius(a, Matrix::Zero(4, 4));
  } catch (const Error& e) {
    mismatch = e.kind() == ErrorKind::DimensionMismatch;
  }
  CHECK(mismatch);
}

TEST_CASE("root-k consistency") {
  const StochasticPtr m = make_gaussian_shift(test_mu(), test_cov());
  const FunctionPtr l1 = make_l1(5, 1.0);
  const Vector xbar = soft_threshold(test_mu(), 1.0);
  const ConsistencyReport c = consistency_check(m, l1, xbar, {100, 1000, 10000}, 100, 42, 2);
  CHECK(c.loglog_slope == doctest::Approx(-0.5).epsilon(0.2));
  CHECK(c.medians[2] < c.medians[0]);
  CHECK(loglog_slope({1, 10, 100}, {1, 0.1, 0.01}) == doctest::Approx(-1.0));
}
