#include "doctest.h"

#include "oracles.hpp"
#include "psmooth/counterexamples.hpp"
#include "psmooth/rng.hpp"
#include "psmooth/second_order.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>

using namespace psmooth;
using oracle::vec;

namespace {

double quadrature_f(double x) {
  if (x <= 0.0) return 0.0;
  // Integrate piece by piece between dyadic breakpoints so each call sees an affine integrand.
  double total = 0.0;
  double hi = x;
  while (hi > std::ldexp(1.0, kDyadicMin)) {
    const double lo = std::max(std::ldexp(1.0, dyadic_index(hi) - (std::ldexp(1.0, dyadic_index(hi)) == hi ? 1 : 0)),
                               std::ldexp(1.0, kDyadicMin));
    total += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(g_eval, lo, hi, 0, 1e-15);
    hi = lo;
  }
  return total + boost::math::quadrature::gauss_kronrod<double, 15>::integrate(g_eval, 0.0, hi, 0, 1e-15);
}

}  // namespace

TEST_CASE("g and f examples") {
  CHECK(g_eval(1.0) == 1.0);
  CHECK(g_eval(2.0) == 4.0);
  CHECK(g_eval(1.5) == 2.5);
  CHECK(g_eval(-3.0) == 0.0);
  CHECK(f_integral_eval(0.0) == 0.0);
  CHECK(f_integral_eval(-1.0) == 0.0);
  CHECK(std::abs(f_integral_eval(2.0) - 20.0 / 7.0) <= 1e-9);
  CHECK(std::abs(quadrature_f(2.0) - 20.0 / 7.0) <= 1e-9);
  bool clamped = false;
  try {
    g_eval(std::ldexp(1.0, kDyadicMax + 1));
  } catch (const Error& e) {
    clamped = e.kind() == ErrorKind::RangeClamped;
  }
  CHECK(clamped);
}

TEST_CASE("g is continuous and nondecreasing") {
  for (int i = kDyadicMin + 1; i <= 10; ++i) {
    const double p = std::ldexp(1.0, i);
    CHECK(g_eval(p) == std::ldexp(1.0, 2 * i));
    CHECK(std::abs(g_eval(std::nextafter(p, 0.0)) - g_eval(p)) <= 1e-12 * g_eval(p));
  }
  double prev = -1.0;
  for (int k = 0; k <= 4000; ++k) {
    const double x = -1.0 + 5.0 * k / 4000.0;
    CHECK(g_eval(x) >= prev);
    prev = g_eval(x);
  }
}

TEST_CASE("closed-form antiderivative matches quadrature") {
  RandomStream rng(8, 0);
  for (int k = 0; k < 100; ++k) {
    const double x = -1.0 + 5.0 * rng.uniform();
    CAPTURE(x);
    CHECK(std::abs(f_integral_eval(x) - quadrature_f(x)) <= 1e-9);
  }
  // Gradient consistency: central differences of f give g.
  for (double x : {0.3, 0.75, 1.2, 3.1}) {
    const double h = 1e-6;
    CHECK(std::abs((f_integral_eval(x + h) - f_integral_eval(x - h)) / (2 * h) - g_eval(x)) <= 1e-8);
  }
}

TEST_CASE("strict differentiability bound") {
  std::vector<double> grid;
  for (int k = 5; k <= 30; ++k)
    for (int m = 0; m < 8; ++m) grid.push_back(std::ldexp(1.0 + m / 8.0, -k));
  const BoundReport r = strict_diff_bound_check(grid);
  CHECK(r.holds());
  CHECK(r.max_quotient <= 1.0);
  CHECK(r.pairs > 1000);

  std::vector<double> mixed = grid;
  for (double x : {-1e-3, -1e-5, 0.0}) mixed.push_back(x);
  const BoundReport rm = strict_diff_bound_check(mixed);
  CHECK(rm.holds());
  CHECK(rm.max_nonpositive_diff == 0.0);

  for (int k = 1; k <= 20; ++k) {
    const BoundReport rk = strict_diff_bound_check({std::ldexp(1.0, -k), std::ldexp(1.0, -k - 1)});
    CHECK(rk.max_quotient <= 1.0);
  }
}

TEST_CASE("kink slopes") {
  const KinkSlopes s = kink_slopes(-3);
  CHECK(s.left == 3.0 / 16.0);
  CHECK(s.right == 3.0 / 8.0);
  for (int i = -20; i <= 5; ++i) {
    const KinkSlopes k = kink_slopes(i);
    CHECK(std::abs(k.right / k.left - 2.0) <= 1e-9);
    CHECK(std::abs(k.left - 3.0 * std::ldexp(1.0, i - 1)) <= 1e-9 * k.left);
  }
  bool clamped = false;
  try {
    kink_slopes(kDyadicMin - 5);
  } catch (const Error& e) {
    clamped = e.kind() == ErrorKind::RangeClamped;
  }
  CHECK(clamped);
}

TEST_CASE("probe separates 0 from the kinks 2^-k") {
  const FunctionPtr f = make_dyadic_antiderivative();
  const ProbeReport at0 = strict_ted_probe(*f, vec({0}), vec({0}));
  CHECK(at0.stable);
  for (int k = 1; k <= 10; ++k) {
    CAPTURE(k);
    const double x = std::ldexp(1.0, -k);
    const ProbeReport r = strict_ted_probe(*f, vec({x}), vec({g_eval(x)}));
    CHECK_FALSE(r.stable);
  }
}

TEST_CASE("abs cubic second subderivative") {
  CHECK(abs_cubic_d2(0.0, 5.0, vec({1, 2})) == 0.0);
  CHECK(abs_cubic_d2(1.0, 1.0, vec({1, 0})) == 6.0);
  CHECK(abs_cubic_d2(0.7, -0.3, vec({0, 0})) == 0.0);
  CHECK(abs_cubic_d2(-1.0, 1.0, vec({1, 0})) == 6.0);

  // Formula against the numeric oracle.
  const FunctionPtr f = make_abs_cubic();
  for (const Vector& x : {vec({1, 1}), vec({-0.5, 0.8}), vec({0, 0.7})}) {
    const Vector v = f->subdifferential(x).base;
    for (const Vector& w : {vec({1, 0}), vec({0.6, -0.8}), vec({0, 1})}) {
      const double num = second_subderivative_numeric(*f, x, v, w).value;
      CHECK(std::abs(num - abs_cubic_d2(x(0), x(1), w)) <= 1e-3 * (1.0 + std::abs(num)));
    }
  }

  const ContinuityReport c = abs_cubic_continuity({1e-1, 1e-2, 1e-3, 1e-4});
  for (std::size_t k = 1; k < c.max_discrepancy.size(); ++k) CHECK(c.max_discrepancy[k] < c.max_discrepancy[k - 1]);
  CHECK(c.rate == doctest::Approx(1.0).epsilon(0.05));
}
