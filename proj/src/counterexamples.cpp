#include "psmooth/counterexamples.hpp"

#include <cmath>
#include <numbers>

namespace psmooth {

int dyadic_index(double x) {
  require(x > 0.0, ErrorKind::UnsupportedPoint, "dyadic_index needs x > 0");
  int e = 0;
  std::frexp(x, &e);  // x = m 2^e with m in [1/2, 1)
  return e - 1;
}

namespace {

void check_upper(double x) {
  require(x < std::ldexp(1.0, kDyadicMax + 1), ErrorKind::RangeClamped, "x beyond the dyadic range");
}

// f(2^i) for i in [kDyadicMin, kDyadicMax + 1]: tail segment plus whole pieces.
double f_at_power(int i) {
  const double low = std::ldexp(1.0, 3 * kDyadicMin);  // 8^kDyadicMin
  return 0.5 * low + 5.0 / 14.0 * (std::ldexp(1.0, 3 * i) - low);
}

}  // namespace

double g_eval(double x) {
  if (x <= 0.0) return 0.0;
  check_upper(x);
  const int i = dyadic_index(x);
  if (i < kDyadicMin) return std::ldexp(x, kDyadicMin);
  const double p = std::ldexp(1.0, i);
  return p * p + 3.0 * p * (x - p);
}

double f_integral_eval(double x) {
  if (x <= 0.0) return 0.0;
  check_upper(x);
  const int i = dyadic_index(x);
  if (i < kDyadicMin) return 0.5 * std::ldexp(x * x, kDyadicMin);
  const double p = std::ldexp(1.0, i);
  const double d = x - p;
  return f_at_power(i) + p * p * d + 1.5 * p * d * d;
}

BoundReport strict_diff_bound_check(const std::vector<double>& grid) {
  BoundReport rep;
  rep.min_slope = kInf;
  for (double t : grid)
    for (double u : grid) {
      if (!(t > u)) continue;
      ++rep.pairs;
      const double diff = g_eval(t) - g_eval(u);
      const double slope = diff / (t - u);
      rep.min_slope = std::min(rep.min_slope, slope);
      if (t <= 0.0) {
        rep.max_nonpositive_diff = std::max(rep.max_nonpositive_diff, std::abs(diff));
      } else {
        rep.max_quotient = std::max(rep.max_quotient, slope / (3.0 * t));
      }
    }
  if (rep.pairs == 0) rep.min_slope = 0.0;
  return rep;
}

KinkSlopes kink_slopes(int i) {
  require(i > kDyadicMin && i <= kDyadicMax, ErrorKind::RangeClamped, "kink index outside the dyadic range");
  const double p = std::ldexp(1.0, i);
  const double h = std::ldexp(1.0, i - 2);
  return {(g_eval(p) - g_eval(p - h)) / h, (g_eval(p + h) - g_eval(p)) / h};
}

namespace {

class DyadicAntiderivative final : public FunctionModel {
 public:
  std::string kind() const override { return "dyadic_antiderivative"; }
  Index dim() const override { return 1; }
  double value(const Vector& x) const override { return f_integral_eval(x(0)); }
  SubdifferentialRep subdifferential(const Vector& x) const override {
    return SubdifferentialRep::singleton(Vector::Constant(1, g_eval(x(0))));
  }
  ActiveManifold active_manifold(const Vector& x) const override {
    // Open set R with the quadratic piece to the right of x as representative.
    ActiveManifold am;
    am.chart = ManifoldChart::whole_space(1);
    const double x0 = x(0);
    double slope = 0.0;
    double a = 0.0;
    double b = 0.0;
    if (x0 >= 0.0) {
      const int i = x0 > 0.0 ? dyadic_index(x0) : kDyadicMin - 1;
      if (i < kDyadicMin) {
        slope = std::ldexp(1.0, kDyadicMin);
      } else {
        const double p = std::ldexp(1.0, i);
        slope = 3.0 * p;
        a = p;
        b = p * p;
      }
    }
    const double fa = f_integral_eval(a);
    am.representative.value = [=](const Vector& y) { return fa + b * (y(0) - a) + 0.5 * slope * (y(0) - a) * (y(0) - a); };
    am.representative.gradient = [=](const Vector& y) { return Vector::Constant(1, b + slope * (y(0) - a)); };
    am.representative.hessian = [=](const Vector&) { return Matrix::Constant(1, 1, slope); };
    am.signature = "smooth";
    return am;
  }
  bool convex() const override { return true; }
};

class AbsCubic final : public FunctionModel {
 public:
  std::string kind() const override { return "abs_cubic"; }
  Index dim() const override { return 2; }
  double value(const Vector& x) const override { return std::abs(x(0) * x(0) * x(0) * x(1) * x(1)); }
  SubdifferentialRep subdifferential(const Vector& x) const override { return SubdifferentialRep::singleton(grad(x)); }
  ActiveManifold active_manifold(const Vector& x) const override {
    ActiveManifold am;
    am.chart = ManifoldChart::whole_space(2);
    const double s = x(0) > 0 ? 1.0 : (x(0) < 0 ? -1.0 : 0.0);
    am.representative.value = [s](const Vector& y) { return s * y(0) * y(0) * y(0) * y(1) * y(1); };
    am.representative.gradient = [s](const Vector& y) -> Vector {
      Vector g(2);
      g << s * 3.0 * y(0) * y(0) * y(1) * y(1), s * 2.0 * y(0) * y(0) * y(0) * y(1);
      return g;
    };
    am.representative.hessian = [s](const Vector& y) -> Matrix { return s * hess(y); };
    am.signature = s == 0.0 ? "axis" : "smooth";
    return am;
  }
  bool convex() const override { return false; }

 private:
  static Vector grad(const Vector& x) {
    const double s = x(0) > 0 ? 1.0 : (x(0) < 0 ? -1.0 : 0.0);
    Vector g(2);
    g << s * 3.0 * x(0) * x(0) * x(1) * x(1), s * 2.0 * x(0) * x(0) * x(0) * x(1);
    return g;
  }
  static Matrix hess(const Vector& x) {
    Matrix h(2, 2);
    h << 6.0 * x(0) * x(1) * x(1), 6.0 * x(0) * x(0) * x(1), 6.0 * x(0) * x(0) * x(1), 2.0 * x(0) * x(0) * x(0);
    return h;
  }
};

}  // namespace

FunctionPtr make_dyadic_antiderivative() { return std::make_shared<DyadicAntiderivative>(); }
FunctionPtr make_abs_cubic() { return std::make_shared<AbsCubic>(); }

double abs_cubic_d2(double x1, double x2, const Vector& w) {
  require(w.size() == 2, ErrorKind::DimensionMismatch, "abs_cubic_d2 direction size");
  if (x1 == 0.0) return 0.0;
  const double s = x1 > 0 ? 1.0 : -1.0;
  const double h11 = 6.0 * x1 * x2 * x2;
  const double h12 = 6.0 * x1 * x1 * x2;
  const double h22 = 2.0 * x1 * x1 * x1;
  return s * (h11 * w(0) * w(0) + 2.0 * h12 * w(0) * w(1) + h22 * w(1) * w(1));
}

ContinuityReport abs_cubic_continuity(const std::vector<double>& x1_values, int grid) {
  ContinuityReport rep;
  rep.x1_values = x1_values;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  for (double x1 : x1_values) {
    double worst = 0.0;
    for (int a = 0; a < grid; ++a)
      for (int b = 0; b < grid; ++b) {
        const double theta = 2.0 * std::numbers::pi * a / grid;
        const double rad = static_cast<double>(b) / (grid - 1);
        Vector w(2);
        w << rad * std::cos(theta), rad * std::sin(theta);
        for (int c = 0; c < grid; ++c) {
          const double x2 = -1.0 + 2.0 * c / (grid - 1);
          worst = std::max(worst, std::abs(abs_cubic_d2(x1, x2, w) - abs_cubic_d2(0.0, x2, w)));
        }
      }
    rep.max_discrepancy.push_back(worst);
    if (worst > 0.0 && x1 != 0.0) {
      const double lx = std::log(std::abs(x1));
      const double ly = std::log(worst);
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
      ++cnt;
    }
  }
  if (cnt >= 2) rep.rate = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
  return rep;
}

}  // namespace psmooth
