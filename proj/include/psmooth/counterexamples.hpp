#pragma once

#include "psmooth/function_model.hpp"

#include <vector>

namespace psmooth {

/// Dyadic range of the piecewise-affine g. On (0, 2^kDyadicMin) the pieces
/// are replaced by the single segment g(x) = 2^kDyadicMin x, which keeps g
/// continuous; inputs at or above 2^(kDyadicMax + 1) raise RangeClamped.
inline constexpr int kDyadicMin = -40;
inline constexpr int kDyadicMax = 20;

/// g(x) = 0 for x <= 0 and 4^i + 3 2^i (x - 2^i) on [2^i, 2^(i+1)).
double g_eval(double x);
/// f(x) = integral of g from 0 to x, in closed form.
double f_integral_eval(double x);
/// Dyadic index i with x in [2^i, 2^(i+1)); requires x > 0.
int dyadic_index(double x);

struct BoundReport {
  double max_quotient = 0.0;  // max of slope / (3t) over pairs t > u with t > 0
  double min_slope = 0.0;     // min of (g(t) - g(u))/(t - u) over all pairs
  double max_nonpositive_diff = 0.0;  // max |g(t) - g(u)| over pairs u < t <= 0
  int pairs = 0;
  bool holds() const { return max_quotient <= 1.0 && min_slope >= 0.0 && max_nonpositive_diff == 0.0; }
};

/// Checks 0 <= (g(t) - g(u))/(t - u) <= 3t over all pairs t > u of the grid.
BoundReport strict_diff_bound_check(const std::vector<double>& grid);

struct KinkSlopes {
  double left = 0.0;
  double right = 0.0;
};

/// One-sided difference quotients of g at 2^i with step 2^(i-2).
KinkSlopes kink_slopes(int i);

/// The antiderivative f as a C1 convex function model (df(x) = {g(x)}).
FunctionPtr make_dyadic_antiderivative();

/// Second subderivative of |x1^3 x2^2| at (x1, x2) for its gradient.
double abs_cubic_d2(double x1, double x2, const Vector& w);

/// |x1^3 x2^2| as a C1 function model.
FunctionPtr make_abs_cubic();

struct ContinuityReport {
  std::vector<double> x1_values;
  std::vector<double> max_discrepancy;  // sup over the grid of |d2f(x1, x2)(w) - d2f(0, x2)(w)|
  double rate = 0.0;                    // log-log slope of max_discrepancy against |x1|
};

/// Uniform convergence of d2f(x1, .) to the zero form on |w| <= 1, |x2| <= 1.
ContinuityReport abs_cubic_continuity(const std::vector<double>& x1_values, int grid = 21);

}  // namespace psmooth
