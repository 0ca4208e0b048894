#pragma once

#include "psmooth/function_model.hpp"

namespace psmooth {

/// Coordinates with |x_i| <= kZeroTol count as zero; pieces within
/// kActiveTol * (1 + |f|) of the max count as active.
inline constexpr double kZeroTol = 1e-9;
inline constexpr double kActiveTol = 1e-9;

/// q(x) = 1/2 x'Qx + c'x + d
struct QuadraticPiece {
  Matrix q;
  Vector c;
  double d = 0.0;

  double value(const Vector& x) const { return 0.5 * x.dot(q * x) + c.dot(x) + d; }
  Vector gradient(const Vector& x) const { return q * x + c; }
};

/// sum_i w_i |x_i| with w_i >= 0.
FunctionPtr make_l1(const Vector& weights);
FunctionPtr make_l1(Index n, double lambda);

/// sum_i w_i |x_i| + 1/2 x'Ax + b'x. Covers |x| + x^2/2 and |x1| - x2^2.
FunctionPtr make_l1_quadratic(const Vector& weights, const Matrix& a, const Vector& b);

/// 1/2 x'Ax + b'x.
FunctionPtr make_quadratic(const Matrix& a, const Vector& b);

/// max_j q_j(x).
FunctionPtr make_max_quadratics(std::vector<QuadraticPiece> pieces);

}  // namespace psmooth
