#pragma once

#include "psmooth/function_model.hpp"
#include "psmooth/newton.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace psmooth {

/// 0 in psi(p, x) + df(x) with a finite-dimensional parameter p.
struct GEProblem {
  FunctionPtr fm;
  Index param_dim = 0;
  std::function<Vector(const Vector& p, const Vector& x)> psi;
  std::function<Matrix(const Vector& p, const Vector& x)> dpsi_dx;  // n x n
  std::function<Matrix(const Vector& p, const Vector& x)> dpsi_dp;  // n x param_dim
  std::string family;
};

/// psi(p, x) = x - p.
GEProblem tilt_ge(FunctionPtr fm);
/// psi(p, x) = A x - C p + b.
GEProblem linear_ge(FunctionPtr fm, Matrix a, Matrix c, Vector b);
/// psi(p, x) = x - p + kappa x_1^3 e_1.
GEProblem cubic_tilt_ge(FunctionPtr fm, double kappa);

inline constexpr double kGeNewtonTol = 1e-11;
inline constexpr double kGeSolutionTol = 1e-8;

struct GeOptions {
  NewtonOptions newton{kGeNewtonTol, 100};
  double solution_tol = kGeSolutionTol;  // inclusion residual accepted by the a-posteriori check
};

/// dist_inf(-psi(p, x), df(x)).
double ge_residual(const GEProblem& ge, const Vector& p, const Vector& x);

struct RegularityReport {
  bool regular = false;
  double min_singular_value = kInf;  // +inf when the tangent space is {0}
  Matrix reduced;                    // B = T'(grad_x psi + L'')T
  Matrix tangent;
};

RegularityReport check_regularity(const GEProblem& ge, const Vector& xbar, const Vector& pbar,
                                  const GeOptions& opt = {});

/// T B^-1 T' in ambient coordinates.
Matrix solution_jacobian(const GEProblem& ge, const Vector& x, const Vector& p, const GeOptions& opt = {});

/// Newton on the active manifold at x0 (or the given one), followed by the
/// check -psi(p, x) in ri df(x).
Vector solve_ge(const GEProblem& ge, const Vector& p, const Vector& x0, const GeOptions& opt = {},
                const std::optional<ActiveManifold>& manifold = std::nullopt);

/// -J D_p psi(pbar, xbar) q.
Vector semiderivative(const GEProblem& ge, const Vector& xbar, const Vector& pbar, const Vector& q,
                      const GeOptions& opt = {});

struct PathCheck {
  std::vector<double> steps;
  std::vector<double> discrepancies;  // |(s(pbar + t q) - xbar)/t - Ds(pbar)(q)|
  double max_discrepancy = 0.0;
  double loglog_slope = 0.0;          // least-squares slope of log disc vs log t; 0 if undefined
};

PathCheck solution_path_check(const GEProblem& ge, const Vector& xbar, const Vector& pbar, const Vector& q,
                              const std::vector<double>& steps, const GeOptions& opt = {}, int jobs = 1);

}  // namespace psmooth
