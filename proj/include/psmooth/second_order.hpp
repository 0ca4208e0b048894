#pragma once

#include "psmooth/function_model.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace psmooth {

inline constexpr double kTangentTol = 1e-8;
inline constexpr double kNumericCap = 1e12;
inline constexpr double kDomainThreshold = 1e6;

/// Multiplier and Hessian of the Lagrangian L = f_hat + <mu, phi> at (x, v).
struct LagrangianData {
  Vector x;
  Vector v;
  Vector mu;
  Matrix hessian;  // grad^2 f_hat(x) + sum_j mu_j grad^2 phi_j(x), ambient coordinates
  TangentBasis tangent;
  Matrix normal;   // orthonormal basis of N_M(x)
  ActiveManifold manifold;
};

LagrangianData lagrangian_at(const FunctionModel& fm, const Vector& x, const Vector& v);

/// (f(x + t w) - f(x) - t <v, w>) / (t^2 / 2); +inf when f(x + t w) = +inf.
double difference_quotient(const FunctionModel& fm, const Vector& x, const Vector& v, double t,
                           const Vector& w);

bool is_tangent(const Matrix& tangent_basis, const Vector& w, double tol = kTangentTol);

/// Closed form: L''(w, w) for tangent w, +inf otherwise. Requires v in ri df(x).
double second_subderivative(const FunctionModel& fm, const Vector& x, const Vector& v, const Vector& w);
double second_subderivative(const LagrangianData& lag, const Vector& w);

struct NumericD2Options {
  double t0 = 0.1;
  int levels = 20;           // t_j = t0 2^-j, j = 0..levels
  double ball_radius = 0.1;  // w' ranges over the ball of radius ball_radius 2^-j
  int ball_samples = 32;
  int refine_iters = 200;    // compass-search steps inside the ball
  double rounding_rel = 1e-5;  // a level is trusted while its rounding bound stays below this
  double oracle_tol = 1e-3;
  std::uint64_t seed = 0x5eedu;
};

struct NumericD2 {
  double value = 0.0;   // capped at kNumericCap
  bool infinite = false;
  int level = 0;        // finest trusted level, whose value is reported
  bool converged = false;
  std::vector<double> per_level;
};

/// Brute-force liminf: per level j, min of the difference quotient over
/// t = t_j and w' in the shrinking ball (samples plus compass refinement).
/// The estimate is the finest level whose floating-point rounding bound is
/// small relative to its value.
NumericD2 second_subderivative_numeric(const FunctionModel& fm, const Vector& x, const Vector& v,
                                       const Vector& w, const NumericD2Options& opt = {});

/// Affine set base + span(normal), or empty.
struct GraphicalDerivative {
  bool empty = false;
  Vector base;  // tangent representative P_T (L'' w)
  Matrix normal;
};

GraphicalDerivative graphical_derivative(const FunctionModel& fm, const Vector& x, const Vector& v,
                                         const Vector& w);

struct ProbeOptions {
  double neighborhood_radius = 1e-2;
  int radius_levels = 10;    // radii neighborhood_radius 2^-k, k = 0..radius_levels
  int num_pairs = 8;         // random pairs per radius in addition to the axis pairs
  std::vector<Vector> directions;  // default: +-e_i
  double probe_tol = 1e-4;
  double domain_threshold = kDomainThreshold;
  NumericD2Options oracle;
  std::uint64_t seed = 0x70726f62u;
};

struct ProbePair {
  Vector x;
  Vector v;
  double radius = 0.0;
  Vector direction;
  double value = 0.0;
  double reference = 0.0;
  bool domain_jump = false;
};

struct ProbeReport {
  bool stable = true;
  double worst_discrepancy = 0.0;  // at the finest radius
  bool domain_jump = false;
  std::optional<ProbePair> offending_pair;
  std::vector<double> worst_by_radius;
  int pairs_tested = 0;
};

/// Samples (x', v') in gph df near (x, v), evaluates the numeric second
/// subderivative over the direction grid, and compares with (x, v).
ProbeReport strict_ted_probe(const FunctionModel& fm, const Vector& x, const Vector& v,
                             const ProbeOptions& opt = {});

struct GrowthReport {
  bool holds = false;
  double min_eigenvalue = kInf;  // +inf when the tangent space is {0}
};

GrowthReport quadratic_growth_check(const FunctionModel& fm, const Vector& x);

/// Reduced Hessian T' H T over a tangent basis.
Matrix reduced_hessian(const LagrangianData& lag);

}  // namespace psmooth
