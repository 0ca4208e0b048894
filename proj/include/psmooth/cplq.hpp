#pragma once

#include "psmooth/function_model.hpp"
#include "psmooth/rng.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace psmooth {

/// { y : <normal, y> <= offset }
struct HalfSpace {
  Vector normal;
  double offset = 0.0;
};

/// Quadratic 1/2 x'Ax + a'x + alpha on the polyhedron `cell`.
struct CplqPiece {
  std::vector<HalfSpace> cell;
  Matrix a;
  Vector lin;
  double alpha = 0.0;

  double value(const Vector& x) const { return 0.5 * x.dot(a * x) + lin.dot(x) + alpha; }
  Vector gradient(const Vector& x) const { return a * x + lin; }
};

inline constexpr double kCplqTol = 1e-9;

/// Convex piecewise linear-quadratic function; +inf off the union of cells.
struct CplqFunction {
  Index dim = 0;
  std::vector<CplqPiece> pieces;

  double value(const Vector& x) const;
  bool in_cell(std::size_t i, const Vector& x, double tol = kCplqTol) const;
  std::vector<std::size_t> active_pieces(const Vector& x, double tol = kCplqTol) const;
  /// Unit normals of the halfspaces of piece i whose boundary contains x.
  Matrix active_normals(std::size_t i, const Vector& x, double tol = kCplqTol) const;
  /// Unit normals b_H of every halfspace (from any piece) whose boundary contains x.
  Matrix boundary_normals(const Vector& x, double tol = kCplqTol) const;
};

struct CplqReport {
  bool partly_smooth = false;
  std::vector<std::size_t> active;
  std::vector<bool> cond1_per_piece;
  std::optional<Vector> cond2_witness;
  double cond2_margin = 0.0;
  Matrix normal_space;  // orthonormal basis of N_M(x)
};

CplqReport cplq_check(const CplqFunction& f, const Vector& x);

/// Subdifferential as the intersection over active pieces of A_i x + a_i + N_{C_i}(x).
SubdifferentialRep cplq_subdifferential(const CplqFunction& f, const Vector& x);

/// Spot checks of the piece data: formulas agree on overlaps and the
/// midpoint inequality holds, at `samples` points drawn from [-box, box]^n.
struct CplqSpotCheck {
  bool well_defined = true;
  bool midpoint_convex = true;
  double worst_overlap_gap = 0.0;
  double worst_midpoint_violation = 0.0;
};
CplqSpotCheck spot_check_cplq(const CplqFunction& f, std::uint64_t seed, int samples, double box);

FunctionPtr make_cplq(CplqFunction f);

/// 1D building blocks used by examples and tests.
CplqFunction cplq_abs();                 // |x|
CplqFunction cplq_half_max_squared();    // max(x, 0)^2 / 2
CplqFunction cplq_nonneg_indicator();    // indicator of [0, inf)

struct CplqInstance {
  CplqFunction f;
  Vector x;
};

/// Random CPLQ instance: sum of L one-dimensional kinks composed with
/// affine maps (|u|, max(u,0)^2/2, max(u,0)), or a max of linear forms.
/// Returns the function and a point placed on some of the kinks. Dimension is 1 + trial % 3.
CplqInstance random_cplq_instance(RandomStream& rng, int trial);

}  // namespace psmooth
