#pragma once

#include "psmooth/core.hpp"

#include <vector>

namespace psmooth {

/// Polyhedral convex set in generator form
///
///   base + conv(blocks[0]) + ... + conv(blocks[k-1]) + cone(rays) + span(lineality)
///
/// Each block is an n-by-p matrix whose columns are points; blocks are
/// Minkowski-summed, which keeps boxes (sums of segments) linear in size.
/// An empty set is flagged explicitly; every other query assumes nonempty.
struct SubdifferentialRep {
  Vector base;
  std::vector<Matrix> blocks;
  Matrix rays;
  Matrix lineality;
  bool empty = false;

  SubdifferentialRep() = default;
  explicit SubdifferentialRep(Index n)
      : base(Vector::Zero(n)), rays(n, 0), lineality(n, 0) {}

  Index dim() const { return base.size(); }

  static SubdifferentialRep singleton(const Vector& v);
  static SubdifferentialRep polytope(const Matrix& points);
  static SubdifferentialRep empty_set(Index n);

  SubdifferentialRep& add_block(const Matrix& points);
  SubdifferentialRep& add_segment(const Vector& a, const Vector& b);
  SubdifferentialRep& add_ray(const Vector& r);
  SubdifferentialRep& add_lineality(const Vector& l);

  /// A point of the set (base plus the first point of every block).
  Vector anchor() const;
};

/// Polyhedron { y : G y <= h, E y = e }.
struct HPolyhedron {
  Matrix g;
  Vector h;
  Matrix e_mat;
  Vector e_rhs;

  explicit HPolyhedron(Index n = 0) : g(0, n), h(0), e_mat(0, n), e_rhs(0) {}
  Index dim() const { return g.cols(); }
  void add_ineq(const Vector& row, double rhs);
  void add_eq(const Vector& row, double rhs);
};

/// Orthonormal basis of par(C), the subspace parallel to aff(C).
Matrix parallel_basis(const SubdifferentialRep& rep);

struct Projection {
  double distance = kInf;  // infinity-norm distance from the query to the set
  Vector point;            // a nearest point in the infinity norm
};

/// infinity-norm projection computed by LP.
Projection project_inf(const SubdifferentialRep& rep, const Vector& v);

bool contains(const SubdifferentialRep& rep, const Vector& v, double tol = 1e-9);

inline constexpr double kRiMarginTol = 1e-9;

struct RiTest {
  bool inside = false;
  double margin = 0.0;  // +inf when the set is a single point
};

/// v in ri(rep)? margin = min over +-d (d in an orthonormal basis of par)
/// of the largest step t with v + t d still in the set.
RiTest relative_interior_test(const SubdifferentialRep& rep, const Vector& v);

/// Normal cone N_C(v) in halfspace form; requires v in C.
HPolyhedron normal_cone_halfspaces(const SubdifferentialRep& rep, const Vector& v);

/// Normal cone N_C(v) in generator form.
SubdifferentialRep normal_cone(const SubdifferentialRep& rep, const Vector& v);

/// Halfspace-to-generator conversion by enumeration of active sets; meant for
/// ambient dimension <= ~6 and a few dozen constraints.
SubdifferentialRep vertex_form(const HPolyhedron& poly, double tol = 1e-9);

/// Halfspace form of a single-block polyhedron (blocks are merged by
/// expanding Minkowski sums, so keep the inputs small).
HPolyhedron halfspace_form(const SubdifferentialRep& rep, double tol = 1e-9);

/// Intersection of halfspace forms.
HPolyhedron intersect(const HPolyhedron& a, const HPolyhedron& b);

}  // namespace psmooth
