#include "psmooth/polyhedral.hpp"

#include "psmooth/linalg.hpp"
#include "psmooth/lp.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <functional>

namespace psmooth {

SubdifferentialRep SubdifferentialRep::singleton(const Vector& v) {
  SubdifferentialRep rep(v.size());
  rep.base = v;
  return rep;
}

SubdifferentialRep SubdifferentialRep::polytope(const Matrix& points) {
  SubdifferentialRep rep(points.rows());
  rep.add_block(points);
  return rep;
}

SubdifferentialRep SubdifferentialRep::empty_set(Index n) {
  SubdifferentialRep rep(n);
  rep.empty = true;
  return rep;
}

SubdifferentialRep& SubdifferentialRep::add_block(const Matrix& points) {
  require(points.rows() == dim() && points.cols() > 0, ErrorKind::DimensionMismatch,
          "block must be a nonempty n-row matrix");
  blocks.push_back(points);
  return *this;
}

SubdifferentialRep& SubdifferentialRep::add_segment(const Vector& a, const Vector& b) {
  Matrix pts(dim(), 2);
  pts << a, b;
  return add_block(pts);
}

SubdifferentialRep& SubdifferentialRep::add_ray(const Vector& r) {
  require(r.size() == dim(), ErrorKind::DimensionMismatch, "ray size");
  rays.conservativeResize(Eigen::NoChange, rays.cols() + 1);
  rays.col(rays.cols() - 1) = r;
  return *this;
}

SubdifferentialRep& SubdifferentialRep::add_lineality(const Vector& l) {
  require(l.size() == dim(), ErrorKind::DimensionMismatch, "lineality size");
  lineality.conservativeResize(Eigen::NoChange, lineality.cols() + 1);
  lineality.col(lineality.cols() - 1) = l;
  return *this;
}

Vector SubdifferentialRep::anchor() const {
  Vector a = base;
  for (const auto& b : blocks) a += b.col(0);
  return a;
}

void HPolyhedron::add_ineq(const Vector& row, double rhs) {
  g.conservativeResize(g.rows() + 1, Eigen::NoChange);
  g.row(g.rows() - 1) = row.transpose();
  h.conservativeResize(h.size() + 1);
  h(h.size() - 1) = rhs;
}

void HPolyhedron::add_eq(const Vector& row, double rhs) {
  e_mat.conservativeResize(e_mat.rows() + 1, Eigen::NoChange);
  e_mat.row(e_mat.rows() - 1) = row.transpose();
  e_rhs.conservativeResize(e_rhs.size() + 1);
  e_rhs(e_rhs.size() - 1) = rhs;
}

HPolyhedron intersect(const HPolyhedron& a, const HPolyhedron& b) {
  require(a.dim() == b.dim(), ErrorKind::DimensionMismatch, "intersect");
  HPolyhedron out(a.dim());
  out.g.resize(a.g.rows() + b.g.rows(), a.dim());
  out.g << a.g, b.g;
  out.h.resize(a.h.size() + b.h.size());
  out.h << a.h, b.h;
  out.e_mat.resize(a.e_mat.rows() + b.e_mat.rows(), a.dim());
  out.e_mat << a.e_mat, b.e_mat;
  out.e_rhs.resize(a.e_rhs.size() + b.e_rhs.size());
  out.e_rhs << a.e_rhs, b.e_rhs;
  return out;
}

namespace {

// Column layout of the generator matrix [P_0 | ... | P_k | R | L].
struct Generators {
  Matrix g;
  std::vector<std::pair<Index, Index>> block_ranges;  // (start, count)
  Index ray_start = 0;
  Index lin_start = 0;
  Index total = 0;
};

Generators generators(const SubdifferentialRep& rep) {
  Generators gen;
  Index cols = 0;
  for (const auto& b : rep.blocks) {
    gen.block_ranges.emplace_back(cols, b.cols());
    cols += b.cols();
  }
  gen.ray_start = cols;
  cols += rep.rays.cols();
  gen.lin_start = cols;
  cols += rep.lineality.cols();
  gen.total = cols;
  gen.g.resize(rep.dim(), cols);
  Index c = 0;
  for (const auto& b : rep.blocks) {
    gen.g.middleCols(c, b.cols()) = b;
    c += b.cols();
  }
  gen.g.middleCols(gen.ray_start, rep.rays.cols()) = rep.rays;
  gen.g.middleCols(gen.lin_start, rep.lineality.cols()) = rep.lineality;
  return gen;
}

// Adds generator columns (plus `extra` trailing variables) to an LP and the
// convexity equalities for each block.
LinearProgram generator_lp(const Generators& gen, Index extra) {
  LinearProgram lp(gen.total + extra);
  for (Index j = gen.lin_start; j < gen.total; ++j) lp.free[static_cast<std::size_t>(j)] = true;
  for (const auto& [start, count] : gen.block_ranges) {
    Vector row = Vector::Zero(lp.num_vars());
    row.segment(start, count).setOnes();
    lp.add_eq(row, 1.0);
  }
  return lp;
}

struct Decomposition {
  double distance = kInf;
  Vector coeffs;
};

Decomposition decompose_inf(const SubdifferentialRep& rep, const Generators& gen,
                            const Vector& v) {
  const Index n = rep.dim();
  LinearProgram lp = generator_lp(gen, 1);
  const Index s = gen.total;
  lp.cost(s) = 1.0;
  const Vector target = v - rep.base;
  for (Index i = 0; i < n; ++i) {
    Vector row = Vector::Zero(lp.num_vars());
    row.head(gen.total) = gen.g.row(i).transpose();
    row(s) = -1.0;
    lp.add_ub(row, target(i));
    row.head(gen.total) *= -1.0;
    lp.add_ub(row, -target(i));
  }
  const LpResult res = solve_lp(lp);
  Decomposition d;
  if (!res.optimal()) return d;
  d.coeffs = res.x.head(gen.total);
  d.distance = inf_norm(rep.base + gen.g * d.coeffs - v);
  return d;
}

void for_each_subset(Index m, Index k, const std::function<void(const std::vector<Index>&)>& fn) {
  if (k > m) return;
  std::vector<Index> idx(static_cast<std::size_t>(k));
  for (Index i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
  while (true) {
    fn(idx);
    Index i = k - 1;
    while (i >= 0 && idx[static_cast<std::size_t>(i)] == m - k + i) --i;
    if (i < 0) return;
    ++idx[static_cast<std::size_t>(i)];
    for (Index j = i + 1; j < k; ++j)
      idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
  }
}

Matrix select_rows(const Matrix& a, const std::vector<Index>& rows) {
  Matrix out(static_cast<Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = a.row(rows[i]);
  return out;
}

bool contains_column(const std::vector<Vector>& list, const Vector& x, double tol) {
  return std::any_of(list.begin(), list.end(), [&](const Vector& y) {
    return inf_norm(x - y) <= tol;
  });
}

Matrix columns(const std::vector<Vector>& list, Index n) {
  Matrix out(n, static_cast<Index>(list.size()));
  for (std::size_t i = 0; i < list.size(); ++i) out.col(static_cast<Index>(i)) = list[i];
  return out;
}

}  // namespace

Matrix parallel_basis(const SubdifferentialRep& rep) {
  const Index n = rep.dim();
  Index cols = rep.rays.cols() + rep.lineality.cols();
  for (const auto& b : rep.blocks) cols += b.cols() - 1;
  Matrix dirs(n, cols);
  Index c = 0;
  for (const auto& b : rep.blocks)
    for (Index j = 1; j < b.cols(); ++j) dirs.col(c++) = b.col(j) - b.col(0);
  dirs.middleCols(c, rep.rays.cols()) = rep.rays;
  c += rep.rays.cols();
  dirs.middleCols(c, rep.lineality.cols()) = rep.lineality;
  return range_basis(dirs);
}

Projection project_inf(const SubdifferentialRep& rep, const Vector& v) {
  require(!rep.empty, ErrorKind::EmptySet, "projection onto empty set");
  require(v.size() == rep.dim(), ErrorKind::DimensionMismatch, "project_inf");
  const Generators gen = generators(rep);
  const Decomposition d = decompose_inf(rep, gen, v);
  Projection p;
  if (d.coeffs.size() != gen.total) return p;
  p.distance = d.distance;
  p.point = rep.base + gen.g * d.coeffs;
  return p;
}

bool contains(const SubdifferentialRep& rep, const Vector& v, double tol) {
  if (rep.empty) return false;
  const Projection p = project_inf(rep, v);
  return p.distance <= tol * (1.0 + inf_norm(v));
}

RiTest relative_interior_test(const SubdifferentialRep& rep, const Vector& v) {
  require(!rep.empty, ErrorKind::EmptySet, "relative interior of empty set");
  RiTest out;
  if (!contains(rep, v)) return out;
  const Matrix par = parallel_basis(rep);
  if (par.cols() == 0) {
    out.inside = true;
    out.margin = kInf;
    return out;
  }
  constexpr double kCap = 1e12;
  const Generators gen = generators(rep);
  double margin = kInf;
  for (Index k = 0; k < par.cols() && margin > 0.0; ++k) {
    for (double sign : {1.0, -1.0}) {
      const Vector d = sign * par.col(k);
      LinearProgram lp = generator_lp(gen, 1);
      const Index tau = gen.total;
      lp.cost(tau) = -1.0;
      for (Index i = 0; i < rep.dim(); ++i) {
        Vector row = Vector::Zero(lp.num_vars());
        row.head(gen.total) = gen.g.row(i).transpose();
        row(tau) = -d(i);
        lp.add_eq(row, v(i) - rep.base(i));
      }
      Vector cap_row = Vector::Zero(lp.num_vars());
      cap_row(tau) = 1.0;
      lp.add_ub(cap_row, kCap);
      const LpResult res = solve_lp(lp);
      const double t = res.optimal() ? std::max(0.0, res.x(tau)) : 0.0;
      margin = std::min(margin, t >= kCap * (1.0 - 1e-9) ? kInf : t);
    }
  }
  out.margin = margin;
  out.inside = margin > kRiMarginTol;
  return out;
}

HPolyhedron normal_cone_halfspaces(const SubdifferentialRep& rep, const Vector& v) {
  require(!rep.empty, ErrorKind::EmptySet, "normal cone of empty set");
  const Index n = rep.dim();
  const Generators gen = generators(rep);
  const Decomposition d = decompose_inf(rep, gen, v);
  require(d.coeffs.size() == gen.total &&
              d.distance <= 1e-9 * (1.0 + inf_norm(v)),
          ErrorKind::NotASubgradient, "normal cone requested at a point outside the set");
  const double tiny = 1e-10 * (1.0 + inf_norm(gen.g));
  HPolyhedron cone(n);
  for (std::size_t s = 0; s < rep.blocks.size(); ++s) {
    const auto [start, count] = gen.block_ranges[s];
    const Vector u = rep.blocks[s] * d.coeffs.segment(start, count);
    for (Index j = 0; j < count; ++j) {
      const Vector diff = rep.blocks[s].col(j) - u;
      if (diff.norm() > tiny) cone.add_ineq(diff, 0.0);
    }
  }
  if (rep.rays.cols() > 0) {
    for (Index j = 0; j < rep.rays.cols(); ++j) cone.add_ineq(rep.rays.col(j), 0.0);
    const Vector c = rep.rays * d.coeffs.segment(gen.ray_start, rep.rays.cols());
    if (c.norm() > tiny) cone.add_eq(c, 0.0);
  }
  for (Index j = 0; j < rep.lineality.cols(); ++j) cone.add_eq(rep.lineality.col(j), 0.0);
  return cone;
}

SubdifferentialRep normal_cone(const SubdifferentialRep& rep, const Vector& v) {
  return vertex_form(normal_cone_halfspaces(rep, v));
}

SubdifferentialRep vertex_form(const HPolyhedron& poly, double tol) {
  const Index n = poly.dim();
  // Reduce the equalities: y = y0 + N z.
  Vector y0 = Vector::Zero(n);
  Matrix nb = Matrix::Identity(n, n);
  if (poly.e_mat.rows() > 0) {
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(poly.e_mat);
    y0 = cod.solve(poly.e_rhs);
    const double res = (poly.e_mat * y0 - poly.e_rhs).cwiseAbs().maxCoeff();
    if (res > tol * (1.0 + inf_norm(poly.e_rhs))) return SubdifferentialRep::empty_set(n);
    nb = null_space(poly.e_mat);
  }
  Matrix g1 = poly.g * nb;
  Vector h1 = poly.h - poly.g * y0;
  std::vector<Index> keep;
  for (Index i = 0; i < g1.rows(); ++i) {
    const double norm = g1.row(i).norm();
    if (norm <= tol) {
      if (h1(i) < -tol * (1.0 + std::abs(poly.h(i)))) return SubdifferentialRep::empty_set(n);
      continue;
    }
    g1.row(i) /= norm;
    h1(i) /= norm;
    keep.push_back(i);
  }
  g1 = select_rows(g1, keep);
  {
    Vector hk(static_cast<Index>(keep.size()));
    for (std::size_t i = 0; i < keep.size(); ++i) hk(static_cast<Index>(i)) = h1(keep[i]);
    h1 = hk;
  }
  const Index dz = nb.cols();
  const Matrix lin = g1.rows() > 0 ? null_space(g1) : Matrix::Identity(dz, dz);
  const Matrix q = lin.cols() > 0 ? null_space(lin.transpose()) : Matrix::Identity(dz, dz);
  const Index d = q.cols();
  const Matrix g2 = g1 * q;
  const Index m = g2.rows();
  const double scale = 1.0 + inf_norm(h1);

  std::vector<Vector> verts;
  if (d == 0) {
    if (m == 0 || h1.minCoeff() >= -tol * scale) verts.emplace_back(Vector(0));
  } else {
    for_each_subset(m, d, [&](const std::vector<Index>& s) {
      const Matrix a = select_rows(g2, s);
      Eigen::ColPivHouseholderQR<Matrix> qr(a);
      qr.setThreshold(1e-10);
      if (qr.rank() < d) return;
      Vector rhs(d);
      for (Index i = 0; i < d; ++i) rhs(i) = h1(s[static_cast<std::size_t>(i)]);
      const Vector u = qr.solve(rhs);
      if ((g2 * u - h1).maxCoeff() > tol * (scale + inf_norm(u))) return;
      if (!contains_column(verts, u, 1e-9 * (scale + inf_norm(u)))) verts.push_back(u);
    });
  }
  if (verts.empty()) return SubdifferentialRep::empty_set(n);

  std::vector<Vector> rays;
  auto try_ray = [&](Vector r) {
    r.normalize();
    for (double sign : {1.0, -1.0}) {
      const Vector rs = sign * r;
      if (m > 0 && (g2 * rs).maxCoeff() > tol) continue;
      if (!contains_column(rays, rs, 1e-9)) rays.push_back(rs);
    }
  };
  if (d == 1) {
    try_ray(Vector::Ones(1));
  } else if (d > 1) {
    for_each_subset(m, d - 1, [&](const std::vector<Index>& s) {
      const Matrix a = select_rows(g2, s);
      if (numerical_rank(a, 1e-10) < d - 1) return;
      const Matrix ker = null_space(a, 1e-10);
      if (ker.cols() != 1) return;
      try_ray(ker.col(0));
    });
  }

  const Matrix lift = nb * q;
  SubdifferentialRep rep(n);
  rep.base = y0;
  if (d > 0) {
    Matrix pts = lift * columns(verts, d);
    rep.add_block(pts);
    if (!rays.empty()) rep.rays = lift * columns(rays, d);
  }
  rep.lineality = nb * lin;
  return rep;
}

HPolyhedron halfspace_form(const SubdifferentialRep& rep, double tol) {
  require(!rep.empty, ErrorKind::EmptySet, "halfspace form of empty set");
  const Index n = rep.dim();
  // Expand the Minkowski sum of blocks into a single point list.
  std::vector<Vector> pts{rep.base};
  for (const auto& b : rep.blocks) {
    std::vector<Vector> next;
    for (const auto& p : pts)
      for (Index j = 0; j < b.cols(); ++j) {
        Vector x = p + b.col(j);
        if (!contains_column(next, x, 1e-12 * (1.0 + inf_norm(x)))) next.push_back(x);
      }
    require(next.size() <= 4096, ErrorKind::UnsupportedPoint, "Minkowski expansion too large");
    pts = std::move(next);
  }
  // Polar of the homogenized cone: {(g, gamma) : <g,p> + gamma <= 0, <g,r> <= 0, <g,l> = 0}.
  HPolyhedron polar(n + 1);
  for (const auto& p : pts) {
    Vector row(n + 1);
    row << p, 1.0;
    polar.add_ineq(row, 0.0);
  }
  for (Index j = 0; j < rep.rays.cols(); ++j) {
    Vector row(n + 1);
    row << rep.rays.col(j), 0.0;
    polar.add_ineq(row, 0.0);
  }
  for (Index j = 0; j < rep.lineality.cols(); ++j) {
    Vector row(n + 1);
    row << rep.lineality.col(j), 0.0;
    polar.add_eq(row, 0.0);
  }
  const SubdifferentialRep gens = vertex_form(polar, tol);
  HPolyhedron out(n);
  for (Index j = 0; j < gens.rays.cols(); ++j) {
    const Vector gk = gens.rays.col(j);
    if (gk.head(n).norm() <= tol) continue;
    out.add_ineq(gk.head(n), -gk(n));
  }
  for (Index j = 0; j < gens.lineality.cols(); ++j) {
    const Vector gk = gens.lineality.col(j);
    if (gk.head(n).norm() <= tol) continue;
    out.add_eq(gk.head(n), -gk(n));
  }
  return out;
}

}  // namespace psmooth
