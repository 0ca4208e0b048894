#include "psmooth/cplq.hpp"

#include "psmooth/linalg.hpp"
#include "psmooth/lp.hpp"
#include "psmooth/rng.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace psmooth {

namespace {

CplqFunction normalized(const CplqFunction& f) {
  CplqFunction g = f;
  for (auto& p : g.pieces) {
    require(p.a.rows() == g.dim && p.a.cols() == g.dim && p.lin.size() == g.dim,
            ErrorKind::DimensionMismatch, "cplq piece sizes");
    p.a = symmetrized(p.a);
    for (auto& h : p.cell) {
      require(h.normal.size() == g.dim, ErrorKind::DimensionMismatch, "halfspace size");
      const double nrm = h.normal.norm();
      require(nrm > 0.0, ErrorKind::ConfigInvalid, "halfspace normal must be nonzero");
      h.normal /= nrm;
      h.offset /= nrm;
    }
  }
  return g;
}

bool on_boundary(const HalfSpace& h, const Vector& x, double tol) {
  return std::abs(h.normal.dot(x) - h.offset) <= tol * (1.0 + std::abs(h.offset));
}

Matrix stack_columns(const std::vector<Vector>& cols, Index n) {
  Matrix out(n, static_cast<Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Index>(k)) = cols[k];
  return out;
}

}  // namespace

bool CplqFunction::in_cell(std::size_t i, const Vector& x, double tol) const {
  for (const auto& h : pieces[i].cell)
    if (h.normal.dot(x) > h.offset + tol * (1.0 + std::abs(h.offset))) return false;
  return true;
}

double CplqFunction::value(const Vector& x) const {
  for (std::size_t i = 0; i < pieces.size(); ++i)
    if (in_cell(i, x, 1e-13)) return pieces[i].value(x);
  return kInf;
}

std::vector<std::size_t> CplqFunction::active_pieces(const Vector& x, double tol) const {
  std::vector<std::size_t> act;
  for (std::size_t i = 0; i < pieces.size(); ++i)
    if (in_cell(i, x, tol)) act.push_back(i);
  return act;
}

Matrix CplqFunction::active_normals(std::size_t i, const Vector& x, double tol) const {
  std::vector<Vector> cols;
  for (const auto& h : pieces[i].cell)
    if (on_boundary(h, x, tol)) cols.push_back(h.normal / h.normal.norm());
  return stack_columns(cols, dim);
}

Matrix CplqFunction::boundary_normals(const Vector& x, double tol) const {
  std::vector<Vector> cols;
  for (const auto& p : pieces)
    for (const auto& h : p.cell)
      if (on_boundary(h, x, tol)) cols.push_back(h.normal / h.normal.norm());
  return stack_columns(cols, dim);
}

CplqReport cplq_check(const CplqFunction& input, const Vector& x) {
  const CplqFunction f = normalized(input);
  require(x.size() == f.dim, ErrorKind::DimensionMismatch, "cplq_check point size");
  CplqReport rep;
  rep.active = f.active_pieces(x);
  require(!rep.active.empty(), ErrorKind::PointOutsideDomain, "x is not in any cell");
  const Index n = f.dim;
  rep.normal_space = range_basis(f.boundary_normals(x));

  std::vector<Matrix> normals;
  bool all_cond1 = true;
  for (std::size_t i : rep.active) {
    normals.push_back(f.active_normals(i, x));
    const bool ok = same_subspace(range_basis(normals.back()), rep.normal_space);
    rep.cond1_per_piece.push_back(ok);
    all_cond1 = all_cond1 && ok;
  }

  // max t  s.t.  v = A_i x + a_i + sum_k mu_ik b_ik,  mu_ik >= t,  t <= 1.
  Index num_mu = 0;
  for (const auto& b : normals) num_mu += b.cols();
  const Index tvar = n + num_mu;
  LinearProgram lp(n + num_mu + 1);
  for (Index j = 0; j < n; ++j) lp.free[static_cast<std::size_t>(j)] = true;
  lp.cost(tvar) = -1.0;
  Index offset = n;
  for (std::size_t k = 0; k < rep.active.size(); ++k) {
    const Vector c = f.pieces[rep.active[k]].gradient(x);
    const Matrix& b = normals[k];
    for (Index row = 0; row < n; ++row) {
      Vector coeffs = Vector::Zero(lp.num_vars());
      coeffs(row) = 1.0;
      coeffs.segment(offset, b.cols()) = -b.row(row).transpose();
      lp.add_eq(coeffs, c(row));
    }
    for (Index j = 0; j < b.cols(); ++j) {
      Vector coeffs = Vector::Zero(lp.num_vars());
      coeffs(tvar) = 1.0;
      coeffs(offset + j) = -1.0;
      lp.add_ub(coeffs, 0.0);
    }
    offset += b.cols();
  }
  Vector cap = Vector::Zero(lp.num_vars());
  cap(tvar) = 1.0;
  lp.add_ub(cap, 1.0);
  const LpResult res = solve_lp(lp);
  if (res.optimal()) {
    rep.cond2_margin = res.x(tvar);
    if (rep.cond2_margin > kRiMarginTol) rep.cond2_witness = res.x.head(n);
  }
  rep.partly_smooth = all_cond1 && rep.cond2_witness.has_value();
  return rep;
}

SubdifferentialRep cplq_subdifferential(const CplqFunction& input, const Vector& x) {
  const CplqFunction f = normalized(input);
  const std::vector<std::size_t> act = f.active_pieces(x);
  require(!act.empty(), ErrorKind::PointOutsideDomain, "x is not in any cell");
  auto piece_set = [&](std::size_t i) {
    SubdifferentialRep rep(f.dim);
    rep.base = f.pieces[i].gradient(x);
    rep.rays = f.active_normals(i, x);
    return rep;
  };
  if (act.size() == 1) return piece_set(act.front());
  HPolyhedron h = halfspace_form(piece_set(act.front()));
  for (std::size_t k = 1; k < act.size(); ++k) h = intersect(h, halfspace_form(piece_set(act[k])));
  return vertex_form(h);
}

CplqSpotCheck spot_check_cplq(const CplqFunction& input, std::uint64_t seed, int samples, double box) {
  const CplqFunction f = normalized(input);
  CplqSpotCheck out;
  RandomStream rng(seed, 0, 0x63706c71u);
  for (int s = 0; s < samples; ++s) {
    rng.seek(static_cast<std::uint32_t>(s));
    const Vector x = rng.uniform_vector(f.dim, -box, box);
    const Vector y = rng.uniform_vector(f.dim, -box, box);
    const std::vector<std::size_t> act = f.active_pieces(x, 1e-12);
    for (std::size_t k = 1; k < act.size(); ++k) {
      const double gap = std::abs(f.pieces[act[k]].value(x) - f.pieces[act[0]].value(x));
      out.worst_overlap_gap = std::max(out.worst_overlap_gap, gap);
    }
    const double fx = f.value(x);
    const double fy = f.value(y);
    if (std::isfinite(fx) && std::isfinite(fy)) {
      const double fm = f.value(0.5 * (x + y));
      const double viol = fm - 0.5 * (fx + fy);
      out.worst_midpoint_violation = std::max(out.worst_midpoint_violation, viol);
    }
  }
  out.well_defined = out.worst_overlap_gap <= 1e-9;
  out.midpoint_convex = out.worst_midpoint_violation <= 1e-9;
  return out;
}

namespace {

class CplqModel final : public FunctionModel {
 public:
  explicit CplqModel(CplqFunction f) : f_(normalized(f)) {}

  std::string kind() const override { return "cplq"; }
  Index dim() const override { return f_.dim; }
  double value(const Vector& x) const override { return f_.value(x); }
  SubdifferentialRep subdifferential(const Vector& x) const override {
    return cplq_subdifferential(f_, x);
  }

  ActiveManifold active_manifold(const Vector& x) const override {
    const std::vector<std::size_t> act = f_.active_pieces(x);
    require(!act.empty(), ErrorKind::PointOutsideDomain, "x is not in any cell");
    const Matrix u = range_basis(f_.boundary_normals(x));
    ActiveManifold am;
    am.chart = ManifoldChart::affine_subspace(u.transpose(), u.transpose() * x);
    am.chart.center = x;
    double radius = kInf;
    std::ostringstream sig;
    sig << "cplq:";
    for (std::size_t i = 0; i < f_.pieces.size(); ++i)
      for (std::size_t k = 0; k < f_.pieces[i].cell.size(); ++k) {
        const HalfSpace& h = f_.pieces[i].cell[k];
        if (on_boundary(h, x, kCplqTol))
          sig << i << "." << k << ";";
        else
          radius = std::min(radius, std::abs(h.normal.dot(x) - h.offset));
      }
    am.chart.validity_radius = radius;
    am.representative = representative_of(act.front());
    am.signature = sig.str();
    return am;
  }

  std::vector<ManifoldCandidate> prox_candidates(double /*r*/, const Vector& z) const override {
    std::vector<ManifoldCandidate> out;
    const Index n = f_.dim;
    for (std::size_t i = 0; i < f_.pieces.size(); ++i) {
      const auto& cell = f_.pieces[i].cell;
      const Index h = static_cast<Index>(cell.size());
      for (Index size = 0; size <= std::min(h, n); ++size) {
        std::vector<bool> pick(static_cast<std::size_t>(h), false);
        std::fill(pick.begin(), pick.begin() + size, true);
        do {
          Matrix rows(size, n);
          Vector rhs(size);
          Index k = 0;
          for (Index j = 0; j < h; ++j)
            if (pick[static_cast<std::size_t>(j)]) {
              rows.row(k) = cell[static_cast<std::size_t>(j)].normal.transpose();
              rhs(k++) = cell[static_cast<std::size_t>(j)].offset;
            }
          ManifoldCandidate cand;
          if (size > 0) {
            Eigen::CompleteOrthogonalDecomposition<Matrix> cod(rows);
            const Vector y = cod.solve(rhs);
            if ((rows * y - rhs).norm() > 1e-9 * (1.0 + rhs.norm())) continue;
            const Matrix u = range_basis(rows.transpose());
            cand.manifold.chart = ManifoldChart::affine_subspace(u.transpose(), u.transpose() * y);
          } else {
            cand.manifold.chart = ManifoldChart::whole_space(n);
          }
          cand.manifold.representative = representative_of(i);
          cand.manifold.signature = "candidate";
          cand.start = z;
          out.push_back(std::move(cand));
        } while (std::prev_permutation(pick.begin(), pick.end()));
      }
    }
    return out;
  }

  bool convex() const override { return true; }

 private:
  SmoothFunction representative_of(std::size_t i) const {
    const CplqPiece p = f_.pieces[i];
    SmoothFunction s;
    s.value = [p](const Vector& y) { return p.value(y); };
    s.gradient = [p](const Vector& y) -> Vector { return p.gradient(y); };
    s.hessian = [p](const Vector&) { return p.a; };
    return s;
  }

  CplqFunction f_;
};

CplqPiece piece_1d(double normal, double a, double lin) {
  CplqPiece p;
  p.cell.push_back(HalfSpace{Vector::Constant(1, normal), 0.0});
  p.a = Matrix::Constant(1, 1, a);
  p.lin = Vector::Constant(1, lin);
  return p;
}

}  // namespace

FunctionPtr make_cplq(CplqFunction f) { return std::make_shared<CplqModel>(std::move(f)); }

CplqFunction cplq_abs() {
  CplqFunction f;
  f.dim = 1;
  f.pieces = {piece_1d(-1.0, 0.0, 1.0), piece_1d(1.0, 0.0, -1.0)};
  return f;
}

CplqFunction cplq_half_max_squared() {
  CplqFunction f;
  f.dim = 1;
  f.pieces = {piece_1d(1.0, 0.0, 0.0), piece_1d(-1.0, 1.0, 0.0)};
  return f;
}

CplqFunction cplq_nonneg_indicator() {
  CplqFunction f;
  f.dim = 1;
  f.pieces = {piece_1d(-1.0, 0.0, 0.0)};
  return f;
}

CplqInstance random_cplq_instance(RandomStream& rng, int trial) {
  CplqInstance inst;
  const Index n = 1 + trial % 3;
  inst.f.dim = n;
  if (trial % 5 == 4) {
    // max_j <g_j, x> over p linear forms, queried at the origin or on a face.
    const Index p = 2 + (trial / 5) % 3;
    std::vector<Vector> g;
    for (Index j = 0; j < p; ++j) g.push_back(rng.normal_vector(n));
    for (Index j = 0; j < p; ++j) {
      CplqPiece piece;
      for (Index k = 0; k < p; ++k)
        if (k != j) piece.cell.push_back({g[static_cast<std::size_t>(k)] - g[static_cast<std::size_t>(j)], 0.0});
      piece.a = Matrix::Zero(n, n);
      piece.lin = g[static_cast<std::size_t>(j)];
      inst.f.pieces.push_back(piece);
    }
    inst.x = (trial / 5) % 2 == 0 ? Vector(Vector::Zero(n)) : Vector(0.3 * rng.normal_vector(n));
    return inst;
  }
  const Index levels = 1 + (trial / 3) % 3;
  std::vector<Vector> a;
  std::vector<double> beta;
  std::vector<int> kind;
  for (Index l = 0; l < levels; ++l) {
    a.push_back(rng.normal_vector(n));
    beta.push_back(0.5 * rng.normal());
    kind.push_back(static_cast<int>(rng() % 3));
  }
  for (Index mask = 0; mask < (Index(1) << levels); ++mask) {
    CplqPiece piece;
    piece.a = Matrix::Zero(n, n);
    piece.lin = Vector::Zero(n);
    for (Index l = 0; l < levels; ++l) {
      const double s = (mask >> l) & 1 ? 1.0 : -1.0;
      const Vector& al = a[static_cast<std::size_t>(l)];
      const double bl = beta[static_cast<std::size_t>(l)];
      piece.cell.push_back({-s * al, -s * bl});
      switch (kind[static_cast<std::size_t>(l)]) {
        case 0:  // |u|
          piece.lin += s * al;
          piece.alpha -= s * bl;
          break;
        case 1:  // max(u,0)^2 / 2
          if (s > 0) {
            piece.a += al * al.transpose();
            piece.lin -= bl * al;
            piece.alpha += 0.5 * bl * bl;
          }
          break;
        default:  // max(u,0)
          if (s > 0) {
            piece.lin += al;
            piece.alpha -= bl;
          }
      }
    }
    inst.f.pieces.push_back(piece);
  }
  // Place x on a random subset of at most min(n, 2) kinks.
  Vector x = rng.normal_vector(n);
  const Index on = static_cast<Index>(rng() % static_cast<std::uint32_t>(std::min<Index>(std::min<Index>(n, 2), levels) + 1));
  if (on > 0) {
    Matrix rows(on, n);
    Vector rhs(on);
    for (Index k = 0; k < on; ++k) {
      rows.row(k) = a[static_cast<std::size_t>(k)].transpose();
      rhs(k) = beta[static_cast<std::size_t>(k)];
    }
    x += rows.transpose() * (rows * rows.transpose()).ldlt().solve(rhs - rows * x);
  }
  inst.x = x;
  return inst;
}


}  // namespace psmooth
