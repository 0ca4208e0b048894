#include "psmooth/catalog.hpp"

#include "psmooth/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

namespace psmooth {

namespace {

double min_eigenvalue(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double max_eigenvalue(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

std::string index_list(const std::string& tag, const std::vector<Index>& idx) {
  std::ostringstream os;
  os << tag << ":{";
  for (std::size_t i = 0; i < idx.size(); ++i) os << (i ? "," : "") << idx[i];
  os << "}";
  return os.str();
}

class L1QuadraticModel final : public FunctionModel {
 public:
  L1QuadraticModel(std::string kind, Vector w, Matrix a, Vector b)
      : kind_(std::move(kind)), w_(std::move(w)), a_(symmetrized(a)), b_(std::move(b)) {
    require(a_.rows() == w_.size() && a_.cols() == w_.size() && b_.size() == w_.size(),
            ErrorKind::DimensionMismatch, "l1_quadratic parameter sizes");
    require((w_.array() >= 0.0).all(), ErrorKind::ConfigInvalid, "l1 weights must be nonnegative");
    lambda_min_ = min_eigenvalue(a_);
    diagonal_ = (a_ - Matrix(a_.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0;
  }

  std::string kind() const override { return kind_; }
  Index dim() const override { return w_.size(); }

  double value(const Vector& x) const override {
    return w_.dot(x.cwiseAbs()) + 0.5 * x.dot(a_ * x) + b_.dot(x);
  }

  SubdifferentialRep subdifferential(const Vector& x) const override {
    const Index n = dim();
    SubdifferentialRep rep(n);
    rep.base = a_ * x + b_;
    for (Index i = 0; i < n; ++i) {
      if (w_(i) == 0.0) continue;
      if (std::abs(x(i)) > kZeroTol) {
        rep.base(i) += w_(i) * sign_of(x(i));
      } else {
        rep.add_segment(-w_(i) * Vector::Unit(n, i), w_(i) * Vector::Unit(n, i));
      }
    }
    return rep;
  }

  ActiveManifold active_manifold(const Vector& x) const override {
    const Index n = dim();
    std::vector<Index> zeros;
    double radius = kInf;
    Vector s = Vector::Zero(n);
    for (Index i = 0; i < n; ++i) {
      if (w_(i) == 0.0) continue;
      if (std::abs(x(i)) <= kZeroTol) {
        zeros.push_back(i);
      } else {
        s(i) = sign_of(x(i));
        radius = std::min(radius, std::abs(x(i)));
      }
    }
    Matrix sel = Matrix::Zero(static_cast<Index>(zeros.size()), n);
    for (std::size_t k = 0; k < zeros.size(); ++k) sel(static_cast<Index>(k), zeros[k]) = 1.0;
    ActiveManifold am;
    am.chart = ManifoldChart::affine_subspace(sel, Vector::Zero(sel.rows()));
    am.chart.center = x;
    am.chart.validity_radius = radius;
    const Vector lin = w_.cwiseProduct(s) + b_;
    const Matrix a = a_;
    am.representative.value = [lin, a](const Vector& y) { return lin.dot(y) + 0.5 * y.dot(a * y); };
    am.representative.gradient = [lin, a](const Vector& y) -> Vector { return lin + a * y; };
    am.representative.hessian = [a](const Vector&) { return a; };
    am.signature = index_list("zero", zeros);
    return am;
  }

  std::optional<Vector> prox_closed_form(double r, const Vector& z) const override {
    if (!diagonal_) return std::nullopt;
    Vector x(dim());
    for (Index i = 0; i < dim(); ++i) {
      const double denom = 1.0 + r * a_(i, i);
      require(denom > 0.0, ErrorKind::SingularReducedMap, "prox parameter too large for the quadratic part");
      const double u = z(i) - r * b_(i);
      const double t = r * w_(i);
      x(i) = sign_of(u) * std::max(std::abs(u) - t, 0.0) / denom;
    }
    return x;
  }

  std::vector<ManifoldCandidate> prox_candidates(double r, const Vector& z) const override {
    // Proximal gradient on the strongly convex model 1/2 x'(A + I/r)x + (b - z/r)'x + w|x|.
    const Index n = dim();
    const Matrix h = a_ + Matrix::Identity(n, n) / r;
    const double lip = max_eigenvalue(h);
    require(min_eigenvalue(h) > 0.0, ErrorKind::SingularReducedMap, "prox subproblem is not strongly convex");
    const Vector c = b_ - z / r;
    const double step = 1.0 / lip;
    Vector x = z;
    for (int it = 0; it < 20000; ++it) {
      const Vector u = x - step * (h * x + c);
      Vector next(n);
      for (Index i = 0; i < n; ++i)
        next(i) = sign_of(u(i)) * std::max(std::abs(u(i)) - step * w_(i), 0.0);
      const double change = (next - x).cwiseAbs().maxCoeff();
      x = next;
      if (change <= 1e-15 * (1.0 + x.cwiseAbs().maxCoeff())) break;
    }
    return {ManifoldCandidate{active_manifold(x), x}};
  }

  double prox_regularity_modulus() const override { return std::max(0.0, -lambda_min_); }
  bool convex() const override { return lambda_min_ >= -1e-12; }

 private:
  std::string kind_;
  Vector w_;
  Matrix a_;
  Vector b_;
  double lambda_min_ = 0.0;
  bool diagonal_ = false;
};

class MaxQuadraticsModel final : public FunctionModel {
 public:
  explicit MaxQuadraticsModel(std::vector<QuadraticPiece> pieces) : pieces_(std::move(pieces)) {
    require(!pieces_.empty(), ErrorKind::ConfigInvalid, "max_quadratics needs at least one piece");
    n_ = pieces_.front().c.size();
    rho_ = 0.0;
    convex_ = true;
    for (auto& p : pieces_) {
      require(p.q.rows() == n_ && p.q.cols() == n_ && p.c.size() == n_,
              ErrorKind::DimensionMismatch, "max_quadratics piece sizes");
      p.q = symmetrized(p.q);
      const double lm = min_eigenvalue(p.q);
      rho_ = std::max(rho_, -lm);
      if (lm < -1e-12) convex_ = false;
    }
  }

  std::string kind() const override { return "max_quadratics"; }
  Index dim() const override { return n_; }

  double value(const Vector& x) const override {
    double best = -kInf;
    for (const auto& p : pieces_) best = std::max(best, p.value(x));
    return best;
  }

  std::vector<Index> active_set(const Vector& x) const {
    const double f = value(x);
    std::vector<Index> act;
    for (std::size_t j = 0; j < pieces_.size(); ++j)
      if (pieces_[j].value(x) >= f - kActiveTol * (1.0 + std::abs(f))) act.push_back(static_cast<Index>(j));
    return act;
  }

  SubdifferentialRep subdifferential(const Vector& x) const override {
    const std::vector<Index> act = active_set(x);
    Matrix g(n_, static_cast<Index>(act.size()));
    for (std::size_t k = 0; k < act.size(); ++k)
      g.col(static_cast<Index>(k)) = pieces_[static_cast<std::size_t>(act[k])].gradient(x);
    return SubdifferentialRep::polytope(g);
  }

  ActiveManifold manifold_for(const std::vector<Index>& act, const Vector& x) const {
    std::vector<QuadraticPiece> diffs;
    const QuadraticPiece& p0 = pieces_[static_cast<std::size_t>(act.front())];
    bool affine = true;
    for (std::size_t k = 1; k < act.size(); ++k) {
      const QuadraticPiece& pk = pieces_[static_cast<std::size_t>(act[k])];
      diffs.push_back(QuadraticPiece{pk.q - p0.q, pk.c - p0.c, pk.d - p0.d});
      if (diffs.back().q.cwiseAbs().maxCoeff() > 0.0) affine = false;
    }
    const Index m = static_cast<Index>(diffs.size());
    const Index n = n_;
    ActiveManifold am;
    ManifoldChart& c = am.chart;
    c.ambient_dim = n;
    c.codim = m;
    c.phi = [diffs, m](const Vector& y) {
      Vector out(m);
      for (Index k = 0; k < m; ++k) out(k) = diffs[static_cast<std::size_t>(k)].value(y);
      return out;
    };
    c.jacobian = [diffs, m, n](const Vector& y) {
      Matrix j(m, n);
      for (Index k = 0; k < m; ++k) j.row(k) = diffs[static_cast<std::size_t>(k)].gradient(y).transpose();
      return j;
    };
    c.hessian_tensor = [diffs](const Vector&) {
      std::vector<Matrix> hs;
      for (const auto& d : diffs) hs.push_back(d.q);
      return hs;
    };
    c.affine = affine;
    c.center = x;
    // Radius over which the inactive pieces stay strictly below the max.
    double gap = kInf;
    double slope = 1.0;
    const double f = value(x);
    for (std::size_t j = 0; j < pieces_.size(); ++j) {
      if (std::find(act.begin(), act.end(), static_cast<Index>(j)) != act.end()) continue;
      gap = std::min(gap, f - pieces_[j].value(x));
      slope = std::max(slope, (pieces_[j].gradient(x) - p0.gradient(x)).norm());
    }
    c.validity_radius = gap == kInf ? kInf : 0.5 * gap / slope;
    am.representative.value = [p0](const Vector& y) { return p0.value(y); };
    am.representative.gradient = [p0](const Vector& y) -> Vector { return p0.gradient(y); };
    am.representative.hessian = [p0](const Vector&) { return p0.q; };
    am.signature = index_list("active", act);
    return am;
  }

  ActiveManifold active_manifold(const Vector& x) const override {
    const std::vector<Index> act = active_set(x);
    ActiveManifold am = manifold_for(act, x);
    require(numerical_rank(am.chart.jacobian(x)) == am.chart.codim, ErrorKind::DegenerateActiveSet,
            "active gradients are affinely dependent");
    return am;
  }

  std::vector<ManifoldCandidate> prox_candidates(double r, const Vector& z) const override {
    const Vector x0 = dual_warm_start(r, z);
    const Index p = static_cast<Index>(pieces_.size());
    std::vector<Index> order(static_cast<std::size_t>(p));
    for (Index j = 0; j < p; ++j) order[static_cast<std::size_t>(j)] = j;
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
      return pieces_[static_cast<std::size_t>(a)].value(x0) > pieces_[static_cast<std::size_t>(b)].value(x0);
    });
    std::vector<ManifoldCandidate> out;
    const Index max_size = std::min<Index>(p, n_ + 1);
    // Leading sets of the ordering first, then every other subset.
    for (Index size = 1; size <= max_size; ++size) {
      std::vector<Index> act(order.begin(), order.begin() + size);
      std::sort(act.begin(), act.end());
      out.push_back(ManifoldCandidate{manifold_for(act, x0), x0});
    }
    for (Index size = 2; size <= max_size; ++size) {
      std::vector<bool> pick(static_cast<std::size_t>(p), false);
      std::fill(pick.begin(), pick.begin() + size, true);
      bool first = true;
      do {
        if (first) {
          first = false;
          continue;
        }
        std::vector<Index> act;
        for (Index k = 0; k < p; ++k)
          if (pick[static_cast<std::size_t>(k)]) act.push_back(order[static_cast<std::size_t>(k)]);
        std::sort(act.begin(), act.end());
        out.push_back(ManifoldCandidate{manifold_for(act, x0), x0});
      } while (std::prev_permutation(pick.begin(), pick.end()));
    }
    for (Index k = 1; k < p; ++k) {
      std::vector<Index> act{order[static_cast<std::size_t>(k)]};
      out.push_back(ManifoldCandidate{manifold_for(act, x0), x0});
    }
    return out;
  }

  double prox_regularity_modulus() const override { return rho_; }
  bool convex() const override { return convex_; }

 private:
  // Approximate prox by projected gradient ascent on the dual over the simplex:
  // x(l) = argmin sum_j l_j q_j(x) + |x - z|^2 / (2r), with dual gradient q_j(x(l)).
  Vector dual_warm_start(double r, const Vector& z) const {
    const Index p = static_cast<Index>(pieces_.size());
    auto primal = [&](const Vector& l) -> Vector {
      Matrix h = Matrix::Identity(n_, n_) / r;
      Vector rhs = z / r;
      for (Index j = 0; j < p; ++j) {
        h += l(j) * pieces_[static_cast<std::size_t>(j)].q;
        rhs -= l(j) * pieces_[static_cast<std::size_t>(j)].c;
      }
      return h.ldlt().solve(rhs);
    };
    auto dual = [&](const Vector& l, const Vector& x) {
      double val = 0.5 * (x - z).squaredNorm() / r;
      for (Index j = 0; j < p; ++j) val += l(j) * pieces_[static_cast<std::size_t>(j)].value(x);
      return val;
    };
    Vector l = Vector::Constant(p, 1.0 / static_cast<double>(p));
    Vector x = primal(l);
    double g = dual(l, x);
    double step = 1.0;
    for (int it = 0; it < 500; ++it) {
      Vector grad(p);
      for (Index j = 0; j < p; ++j) grad(j) = pieces_[static_cast<std::size_t>(j)].value(x);
      bool moved = false;
      for (int ls = 0; ls < 60; ++ls, step *= 0.5) {
        const Vector ln = project_simplex(l + step * grad);
        const Vector xn = primal(ln);
        const double gn = dual(ln, xn);
        // Ascent condition for a concave dual with step-size backtracking.
        if (gn >= g + grad.dot(ln - l) - 0.5 / step * (ln - l).squaredNorm()) {
          moved = (ln - l).cwiseAbs().maxCoeff() > 1e-15;
          l = ln;
          x = xn;
          g = gn;
          break;
        }
      }
      if (!moved) break;
      step *= 2.0;
    }
    return x;
  }

  static Vector project_simplex(const Vector& y) {
    std::vector<double> u(y.data(), y.data() + y.size());
    std::sort(u.begin(), u.end(), std::greater<>());
    double cum = 0.0;
    double theta = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
      cum += u[k];
      const double t = (cum - 1.0) / static_cast<double>(k + 1);
      if (u[k] - t > 0.0) theta = t;
    }
    return (y.array() - theta).max(0.0).matrix();
  }

  std::vector<QuadraticPiece> pieces_;
  Index n_ = 0;
  double rho_ = 0.0;
  bool convex_ = true;
};

}  // namespace

FunctionPtr make_l1(const Vector& weights) {
  const Index n = weights.size();
  return std::make_shared<L1QuadraticModel>("l1", weights, Matrix::Zero(n, n), Vector::Zero(n));
}

FunctionPtr make_l1(Index n, double lambda) { return make_l1(Vector::Constant(n, lambda)); }

FunctionPtr make_l1_quadratic(const Vector& weights, const Matrix& a, const Vector& b) {
  return std::make_shared<L1QuadraticModel>("l1_quadratic", weights, a, b);
}

FunctionPtr make_quadratic(const Matrix& a, const Vector& b) {
  return std::make_shared<L1QuadraticModel>("quadratic", Vector::Zero(b.size()), a, b);
}

FunctionPtr make_max_quadratics(std::vector<QuadraticPiece> pieces) {
  return std::make_shared<MaxQuadraticsModel>(std::move(pieces));
}

}  // namespace psmooth
