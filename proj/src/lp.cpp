#include "psmooth/lp.hpp"

#include <cmath>

namespace psmooth {

void LinearProgram::add_eq(const Vector& row, double rhs) {
  a_eq.conservativeResize(a_eq.rows() + 1, num_vars());
  a_eq.row(a_eq.rows() - 1) = row.transpose();
  b_eq.conservativeResize(b_eq.size() + 1);
  b_eq(b_eq.size() - 1) = rhs;
}

void LinearProgram::add_ub(const Vector& row, double rhs) {
  a_ub.conservativeResize(a_ub.rows() + 1, num_vars());
  a_ub.row(a_ub.rows() - 1) = row.transpose();
  b_ub.conservativeResize(b_ub.size() + 1);
  b_ub(b_ub.size() - 1) = rhs;
}

namespace {

constexpr double kPivotTol = 1e-11;

// Tableau in canonical form: rows 0..m-1 are constraints, last column is the
// right-hand side, row m is the reduced-cost row.
class Tableau {
 public:
  Tableau(Matrix t, std::vector<Index> basis)
      : t_(std::move(t)), basis_(std::move(basis)) {}

  Index rows() const { return t_.rows() - 1; }
  Index cols() const { return t_.cols() - 1; }
  Matrix& data() { return t_; }
  std::vector<Index>& basis() { return basis_; }

  void pivot(Index r, Index c) {
    t_.row(r) /= t_(r, c);
    for (Index i = 0; i < t_.rows(); ++i) {
      if (i == r) continue;
      const double f = t_(i, c);
      if (f != 0.0) t_.row(i) -= f * t_.row(r);
    }
    basis_[static_cast<std::size_t>(r)] = c;
  }

  // Runs simplex iterations restricted to columns [0, active_cols).
  // Returns false when the objective is unbounded below.
  bool optimize(Index active_cols) {
    const Index m = rows();
    const Index rhs = cols();
    for (int iter = 0; iter < 50000; ++iter) {
      Index enter = -1;
      for (Index j = 0; j < active_cols; ++j) {
        if (t_(m, j) < -kPivotTol) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return true;
      Index leave = -1;
      double best = kInf;
      for (Index i = 0; i < m; ++i) {
        const double a = t_(i, enter);
        if (a > kPivotTol) {
          const double ratio = t_(i, rhs) / a;
          if (ratio < best - 1e-14 ||
              (std::abs(ratio - best) <= 1e-14 && leave >= 0 &&
               basis_[static_cast<std::size_t>(i)] <
                   basis_[static_cast<std::size_t>(leave)])) {
            best = ratio;
            leave = i;
          }
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
    }
    return true;
  }

 private:
  Matrix t_;
  std::vector<Index> basis_;
};

}  // namespace

LpResult solve_lp(const LinearProgram& lp) {
  const Index n = lp.num_vars();
  const bool any_free = !lp.free.empty();
  // Column layout: [x+ (n) | x- (for free vars) | slacks (ub rows) | artificials]
  std::vector<Index> neg_col(static_cast<std::size_t>(n), -1);
  Index cols = n;
  if (any_free) {
    for (Index j = 0; j < n; ++j)
      if (lp.free[static_cast<std::size_t>(j)]) neg_col[static_cast<std::size_t>(j)] = cols++;
  }
  const Index m_eq = lp.a_eq.rows();
  const Index m_ub = lp.a_ub.rows();
  const Index m = m_eq + m_ub;
  const Index slack0 = cols;
  cols += m_ub;
  const Index art0 = cols;
  cols += m;

  Matrix t = Matrix::Zero(m + 1, cols + 1);
  auto fill_row = [&](Index r, const auto& coeffs, double rhs, bool slack) {
    for (Index j = 0; j < n; ++j) {
      t(r, j) = coeffs(j);
      const Index nc = neg_col[static_cast<std::size_t>(j)];
      if (nc >= 0) t(r, nc) = -coeffs(j);
    }
    if (slack) t(r, slack0 + (r - m_eq)) = 1.0;
    t(r, cols) = rhs;
    if (rhs < 0.0) t.row(r) *= -1.0;
    t(r, art0 + r) = 1.0;
  };
  for (Index i = 0; i < m_eq; ++i) fill_row(i, lp.a_eq.row(i), lp.b_eq(i), false);
  for (Index i = 0; i < m_ub; ++i)
    fill_row(m_eq + i, lp.a_ub.row(i), lp.b_ub(i), true);

  std::vector<Index> basis(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) basis[static_cast<std::size_t>(i)] = art0 + i;

  // Phase 1: minimize the sum of artificials.
  for (Index i = 0; i < m; ++i) t.row(m) -= t.row(i);
  for (Index i = 0; i < m; ++i) t(m, art0 + i) = 0.0;
  Tableau tab(std::move(t), std::move(basis));
  tab.optimize(cols);

  LpResult result;
  const double rhs_scale =
      1.0 + (m ? tab.data().col(cols).head(m).cwiseAbs().maxCoeff() : 0.0);
  if (-tab.data()(m, cols) > 1e-9 * rhs_scale) {
    result.status = LpStatus::Infeasible;
    return result;
  }

  // Drive remaining artificials out of the basis; drop redundant rows.
  std::vector<Index> keep_rows;
  for (Index i = 0; i < m; ++i) {
    if (tab.basis()[static_cast<std::size_t>(i)] >= art0) {
      Index col = -1;
      for (Index j = 0; j < art0; ++j) {
        if (std::abs(tab.data()(i, j)) > 1e-9) {
          col = j;
          break;
        }
      }
      if (col >= 0) {
        tab.pivot(i, col);
        keep_rows.push_back(i);
      }
    } else {
      keep_rows.push_back(i);
    }
  }

  const Index m2 = static_cast<Index>(keep_rows.size());
  Matrix t2 = Matrix::Zero(m2 + 1, art0 + 1);
  std::vector<Index> basis2(static_cast<std::size_t>(m2));
  for (Index k = 0; k < m2; ++k) {
    const Index i = keep_rows[static_cast<std::size_t>(k)];
    t2.row(k).head(art0) = tab.data().row(i).head(art0);
    t2(k, art0) = tab.data()(i, cols);
    basis2[static_cast<std::size_t>(k)] = tab.basis()[static_cast<std::size_t>(i)];
  }
  // Phase 2 cost row, expressed in terms of the nonbasic variables.
  for (Index j = 0; j < n; ++j) {
    t2(m2, j) = lp.cost(j);
    const Index nc = neg_col[static_cast<std::size_t>(j)];
    if (nc >= 0) t2(m2, nc) = -lp.cost(j);
  }
  for (Index k = 0; k < m2; ++k) {
    const Index b = basis2[static_cast<std::size_t>(k)];
    const double cb = t2(m2, b);
    if (cb != 0.0) t2.row(m2) -= cb * t2.row(k);
  }
  Tableau tab2(std::move(t2), std::move(basis2));
  if (!tab2.optimize(art0)) {
    result.status = LpStatus::Unbounded;
    return result;
  }

  Vector full = Vector::Zero(art0);
  for (Index k = 0; k < m2; ++k)
    full(tab2.basis()[static_cast<std::size_t>(k)]) = tab2.data()(k, art0);
  result.x = full.head(n);
  for (Index j = 0; j < n; ++j) {
    const Index nc = neg_col[static_cast<std::size_t>(j)];
    if (nc >= 0) result.x(j) -= full(nc);
  }
  result.status = LpStatus::Optimal;
  result.objective = lp.cost.dot(result.x);
  return result;
}

}  // namespace psmooth
