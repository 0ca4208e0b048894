#pragma once

#include "psmooth/core.hpp"

#include <vector>

namespace psmooth {

/// Dense linear program
///
///   minimize    c'x
///   subject to  A_eq x  = b_eq
///               A_ub x <= b_ub
///               x_j >= 0 unless free[j]
///
/// Sized for the small polyhedral queries in funclib (tens of variables).
struct LinearProgram {
  Vector cost;
  Matrix a_eq;
  Vector b_eq;
  Matrix a_ub;
  Vector b_ub;
  std::vector<bool> free;  // empty means every variable is sign-constrained

  explicit LinearProgram(Index num_vars = 0)
      : cost(Vector::Zero(num_vars)),
        a_eq(0, num_vars),
        b_eq(0),
        a_ub(0, num_vars),
        b_ub(0),
        free(static_cast<std::size_t>(num_vars), false) {}

  Index num_vars() const { return cost.size(); }

  void add_eq(const Vector& row, double rhs);
  void add_ub(const Vector& row, double rhs);
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  Vector x;
  double objective = kInf;

  bool optimal() const { return status == LpStatus::Optimal; }
};

/// Two-phase tableau simplex with Bland's anti-cycling rule.
LpResult solve_lp(const LinearProgram& lp);

}  // namespace psmooth
