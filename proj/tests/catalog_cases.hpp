#pragma once

// Catalog entries with a point and an ri subgradient, shared by the tests.

#include "oracles.hpp"
#include "psmooth/catalog.hpp"
#include "psmooth/cplq.hpp"

#include <cmath>
#include <vector>

namespace cases {

using oracle::vec;
using namespace psmooth;

// max(x1^2 + x2^2, 2 x1): active manifold is the circle (x1 - 1)^2 + x2^2 = 1.
inline FunctionPtr circle_max() {
  QuadraticPiece p1{2.0 * Matrix::Identity(2, 2), Vector::Zero(2), 0.0};
  QuadraticPiece p2{Matrix::Zero(2, 2), vec({2, 0}), 0.0};
  return make_max_quadratics({p1, p2});
}

struct CatalogCase {
  FunctionPtr f;
  Vector x;
  Vector v;
};

inline std::vector<CatalogCase> catalog_cases() {
  Matrix a(2, 2);
  a << 1.0, 0.3, 0.3, 2.0;
  CplqFunction hinge2;
  hinge2.dim = 2;
  {
    // |x1| + max(x2, 0) as a CPLQ with four pieces.
    for (int s1 : {-1, 1})
      for (int s2 : {-1, 1}) {
        CplqPiece p;
        p.cell.push_back({vec({-1.0 * s1, 0}), 0.0});
        p.cell.push_back({vec({0, -1.0 * s2}), 0.0});
        p.a = Matrix::Zero(2, 2);
        p.lin = vec({1.0 * s1, s2 > 0 ? 1.0 : 0.0});
        hinge2.pieces.push_back(p);
      }
  }
  return {
      {make_l1(3, 1.0), vec({1, 0, -2}), vec({1, 0.3, -1})},
      {make_l1_quadratic(vec({1, 1}), a, vec({0.1, -0.2})), vec({0.5, 0}), vec({1.6, 0.25})},
      {circle_max(), vec({1 - std::cos(0.4), std::sin(0.4)}), Vector()},
      {make_cplq(hinge2), vec({0, 0}), vec({0.2, 0.5})},
      {make_cplq(cplq_abs()), vec({0}), vec({-0.4})},
  };
}

/// Fills in v for cases that leave it empty: midpoint of the first block.
inline CatalogCase resolved(CatalogCase c) {
  if (c.v.size() == 0) {
    const SubdifferentialRep s = c.f->subdifferential(c.x);
    c.v = 0.5 * (s.blocks[0].col(0) + s.blocks[0].col(1));
  }
  return c;
}

}  // namespace cases
