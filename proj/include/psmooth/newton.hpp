#pragma once

#include "psmooth/function_model.hpp"

#include <functional>

namespace psmooth {

struct NewtonOptions {
  double tol = 1e-10;   // on the infinity norm of the KKT residual, relative to 1 + |psi| + |grad f_hat|
  int max_iter = 50;
};

struct NewtonResult {
  Vector x;
  Vector mu;
  double residual = kInf;
  int iterations = 0;
};

/// Newton's method with Armijo backtracking on 1/2 |F|^2 for the system
///
///   psi(x) + grad f_hat(x) + grad phi(x)^T mu = 0,   phi(x) = 0,
///
/// i.e. 0 in psi(x) + df(x) restricted to the manifold. Throws NewtonDiverged.
NewtonResult manifold_newton(const ActiveManifold& am, const std::function<Vector(const Vector&)>& psi,
                             const std::function<Matrix(const Vector&)>& psi_jacobian, const Vector& x0,
                             const NewtonOptions& opt = {});

}  // namespace psmooth
