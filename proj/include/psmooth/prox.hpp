#pragma once

#include "psmooth/function_model.hpp"
#include "psmooth/newton.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace psmooth {

inline constexpr double kProxTol = 1e-10;

struct ProxOptions {
  double tol = kProxTol;  // on dist_inf((z - x)/r, df(x)), relative to 1 + |(z - x)/r|
  NewtonOptions newton{kProxTol, 50};
};

struct ProxResult {
  Vector z;
  double r = 0.0;
  Vector x;
  double residual = kInf;
  bool closed_form = false;
  std::optional<ManifoldChart> chart_used;
  std::string signature;
};

/// prox_{rf}(z). Uses the closed form when the model has one, otherwise
/// solves on each candidate manifold and keeps verified solutions with the
/// lowest Moreau objective. Requires r rho < 1/2 when rho > 0.
ProxResult prox(const FunctionModel& fm, double r, const Vector& z, const ProxOptions& opt = {});

/// (z - x)/r for a prox result.
Vector prox_subgradient(const ProxResult& p);

/// T (I + r T'HT)^-1 T' at x = prox_{rf}(z), with H the Lagrangian Hessian.
Matrix prox_jacobian(const FunctionModel& fm, double r, const Vector& z, const ProxOptions& opt = {});

/// Central differences of prox column by column.
Matrix prox_jacobian_fd(const FunctionModel& fm, double r, const Vector& z, double h = 1e-5,
                        const ProxOptions& opt = {});

struct IdentificationReport {
  double fraction = 0.0;
  int samples = 0;
  int on_manifold = 0;
};

/// Fraction of z in the ball around xbar + r vbar whose prox lies on the
/// active manifold at xbar.
IdentificationReport identification_test(const FunctionModel& fm, const Vector& xbar, const Vector& vbar,
                                         double r, int num_samples, double radius, std::uint64_t seed = 1,
                                         int jobs = 1);

}  // namespace psmooth
