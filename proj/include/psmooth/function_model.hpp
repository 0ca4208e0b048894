#pragma once

#include "psmooth/manifold.hpp"
#include "psmooth/polyhedral.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace psmooth {

/// C2 data of a smooth function (value, gradient, Hessian).
struct SmoothFunction {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  std::function<Matrix(const Vector&)> hessian;
};

/// Active manifold at a point together with a C2 representative f_hat that
/// agrees with f on the manifold near the point.
struct ActiveManifold {
  ManifoldChart chart;
  SmoothFunction representative;
  std::string signature;  // identifies the active structure (support, active set, ...)
};

/// Candidate manifold for a prox or GE solve together with a start point.
struct ManifoldCandidate {
  ActiveManifold manifold;
  Vector start;
};

/// A C2-partly smooth function with the oracles the analysis needs.
class FunctionModel {
 public:
  virtual ~FunctionModel() = default;

  virtual std::string kind() const = 0;
  virtual Index dim() const = 0;
  /// Extended-real value; +inf outside the domain.
  virtual double value(const Vector& x) const = 0;
  /// Exact polyhedral description of the subdifferential at x.
  virtual SubdifferentialRep subdifferential(const Vector& x) const = 0;
  /// Active manifold and representative at x.
  virtual ActiveManifold active_manifold(const Vector& x) const = 0;

  virtual std::optional<Vector> prox_closed_form(double /*r*/, const Vector& /*z*/) const {
    return std::nullopt;
  }
  /// Candidate manifolds for prox_{rf}(z), most plausible first.
  virtual std::vector<ManifoldCandidate> prox_candidates(double /*r*/, const Vector& /*z*/) const {
    return {};
  }
  /// Declared prox-regularity modulus (0 for convex entries).
  virtual double prox_regularity_modulus() const { return 0.0; }
  virtual bool convex() const = 0;
};

using FunctionPtr = std::shared_ptr<const FunctionModel>;

SubdifferentialRep subdifferential(const FunctionModel& fm, const Vector& x);

/// Active chart at x; requires v in the subdifferential.
ManifoldChart active_chart(const FunctionModel& fm, const Vector& x, const Vector& v);

/// C2 representative at x; requires v in the subdifferential.
SmoothFunction representative(const FunctionModel& fm, const Vector& x, const Vector& v);

/// K_f(x, v) = N_{df(x)}(v) in generator form.
SubdifferentialRep critical_cone(const FunctionModel& fm, const Vector& x, const Vector& v);

/// Throws NotASubgradient unless v is in the subdifferential at x.
void require_subgradient(const FunctionModel& fm, const Vector& x, const Vector& v);

}  // namespace psmooth
