#include "psmooth/function_model.hpp"

namespace psmooth {

SubdifferentialRep subdifferential(const FunctionModel& fm, const Vector& x) {
  require(x.size() == fm.dim(), ErrorKind::DimensionMismatch, "subdifferential point size");
  return fm.subdifferential(x);
}

void require_subgradient(const FunctionModel& fm, const Vector& x, const Vector& v) {
  require(v.size() == fm.dim(), ErrorKind::DimensionMismatch, "subgradient size");
  const SubdifferentialRep rep = subdifferential(fm, x);
  require(contains(rep, v), ErrorKind::NotASubgradient, "v is not in the subdifferential at x");
}

ManifoldChart active_chart(const FunctionModel& fm, const Vector& x, const Vector& v) {
  require_subgradient(fm, x, v);
  return fm.active_manifold(x).chart;
}

SmoothFunction representative(const FunctionModel& fm, const Vector& x, const Vector& v) {
  require_subgradient(fm, x, v);
  return fm.active_manifold(x).representative;
}

SubdifferentialRep critical_cone(const FunctionModel& fm, const Vector& x, const Vector& v) {
  require_subgradient(fm, x, v);
  return normal_cone(subdifferential(fm, x), v);
}

}  // namespace psmooth
