#pragma once

#include <Eigen/Dense>

#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace psmooth {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Failure categories raised by the library. Each maps to a precondition or
/// numerical condition named in the module contracts.
enum class ErrorKind {
  RankDeficient,
  NotInRange,
  UnsupportedPoint,
  EmptySet,
  NotASubgradient,
  DegenerateActiveSet,
  PointOutsideDomain,
  RiViolated,
  NoCandidateManifold,
  NewtonDiverged,
  SingularReducedMap,
  NotASolution,
  ManifoldAmbiguous,
  DimensionMismatch,
  RangeClamped,
  ConfigInvalid,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) throw Error(kind, what);
}

inline std::vector<double> to_std(const Vector& v) {
  return {v.data(), v.data() + v.size()};
}

inline Vector from_std(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

}  // namespace psmooth
