#include "psmooth/core.hpp"

namespace psmooth {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::NotInRange: return "NotInRange";
    case ErrorKind::UnsupportedPoint: return "UnsupportedPoint";
    case ErrorKind::EmptySet: return "EmptySet";
    case ErrorKind::NotASubgradient: return "NotASubgradient";
    case ErrorKind::DegenerateActiveSet: return "DegenerateActiveSet";
    case ErrorKind::PointOutsideDomain: return "PointOutsideDomain";
    case ErrorKind::RiViolated: return "RiViolated";
    case ErrorKind::NoCandidateManifold: return "NoCandidateManifold";
    case ErrorKind::NewtonDiverged: return "NewtonDiverged";
    case ErrorKind::SingularReducedMap: return "SingularReducedMap";
    case ErrorKind::NotASolution: return "NotASolution";
    case ErrorKind::ManifoldAmbiguous: return "ManifoldAmbiguous";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::RangeClamped: return "RangeClamped";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
  }
  return "Unknown";
}

}  // namespace psmooth
