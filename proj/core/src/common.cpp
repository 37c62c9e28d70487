#include "pesin/common.hpp"

namespace pesin {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::GrazingCollision: return "GrazingCollision";
    case ErrorKind::CornerHit: return "CornerHit";
    case ErrorKind::NoIntersection: return "NoIntersection";
    case ErrorKind::AssumptionViolated: return "AssumptionViolated";
    case ErrorKind::OrbitHitsDiscontinuity: return "OrbitHitsDiscontinuity";
    case ErrorKind::SplittingNotConverged: return "SplittingNotConverged";
    case ErrorKind::SeriesDiverging: return "SeriesDiverging";
    case ErrorKind::DegenerateAngle: return "DegenerateAngle";
    case ErrorKind::NotDiagonal: return "NotDiagonal";
    case ErrorKind::NotHyperbolic: return "NotHyperbolic";
    case ErrorKind::InequalityViolated: return "InequalityViolated";
    case ErrorKind::OutOfDomain: return "OutOfDomain";
    case ErrorKind::DomainEscape: return "DomainEscape";
    case ErrorKind::BoundViolated: return "BoundViolated";
    case ErrorKind::OverlapMissing: return "OverlapMissing";
    case ErrorKind::AdmissibilityViolated: return "AdmissibilityViolated";
    case ErrorKind::GraphFolded: return "GraphFolded";
    case ErrorKind::ContractionViolated: return "ContractionViolated";
    case ErrorKind::NotConverged: return "NotConverged";
    case ErrorKind::MultipleIntersections: return "MultipleIntersections";
    case ErrorKind::ShadowEscape: return "ShadowEscape";
    case ErrorKind::EmptyAlphabet: return "EmptyAlphabet";
    case ErrorKind::NoBinCenter: return "NoBinCenter";
    case ErrorKind::DiagnosticFailed: return "DiagnosticFailed";
    case ErrorKind::EmptyCover: return "EmptyCover";
    case ErrorKind::CylinderEmpty: return "CylinderEmpty";
    case ErrorKind::InvalidInput: return "InvalidInput";
  }
  return "Unknown";
}

static std::string compose(ErrorKind kind, const std::string& what, std::optional<long> index) {
  std::string msg = to_string(kind);
  if (index) msg += "(" + std::to_string(*index) + ")";
  if (!what.empty()) msg += ": " + what;
  return msg;
}

Error::Error(ErrorKind kind, const std::string& what, std::optional<long> index)
    : std::runtime_error(compose(kind, what, index)), kind_(kind), index_(index) {}

void fail(ErrorKind kind, const std::string& what, std::optional<long> index) {
  throw Error(kind, what, index);
}

}  // namespace pesin
