#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

namespace pesin {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kHalfPi = kPi / 2.0;
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class ErrorKind {
  GrazingCollision,
  CornerHit,
  NoIntersection,
  AssumptionViolated,
  OrbitHitsDiscontinuity,
  SplittingNotConverged,
  SeriesDiverging,
  DegenerateAngle,
  NotDiagonal,
  NotHyperbolic,
  InequalityViolated,
  OutOfDomain,
  DomainEscape,
  BoundViolated,
  OverlapMissing,
  AdmissibilityViolated,
  GraphFolded,
  ContractionViolated,
  NotConverged,
  MultipleIntersections,
  ShadowEscape,
  EmptyAlphabet,
  NoBinCenter,
  DiagnosticFailed,
  EmptyCover,
  CylinderEmpty,
  InvalidInput,
};

const char* to_string(ErrorKind kind);

// Every failure carries a kind plus, where it makes sense, the orbit index of
// the offending step.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what, std::optional<long> index = std::nullopt);

  ErrorKind kind() const { return kind_; }
  std::optional<long> index() const { return index_; }

 private:
  ErrorKind kind_;
  std::optional<long> index_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what, std::optional<long> index = std::nullopt);

// log(e^a + e^b) without overflow; -inf is the additive identity.
inline double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

inline double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

// exp() that saturates to 0 / +inf instead of producing denormals.
inline double bounded_exp(double x) {
  if (x < -700.0) return 0.0;
  if (x > 700.0) return std::numeric_limits<double>::infinity();
  return std::exp(x);
}

inline double frobenius(const Mat2& m) { return m.norm(); }

inline double operator_norm(const Mat2& m) {
  Eigen::JacobiSVD<Mat2> svd(m);
  return svd.singularValues()(0);
}

inline double conorm(const Mat2& m) {
  Eigen::JacobiSVD<Mat2> svd(m);
  return svd.singularValues()(1);
}

inline Vec2 normalized_with_sign(Vec2 v) {
  v.normalize();
  if (v(0) < 0.0 || (v(0) == 0.0 && v(1) < 0.0)) v = -v;
  return v;
}

}  // namespace pesin
