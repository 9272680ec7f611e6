#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace rfim {

using Index = Eigen::Index;
using cplx = std::complex<double>;
using VectorX = Eigen::VectorXd;
using VectorXc = Eigen::VectorXcd;
using MatrixX = Eigen::MatrixXd;
using Point = Eigen::Vector2d;

/// Critical inverse temperature log(1+sqrt 2)/2 = 0.44068679350977151...
inline constexpr double beta_c = 0.44068679350977151;

enum class Errc {
  EmptyLattice,
  InvalidPolygon,
  NonPositiveLambda,
  TooLarge,
  TooWide,
  WolffWithField,
  ZeroDenominator,
  MissingCorrelation,
  DegreeExceeded,
  InsufficientRegularity,
  DimensionTooLarge,
  EmptySamples,
  ZeroBlockMass,
  NonGaussianLaw,
  AnnulusOutsideDomain,
  InsufficientTail,
  ValidationError,
  InvalidArgument,
  IoError,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace rfim
