#include "rfim/common.hpp"

namespace rfim {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::EmptyLattice: return "EmptyLattice";
    case Errc::InvalidPolygon: return "InvalidPolygon";
    case Errc::NonPositiveLambda: return "NonPositiveLambda";
    case Errc::TooLarge: return "TooLarge";
    case Errc::TooWide: return "TooWide";
    case Errc::WolffWithField: return "WolffWithField";
    case Errc::ZeroDenominator: return "ZeroDenominator";
    case Errc::MissingCorrelation: return "MissingCorrelation";
    case Errc::DegreeExceeded: return "DegreeExceeded";
    case Errc::InsufficientRegularity: return "InsufficientRegularity";
    case Errc::DimensionTooLarge: return "DimensionTooLarge";
    case Errc::EmptySamples: return "EmptySamples";
    case Errc::ZeroBlockMass: return "ZeroBlockMass";
    case Errc::NonGaussianLaw: return "NonGaussianLaw";
    case Errc::AnnulusOutsideDomain: return "AnnulusOutsideDomain";
    case Errc::InsufficientTail: return "InsufficientTail";
    case Errc::ValidationError: return "ValidationError";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::IoError: return "IoError";
  }
  return "Error";
}

}  // namespace rfim
