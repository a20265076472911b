#include "lmsrisk/error.hpp"
#include "lmsrisk/types.hpp"

namespace lmsrisk {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::OutOfRangeGrade: return "OutOfRangeGrade";
    case ErrorCode::DuplicateUsageRow: return "DuplicateUsageRow";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
    case ErrorCode::NoFeaturesSelected: return "NoFeaturesSelected";
    case ErrorCode::EmptySection: return "EmptySection";
    case ErrorCode::DegenerateDesign: return "DegenerateDesign";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::TooFewInstances: return "TooFewInstances";
    case ErrorCode::InvalidHyperparameter: return "InvalidHyperparameter";
    case ErrorCode::SingleClassTraining: return "SingleClassTraining";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::FeatureMismatch: return "FeatureMismatch";
    case ErrorCode::EmptyGrid: return "EmptyGrid";
    case ErrorCode::SingleClassTest: return "SingleClassTest";
    case ErrorCode::EmptyBackground: return "EmptyBackground";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::SingleCluster: return "SingleCluster";
    case ErrorCode::ZeroWithinVariance: return "ZeroWithinVariance";
    case ErrorCode::DegenerateGroups: return "DegenerateGroups";
    case ErrorCode::QuadratureFailure: return "QuadratureFailure";
    case ErrorCode::MissingArtifact: return "MissingArtifact";
  }
  return "Unknown";
}

Dataset subset(const Dataset& data, const std::vector<std::size_t>& rows) {
  Dataset out;
  out.x.reserve(rows.size());
  out.y.reserve(rows.size());
  for (std::size_t r : rows) {
    out.x.push_back(data.x[r]);
    out.y.push_back(data.y[r]);
  }
  return out;
}

}  // namespace lmsrisk
