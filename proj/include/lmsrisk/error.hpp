#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lmsrisk {

enum class ErrorCode {
  // ingest
  MissingColumn,
  MalformedRow,
  OutOfRangeGrade,
  DuplicateUsageRow,
  InvalidConfig,
  Io,
  // features
  NoFeaturesSelected,
  EmptySection,
  DegenerateDesign,
  SingleClass,
  TooFewInstances,
  // models
  InvalidHyperparameter,
  SingleClassTraining,
  NonConvergence,
  FeatureMismatch,
  EmptyGrid,
  SingleClassTest,
  // explain
  EmptyBackground,
  // cluster
  KTooLarge,
  EmptyInput,
  SingleCluster,
  // stats
  ZeroWithinVariance,
  DegenerateGroups,
  QuadratureFailure,
  // pipeline
  MissingArtifact,
};

std::string_view to_string(ErrorCode code);

/// Every failure surfaced by the library carries one of the codes above so
/// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  /// The message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace lmsrisk
