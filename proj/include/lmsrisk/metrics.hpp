#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "lmsrisk/predictor.hpp"
#include "lmsrisk/types.hpp"

namespace lmsrisk {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // scores >= threshold are called positive; +inf for the origin
};

/// Confusion counts at the 0.5 threshold; index [actual][predicted].
using Confusion = std::array<std::array<std::size_t, 2>, 2>;

struct EvalReport {
  double accuracy = 0.0;
  std::optional<double> auc;  // absent when the test set has a single class
  std::vector<RocPoint> roc_points;
  Confusion confusion{};
  std::size_t n = 0;
  bool single_class_test = false;
};

/// ROC from (0,0) to (1,1) with one step per distinct score; tied scores move
/// both coordinates at once. Requires both classes.
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels);

/// Trapezoidal area under roc_curve, computed from integer counts.
/// SingleClassTest when one class is missing.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

/// Accuracy, confusion and ROC from precomputed scores. A single-class test
/// set yields a report without AUC and single_class_test set.
EvalReport evaluate_scores(std::span<const double> scores, std::span<const int> labels);

/// Scores `model` on `test` and evaluates. Empty test sets are TooFewInstances.
EvalReport evaluate(const Predictor& model, const Dataset& test);

nlohmann::json to_json(const EvalReport& report);

}  // namespace lmsrisk
