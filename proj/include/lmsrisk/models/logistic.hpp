#pragma once

#include "json.hpp"
#include "lmsrisk/types.hpp"

namespace lmsrisk {

/// L2-regularized logistic regression: minimizes
///   (1/C) * 0.5 * |w|^2 + sum_i logloss(y_i, w.x_i + b)
/// with the intercept unpenalized.
struct LogisticModel {
  FeatureVector weights{};
  double intercept = 0.0;
  int iterations = 0;

  double predict(const FeatureVector& x) const;

  nlohmann::json to_json() const;
  static LogisticModel from_json(const nlohmann::json& j);
};

/// Parameter layout for the helpers below: w_0..w_3, then b.
using LogisticParams = std::array<double, kNumFeatures + 1>;

double logistic_objective(const LogisticParams& params, const Dataset& data, double c);
LogisticParams logistic_gradient(const LogisticParams& params, const Dataset& data, double c);

/// Damped Newton iterations until the gradient norm drops below `tol`, or
/// below `100 * tol` once the Newton decrement reaches rounding level.
/// NonConvergence after `max_iter` steps.
LogisticModel fit_logistic(const Dataset& data, double c, int max_iter = 100, double tol = 1e-8);

}  // namespace lmsrisk
