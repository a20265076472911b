#pragma once

#include <span>

#include <vector>

#include "json.hpp"
#include "lmsrisk/models/tree.hpp"
#include "lmsrisk/types.hpp"

namespace lmsrisk {

struct BoostingOptions {
  int n_estimators = 400;
  double learning_rate = 0.1;
  int max_depth = 15;
  double reg_lambda = 1.0;
  double gamma = 0.0;
  double min_child_weight = 1.0;
};

/// Newton boosting on the logistic loss. Leaf values already include the
/// learning rate.
struct BoostingModel {
  double base_margin = 0.0;  // logit of the training prevalence
  std::vector<Tree> trees;

  double predict_margin(const FeatureVector& x, std::size_t rounds) const;
  double predict(const FeatureVector& x) const;
  /// Same values as predict(); walks one tree over every row before the next.
  void predict_batch(std::span<const FeatureVector> x, std::span<double> out) const;

  nlohmann::json to_json() const;
  static BoostingModel from_json(const nlohmann::json& j);
};

/// Exact greedy split search: leaf weight -G/(H + lambda), split gain
/// 0.5 * [G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - G^2/(H+lambda)] - gamma.
BoostingModel fit_boosting(const Dataset& data, const BoostingOptions& options);

}  // namespace lmsrisk
