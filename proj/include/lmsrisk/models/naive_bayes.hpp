#pragma once

#include <array>

#include "json.hpp"
#include "lmsrisk/types.hpp"

namespace lmsrisk {

struct NaiveBayesModel {
  std::array<double, 2> log_prior{};
  std::array<FeatureVector, 2> mean{};
  std::array<FeatureVector, 2> variance{};

  double predict(const FeatureVector& x) const;

  nlohmann::json to_json() const;
  static NaiveBayesModel from_json(const nlohmann::json& j);
};

/// Per-class Gaussian likelihoods; every variance is increased by
/// var_smoothing times the largest per-feature variance of the data.
NaiveBayesModel fit_naive_bayes(const Dataset& data, double var_smoothing = 1e-9);

}  // namespace lmsrisk
