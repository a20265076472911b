#include "lmsrisk/models/naive_bayes.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lmsrisk/error.hpp"

namespace lmsrisk {

double NaiveBayesModel::predict(const FeatureVector& x) const {
  std::array<double, 2> joint{};
  for (int c = 0; c < 2; ++c) {
    double lp = log_prior[c];
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      double v = variance[c][f];
      double d = x[f] - mean[c][f];
      lp -= 0.5 * std::log(2.0 * std::numbers::pi * v) + 0.5 * d * d / v;
    }
    joint[c] = lp;
  }
  // P(1 | x) = 1 / (1 + exp(joint0 - joint1))
  double diff = joint[0] - joint[1];
  if (std::isnan(diff)) return 0.5;
  if (diff >= 0) {
    double e = std::exp(-diff);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(diff));
}

nlohmann::json NaiveBayesModel::to_json() const {
  return {{"log_prior", log_prior}, {"mean", mean}, {"variance", variance}};
}

NaiveBayesModel NaiveBayesModel::from_json(const nlohmann::json& j) {
  NaiveBayesModel m;
  m.log_prior = j.at("log_prior").get<std::array<double, 2>>();
  m.mean = j.at("mean").get<std::array<FeatureVector, 2>>();
  m.variance = j.at("variance").get<std::array<FeatureVector, 2>>();
  return m;
}

NaiveBayesModel fit_naive_bayes(const Dataset& data, double var_smoothing) {
  const std::size_t n = data.size();
  std::size_t pos = data.positives();
  if (pos == 0 || pos == n) throw Error(ErrorCode::SingleClassTraining, "naive Bayes needs both classes");

  // Largest feature variance over all rows sets the smoothing scale.
  FeatureVector all_mean{}, all_var{};
  for (const auto& x : data.x)
    for (std::size_t f = 0; f < kNumFeatures; ++f) all_mean[f] += x[f];
  for (auto& m : all_mean) m /= static_cast<double>(n);
  for (const auto& x : data.x)
    for (std::size_t f = 0; f < kNumFeatures; ++f) all_var[f] += (x[f] - all_mean[f]) * (x[f] - all_mean[f]);
  double max_var = 0.0;
  for (auto v : all_var) max_var = std::max(max_var, v / static_cast<double>(n));
  double epsilon = var_smoothing * max_var;

  NaiveBayesModel m;
  std::array<double, 2> count{};
  for (std::size_t i = 0; i < n; ++i) {
    int c = data.y[i] ? 1 : 0;
    count[c] += 1.0;
    for (std::size_t f = 0; f < kNumFeatures; ++f) m.mean[c][f] += data.x[i][f];
  }
  for (int c = 0; c < 2; ++c)
    for (auto& v : m.mean[c]) v /= count[c];
  for (std::size_t i = 0; i < n; ++i) {
    int c = data.y[i] ? 1 : 0;
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      double d = data.x[i][f] - m.mean[c][f];
      m.variance[c][f] += d * d;
    }
  }
  for (int c = 0; c < 2; ++c) {
    for (auto& v : m.variance[c]) {
      v = v / count[c] + epsilon;
      // All-constant data: keep the likelihood finite.
      if (!(v > 0.0)) v = 1e-300;
    }
    m.log_prior[c] = std::log(count[c] / static_cast<double>(n));
  }
  return m;
}

}  // namespace lmsrisk
