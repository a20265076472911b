#pragma once

#include <functional>
#include <span>

#include "lmsrisk/types.hpp"

namespace lmsrisk {

/// Anything that scores feature vectors with an at-risk probability.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual void predict(std::span<const FeatureVector> x, std::span<double> out) const = 0;
};

/// Adapts a scalar function, mostly for tests and analytic models.
class FunctionPredictor final : public Predictor {
 public:
  explicit FunctionPredictor(std::function<double(const FeatureVector&)> fn) : fn_(std::move(fn)) {}
  void predict(std::span<const FeatureVector> x, std::span<double> out) const override {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = fn_(x[i]);
  }

 private:
  std::function<double(const FeatureVector&)> fn_;
};

}  // namespace lmsrisk
