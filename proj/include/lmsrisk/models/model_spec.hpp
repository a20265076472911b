#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace lmsrisk {

enum class Family {
  LogisticRegression,
  GaussianNaiveBayes,
  DecisionTree,
  RandomForest,
  NeuralNetwork,
  GradientBoosting,
  SupportVectorMachine,
};

inline constexpr Family kAllFamilies[] = {
    Family::LogisticRegression, Family::GaussianNaiveBayes, Family::DecisionTree, Family::RandomForest,
    Family::NeuralNetwork,      Family::GradientBoosting,   Family::SupportVectorMachine,
};

std::string_view to_string(Family family);
/// Accepts the snake_case names printed by to_string ("random_forest", ...).
std::optional<Family> parse_family(std::string_view name);

using Hyperparameters = std::map<std::string, nlohmann::json>;

struct ModelSpec {
  Family family = Family::LogisticRegression;
  Hyperparameters hyperparameters;
  std::uint64_t seed = 0;

  /// Declared hyperparameter defaults for a family (anchored at the tuned
  /// values reported for the original study).
  static Hyperparameters defaults(Family family);

  /// Throws InvalidHyperparameter for unknown names or out-of-range values.
  void validate() const;

  /// Value of `name`, falling back to the family default.
  const nlohmann::json& get(const std::string& name) const;
  double real(const std::string& name) const;
  long long integer(const std::string& name) const;

  bool operator==(const ModelSpec&) const = default;
};

nlohmann::json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& j);

}  // namespace lmsrisk
