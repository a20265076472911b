#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lmsrisk/predictor.hpp"
#include "lmsrisk/types.hpp"

namespace lmsrisk {

inline constexpr std::size_t kNumCoalitions = std::size_t{1} << kNumFeatures;

/// Coalition S is a bitmask over canonical feature indices.
using CoalitionValues = std::array<double, kNumCoalitions>;

/// v(S) = mean over background rows b of f(hybrid), where the hybrid takes the
/// instance's values on S and b's values elsewhere. EmptyBackground if empty.
CoalitionValues coalition_values(const Predictor& model, const FeatureVector& instance,
                                 std::span<const FeatureVector> background);

/// phi_i = sum over S not containing i of |S|!(d-|S|-1)!/d! [v(S+i) - v(S)].
FeatureVector shapley_from_coalitions(const CoalitionValues& v);

struct ShapleyValues {
  double baseline = 0.0;  // v(empty set)
  FeatureVector phi{};
  double output = 0.0;  // v(all features) = model output on the instance
};

ShapleyValues shapley_values(const Predictor& model, const FeatureVector& instance,
                             std::span<const FeatureVector> background);

struct ShapReport {
  std::string model;  // family name or caller label
  double baseline = 0.0;
  std::size_t background_size = 0;
  std::vector<FeatureVector> instances;
  std::vector<FeatureVector> phi;
  std::vector<double> outputs;
  FeatureVector mean_abs_phi{};
  /// rank[f] for canonical feature f; 1 = most important.
  std::array<int, kNumFeatures> rank{};
};

/// Ranks by descending value; equal values keep canonical order.
std::array<int, kNumFeatures> rank_descending(const FeatureVector& importance);

/// Exact Shapley values for every instance against one background sample.
/// TooFewInstances when `instances` is empty.
ShapReport summarize(const Predictor& model, std::span<const FeatureVector> instances,
                     std::span<const FeatureVector> background, std::string label = {});

struct RankRow {
  std::string model;
  std::array<double, kNumFeatures> rank{};
};

struct RankTable {
  std::vector<RankRow> rows;
  std::array<double, kNumFeatures> mean_rank{};
  /// Competition ranks of mean_rank; features whose means agree within 1e-9
  /// share the smaller rank.
  std::array<int, kNumFeatures> overall{};
};

RankTable rank_table(const std::vector<RankRow>& rows);
RankTable rank_table(const std::vector<ShapReport>& reports);

nlohmann::json to_json(const ShapReport& report);
nlohmann::json to_json(const RankTable& table);
/// Tab-separated table with one row per model plus the overall row.
std::string format_rank_table(const RankTable& table);

}  // namespace lmsrisk
