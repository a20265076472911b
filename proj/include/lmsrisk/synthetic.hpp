#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "lmsrisk/ingest.hpp"
#include "lmsrisk/types.hpp"

namespace lmsrisk {

inline constexpr std::size_t kNumPlantedClusters = 4;

/// Parameters of the seeded cohort generator. Students are drawn from a
/// four-component mixture over latent engagement in [0,1]^4 (canonical
/// feature order); each section gets its own raw scale per feature.
/// Final grade = 100 * clip(intercept + weights . latent + N(0, grade_noise_sd), 0, 1),
/// after which `label_noise_rate` of grades are reflected across the
/// at-risk boundary.
struct SyntheticConfig {
  std::uint64_t seed = 0;
  std::size_t n_students = 5000;
  std::size_t n_sections = 25;
  std::array<double, kNumPlantedClusters> cluster_weights{13756.0 / 84006.0, 24942.0 / 84006.0,
                                                          22646.0 / 84006.0, 22662.0 / 84006.0};
  std::array<FeatureVector, kNumPlantedClusters> cluster_centroids{{
      {0.726, 0.627, 0.805, 0.414},
      {0.802, 0.647, 0.224, 0.446},
      {0.279, 0.150, 0.134, 0.233},
      {0.310, 0.716, 0.157, 0.304},
  }};
  double feature_noise_sd = 0.20;
  double label_noise_rate = 0.10;
  FeatureVector grade_weights{0.35, 0.45, 0.10, 0.10};
  double grade_intercept = 0.51;
  double grade_noise_sd = 0.08;
  double at_risk_threshold = 70.0;
  /// Adds instructor rows plus one Career Center and one Summer section,
  /// all of which the course filter must remove.
  bool include_excluded_rows = true;

  /// Throws InvalidConfig when an invariant fails.
  void validate() const;
};

nlohmann::json to_json(const SyntheticConfig& config);
/// Missing keys keep their defaults.
SyntheticConfig synthetic_config_from_json(const nlohmann::json& j);

struct SyntheticTruth {
  struct Student {
    std::string student_id;
    std::string section_id;
    int cluster = 0;  // 1-based
    FeatureVector latent{};
  };
  std::uint64_t seed = 0;
  FeatureVector grade_weights{};
  double grade_intercept = 0.0;
  std::array<FeatureVector, kNumPlantedClusters> centroids{};
  std::array<double, kNumPlantedClusters> cluster_weights{};
  /// Feature names by descending planted weight (ties by canonical order).
  std::vector<std::string> importance_order;
  std::vector<Student> students;
};

nlohmann::json to_json(const SyntheticTruth& truth);

struct SyntheticCohort {
  CohortTable cohort;
  SyntheticTruth truth;
};

SyntheticCohort generate_synthetic(const SyntheticConfig& config);

}  // namespace lmsrisk
