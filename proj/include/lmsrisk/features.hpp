#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "lmsrisk/ingest.hpp"
#include "lmsrisk/types.hpp"

namespace lmsrisk {

// ---------------------------------------------------------------------------
// Feature selection by missingness
// ---------------------------------------------------------------------------

struct MissingnessEntry {
  std::string feature;
  std::size_t missing = 0;
  std::size_t total = 0;
  double fraction() const { return total ? static_cast<double>(missing) / static_cast<double>(total) : 1.0; }
};

struct FeatureSelection {
  std::vector<std::string> selected;
  std::vector<MissingnessEntry> missingness;  // every numeric usage field
};

/// Selects numeric usage fields whose missing fraction is strictly below
/// `max_missing_fraction`. Throws NoFeaturesSelected when none qualify.
FeatureSelection select_features(const CohortTable& cohort, double max_missing_fraction = 0.20);

/// Keeps rows where every canonical model feature is present. The canonical
/// four must all be in `selection.selected` (FeatureMismatch otherwise).
std::pair<CohortTable, std::size_t> retain_complete_rows(const CohortTable& cohort, const FeatureSelection& selection);

// ---------------------------------------------------------------------------
// Per-section min-max normalization
// ---------------------------------------------------------------------------

struct RawFeatureRow {
  std::string student_id;
  std::string section_id;
  FeatureVector raw{};
};

struct FeatureRow {
  std::string student_id;
  std::string section_id;
  FeatureVector values{};
};

/// The x_min / x_max observed in one section, per feature.
struct SectionRange {
  FeatureVector min{};
  FeatureVector max{};
};

struct FeatureMatrix {
  std::vector<FeatureRow> rows;
  std::map<std::string, SectionRange> witnesses;

  /// Normalizes an unseen raw row with its section's stored range, clamped
  /// to [0, 1]. Unknown sections are a FeatureMismatch.
  FeatureVector apply(const std::string& section_id, const FeatureVector& raw) const;

  Eigen::MatrixXd design() const;
};

/// Raw canonical features of a usage record, if all four are present.
std::optional<FeatureVector> raw_features(const LearnerUsageRecord& record);

/// (x - x_min) / (x_max - x_min) with x_min, x_max taken over each section;
/// a section whose range is zero maps that feature to 0. Throws EmptySection
/// on empty input.
FeatureMatrix normalize_per_section(const std::vector<RawFeatureRow>& rows);
/// Cohort rows must carry all four features (see retain_complete_rows).
FeatureMatrix normalize_per_section(const CohortTable& cohort);

nlohmann::json to_json(const FeatureMatrix& matrix);  // witnesses only

// ---------------------------------------------------------------------------
// Variance inflation factors
// ---------------------------------------------------------------------------

struct VifReport {
  std::vector<std::string> features;
  /// +infinity marks an exact linear dependency (R^2 > 1 - 1e-12).
  std::vector<double> vif;
  std::vector<double> r_squared;

  bool is_infinite(std::size_t j) const { return std::isinf(vif[j]); }
};

/// VIF_j = 1 / (1 - R^2_j), R^2_j from least squares of column j on the
/// other columns plus an intercept (Householder QR with column pivoting).
VifReport compute_vif(const Eigen::MatrixXd& design, std::vector<std::string> names = {});
VifReport compute_vif(const FeatureMatrix& matrix);

nlohmann::json to_json(const VifReport& report);

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

struct LabelPolicy {
  double threshold = 70.0;      // percent; at risk when grade < threshold
  bool use_adjusted_fallback = true;
};

struct LabeledInstance {
  std::string student_id;
  std::string section_id;
  FeatureVector features{};
  bool at_risk = false;
  double final_grade = 0.0;  // fraction in [0, 1]

  bool operator==(const LabeledInstance&) const = default;
};

struct LabelResult {
  std::vector<LabeledInstance> instances;
  std::size_t dropped_without_grade = 0;
};

/// Grade source: Final Calculated, else Final Adjusted when the fallback is
/// on. Rows with neither are dropped and counted.
LabelResult label(const CohortTable& cohort, const FeatureMatrix& matrix, const LabelPolicy& policy = {});

bool is_at_risk(double final_grade_fraction, const LabelPolicy& policy);

// ---------------------------------------------------------------------------
// Balancing and splitting
// ---------------------------------------------------------------------------

/// Appends uniformly drawn copies of minority rows until both classes have
/// equal counts. Throws SingleClass if a class is empty.
std::vector<LabeledInstance> oversample(const std::vector<LabeledInstance>& instances, std::uint64_t seed);

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

struct TrainTestSplit {
  std::vector<LabeledInstance> train;
  std::vector<LabeledInstance> test;
};

/// Seeded uniform permutation; the first floor(train_fraction * n) rows train.
TrainTestSplit split(const std::vector<LabeledInstance>& instances, const SplitSpec& spec);

Dataset to_dataset(const std::vector<LabeledInstance>& instances);

void write_instances(const std::filesystem::path& path, const std::vector<LabeledInstance>& instances);
std::vector<LabeledInstance> read_instances(const std::filesystem::path& path);

}  // namespace lmsrisk
