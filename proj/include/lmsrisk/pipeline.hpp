#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lmsrisk/cluster.hpp"
#include "lmsrisk/features.hpp"
#include "lmsrisk/models.hpp"
#include "lmsrisk/synthetic.hpp"

namespace lmsrisk {

inline constexpr const char* kToolVersion = "1.0.0";

enum class OversamplePlacement { BeforeSplit, TrainOnly, None };

struct PipelineConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";

  // Exactly one input source: a pair of exports or a synthetic cohort.
  std::optional<std::filesystem::path> lur_path;
  std::optional<std::filesystem::path> gr_path;
  std::optional<SyntheticConfig> synthetic;

  double max_missing_fraction = 0.20;
  LabelPolicy label_policy;
  double train_fraction = 0.8;
  OversamplePlacement oversample = OversamplePlacement::BeforeSplit;

  std::vector<Family> families{std::begin(kAllFamilies), std::end(kAllFamilies)};
  std::map<Family, Grid> grids;  // families without an entry use default_grid()
  int cv_folds = 3;

  std::size_t shap_background = 100;
  std::size_t shap_instances = 200;

  int k_min = 1;
  int k_max = 10;
  KMeansOptions kmeans;
  /// Ks to profile instead of the elbow and silhouette choices.
  std::vector<int> cluster_k_override;

  double alpha = 0.05;

  /// InvalidConfig on inconsistent settings.
  void validate() const;
  Grid grid_for(Family family) const;
};

nlohmann::json to_json(const PipelineConfig& config);
/// Missing keys keep their defaults. A "synthetic" value may be an object
/// or a path to a JSON file, resolved relative to `base_dir`.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

// Field parsers shared by the config reader and the CLI; all throw InvalidConfig.
OversamplePlacement parse_oversample(const std::string& s);
/// Accepts family names or the single word "all".
std::vector<Family> parse_families(const std::vector<std::string>& names);
/// "lo..hi".
std::pair<int, int> parse_k_range(const std::string& s);

/// SHA-256 of the configuration with output_dir removed, so the same settings
/// written to different directories hash equally.
std::string config_hash(const PipelineConfig& config);

enum class Stage { Ingest, Featurize, Train, Explain, Cluster, Stats, Report };
std::string to_string(Stage stage);

struct StageRecord {
  Stage stage = Stage::Ingest;
  std::map<std::string, std::string> inputs;   // relative path -> SHA-256
  std::map<std::string, std::string> outputs;  // relative path -> SHA-256
  double seconds = 0.0;
};

/// Per-stage messages go through this sink; verbosity comes from the
/// LMSRISK_VERBOSITY environment variable (0 quiet, 1 normal, 2 debug).
int verbosity();
void log_message(int level, const std::string& message);

// Each stage reads its inputs from config.output_dir, writes its outputs
// there, and merges its record into manifest.json. Missing upstream files
// raise MissingArtifact naming the stage that produces them.
StageRecord run_ingest(const PipelineConfig& config);
StageRecord run_featurize(const PipelineConfig& config);
StageRecord run_train(const PipelineConfig& config);
StageRecord run_explain(const PipelineConfig& config);
StageRecord run_cluster(const PipelineConfig& config);
StageRecord run_stats(const PipelineConfig& config);
StageRecord run_report(const PipelineConfig& config);

/// All stages in order.
std::vector<StageRecord> run_pipeline(const PipelineConfig& config);

/// Writes the raw (unfiltered) synthetic exports plus truth sidecar.
void write_synthetic_exports(const SyntheticConfig& config, const std::filesystem::path& dir);

namespace artifacts {
inline constexpr const char* kCohortLur = "data/cohort_lur.csv";
inline constexpr const char* kCohortGr = "data/cohort_gr.csv";
inline constexpr const char* kIngestSummary = "data/ingest_summary.json";
inline constexpr const char* kTruth = "data/truth.json";
inline constexpr const char* kInstances = "data/instances.csv";
inline constexpr const char* kTrain = "data/train.csv";
inline constexpr const char* kTest = "data/test.csv";
inline constexpr const char* kFeatures = "data/features.json";
inline constexpr const char* kTrainSummary = "metrics/summary.json";
inline constexpr const char* kTrainTable = "metrics/summary.tsv";
inline constexpr const char* kRankTable = "explain/rank_table.json";
inline constexpr const char* kRankTableText = "explain/rank_table.tsv";
inline constexpr const char* kCluster = "cluster/cluster.json";
inline constexpr const char* kStats = "stats/stats.json";
inline constexpr const char* kStatsText = "stats/stats.txt";
inline constexpr const char* kReport = "report/report.json";
inline constexpr const char* kManifest = "manifest.json";

std::string model(Family family);    // models/<family>.json
std::string metrics(Family family);  // metrics/<family>.json
std::string roc_svg(Family family);  // metrics/<family>_roc.svg
std::string shap(Family family);     // explain/<family>_shap.json
std::string shap_svg(Family family); // explain/<family>_shap.svg
}  // namespace artifacts

}  // namespace lmsrisk
