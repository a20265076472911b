#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <variant>
#include <vector>

#include "json.hpp"
#include "lmsrisk/models/boosting.hpp"
#include "lmsrisk/models/logistic.hpp"
#include "lmsrisk/models/mlp.hpp"
#include "lmsrisk/models/model_spec.hpp"
#include "lmsrisk/models/naive_bayes.hpp"
#include "lmsrisk/models/svm.hpp"
#include "lmsrisk/models/tree.hpp"
#include "lmsrisk/predictor.hpp"
#include "lmsrisk/types.hpp"

namespace lmsrisk {

using FittedParameters = std::variant<LogisticModel, NaiveBayesModel, DecisionTreeModel, ForestModel, MlpModel,
                                      BoostingModel, SvmModel>;

/// A fitted classifier of one family. Immutable after training and safe to
/// share across threads for prediction.
class TrainedModel final : public Predictor {
 public:
  TrainedModel(ModelSpec spec, FittedParameters params) : spec_(std::move(spec)), params_(std::move(params)) {}

  const ModelSpec& spec() const { return spec_; }
  const FittedParameters& params() const { return params_; }

  double predict_one(const FeatureVector& x) const;
  void predict(std::span<const FeatureVector> x, std::span<double> out) const override;

  nlohmann::json to_json() const;
  /// Rejects documents with another format version or feature ordering
  /// (FeatureMismatch).
  static TrainedModel from_json(const nlohmann::json& j);

  void save(const std::filesystem::path& path) const;
  static TrainedModel load(const std::filesystem::path& path);

 private:
  ModelSpec spec_;
  FittedParameters params_;
};

inline constexpr int kModelFormatVersion = 1;

/// Fits `spec` on `train`. Every family except the tree families throws
/// SingleClassTraining on one-class data.
TrainedModel train(const ModelSpec& spec, const Dataset& train);

std::vector<double> predict_proba(const TrainedModel& model, std::span<const FeatureVector> instances);
/// Row-major rows of arbitrary width; anything other than four columns is a
/// FeatureMismatch.
std::vector<double> predict_proba(const TrainedModel& model, const std::vector<std::vector<double>>& rows);

/// Class decision used everywhere: at risk iff probability > 0.5.
inline int predict_class(double probability) { return probability > 0.5 ? 1 : 0; }

// ---------------------------------------------------------------------------
// Grid search
// ---------------------------------------------------------------------------

using Grid = std::map<std::string, std::vector<nlohmann::json>>;

struct CvEntry {
  ModelSpec spec;
  double mean_accuracy = 0.0;
  std::vector<double> fold_accuracies;
};

struct GridSearchResult {
  ModelSpec best_spec;
  std::vector<CvEntry> cv_table;
};

/// Candidates in Cartesian order over the sorted hyperparameter names, last
/// name varying fastest.
std::vector<Hyperparameters> expand_grid(const Grid& grid);

/// Stratified fold ids (0..folds-1), fixed by seed.
std::vector<int> stratified_folds(const std::vector<int>& y, int folds, std::uint64_t seed);

/// Exhaustive search scored by mean fold accuracy; ties keep the earlier
/// candidate. Every candidate sees the same folds.
GridSearchResult grid_search(Family family, const Grid& grid, const Dataset& train, int folds, std::uint64_t seed);

/// Default grids, anchored at the reported tuned values.
Grid default_grid(Family family);

nlohmann::json to_json(const GridSearchResult& result);

}  // namespace lmsrisk
