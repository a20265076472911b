#include <algorithm>

#include "lmsrisk/error.hpp"
#include "lmsrisk/models.hpp"
#include "lmsrisk/parallel.hpp"
#include "lmsrisk/random.hpp"

namespace lmsrisk {

using nlohmann::json;

std::vector<Hyperparameters> expand_grid(const Grid& grid) {
  if (grid.empty()) throw Error(ErrorCode::EmptyGrid, "grid has no hyperparameters");
  for (const auto& [name, values] : grid) {
    if (values.empty()) throw Error(ErrorCode::EmptyGrid, "grid entry '" + name + "' has no candidates");
  }
  std::vector<Hyperparameters> out{{}};
  for (const auto& [name, values] : grid) {  // std::map iterates names in sorted order
    std::vector<Hyperparameters> next;
    next.reserve(out.size() * values.size());
    for (const auto& partial : out) {
      for (const auto& v : values) {
        auto h = partial;
        h[name] = v;
        next.push_back(std::move(h));
      }
    }
    out = std::move(next);
  }
  return out;
}

std::vector<int> stratified_folds(const std::vector<int>& y, int folds, std::uint64_t seed) {
  if (folds < 2) throw Error(ErrorCode::InvalidConfig, "folds must be >= 2");
  std::vector<int> fold(y.size(), 0);
  Rng rng(seed);
  int next = 0;
  for (int cls : {0, 1}) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if ((y[i] != 0) == (cls == 1)) rows.push_back(i);
    }
    rng.shuffle(rows);
    // Round-robin continues across classes so fold sizes stay balanced.
    for (auto r : rows) {
      fold[r] = next;
      next = (next + 1) % folds;
    }
  }
  return fold;
}

GridSearchResult grid_search(Family family, const Grid& grid, const Dataset& train_set, int folds, std::uint64_t seed) {
  const auto candidates = expand_grid(grid);
  if (folds < 2) throw Error(ErrorCode::InvalidConfig, "folds must be >= 2");
  if (train_set.size() < static_cast<std::size_t>(folds)) {
    throw Error(ErrorCode::TooFewInstances, "fewer training rows than folds");
  }
  for (const auto& h : candidates) ModelSpec{family, h, seed}.validate();

  const auto fold_of = stratified_folds(train_set.y, folds, derive_seed(seed, "grid.folds"));
  std::vector<Dataset> fit_sets(static_cast<std::size_t>(folds)), eval_sets(static_cast<std::size_t>(folds));
  for (int f = 0; f < folds; ++f) {
    std::vector<std::size_t> in, out;
    for (std::size_t i = 0; i < fold_of.size(); ++i) (fold_of[i] == f ? out : in).push_back(i);
    fit_sets[static_cast<std::size_t>(f)] = subset(train_set, in);
    eval_sets[static_cast<std::size_t>(f)] = subset(train_set, out);
  }

  const std::size_t jobs = candidates.size() * static_cast<std::size_t>(folds);
  std::vector<double> accuracy(jobs, 0.0);
  parallel_for(jobs, [&](std::size_t job) {
    const std::size_t c = job / static_cast<std::size_t>(folds);
    const std::size_t f = job % static_cast<std::size_t>(folds);
    ModelSpec spec{family, candidates[c], derive_seed(seed, "grid.fit", f)};
    const TrainedModel model = train(spec, fit_sets[f]);
    const Dataset& eval = eval_sets[f];
    const auto p = predict_proba(model, eval.x);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < p.size(); ++i) correct += predict_class(p[i]) == (eval.y[i] != 0 ? 1 : 0);
    accuracy[job] = eval.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(eval.size());
  });

  GridSearchResult result;
  std::size_t best = 0;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    CvEntry entry{ModelSpec{family, candidates[c], seed}, 0.0, {}};
    double sum = 0.0;
    for (int f = 0; f < folds; ++f) {
      const double a = accuracy[c * static_cast<std::size_t>(folds) + static_cast<std::size_t>(f)];
      entry.fold_accuracies.push_back(a);
      sum += a;
    }
    entry.mean_accuracy = sum / folds;
    if (c > 0 && entry.mean_accuracy > result.cv_table[best].mean_accuracy) best = c;
    result.cv_table.push_back(std::move(entry));
  }
  result.best_spec = result.cv_table[best].spec;
  return result;
}

Grid default_grid(Family family) {
  switch (family) {
    case Family::LogisticRegression:
      return {{"C", {0.001, 0.009, 0.1, 1.0, 10.0}}};
    case Family::GaussianNaiveBayes:
      return {{"var_smoothing", {1e-9, 1e-7, 1e-5}}};
    case Family::DecisionTree:
      return {{"min_samples_split", {2, 5}}};
    case Family::RandomForest:
      return {{"n_estimators", {700}}, {"max_features", {"log2"}}, {"min_samples_split", {2, 3}}};
    case Family::NeuralNetwork:
      return {{"hidden_layer_sizes", {json::array({100, 100})}}, {"alpha", {0.1}}};
    case Family::GradientBoosting:
      return {{"n_estimators", {400}}, {"max_depth", {15}}, {"learning_rate", {0.1}}};
    case Family::SupportVectorMachine:
      return {{"C", {1000.0}}, {"gamma", {1.0}}};
  }
  return {};
}

json to_json(const GridSearchResult& result) {
  json table = json::array();
  for (const auto& e : result.cv_table) {
    table.push_back({{"spec", to_json(e.spec)}, {"mean_accuracy", e.mean_accuracy}, {"fold_accuracies", e.fold_accuracies}});
  }
  return {{"best_spec", to_json(result.best_spec)}, {"cv_table", table}};
}

}  // namespace lmsrisk
