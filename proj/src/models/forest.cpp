#include "lmsrisk/models/tree.hpp"

#include "lmsrisk/error.hpp"
#include "lmsrisk/parallel.hpp"

namespace lmsrisk {

double ForestModel::predict(const FeatureVector& x) const {
  std::size_t votes = 0;
  for (const auto& t : trees) votes += t.predict(x) > 0.5;
  return static_cast<double>(votes) / static_cast<double>(trees.size());
}

void ForestModel::predict_batch(std::span<const FeatureVector> x, std::span<double> out) const {
  std::vector<std::size_t> votes(x.size(), 0);
  for (const auto& t : trees) {
    for (std::size_t i = 0; i < x.size(); ++i) votes[i] += t.predict(x[i]) > 0.5;
  }
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = static_cast<double>(votes[i]) / static_cast<double>(trees.size());
}

nlohmann::json ForestModel::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& t : trees) arr.push_back(t.to_json());
  return {{"trees", std::move(arr)}};
}

ForestModel ForestModel::from_json(const nlohmann::json& j) {
  ForestModel m;
  for (const auto& t : j.at("trees")) m.trees.push_back(Tree::from_json(t));
  if (m.trees.empty()) throw Error(ErrorCode::FeatureMismatch, "forest without trees");
  return m;
}

ForestModel fit_forest(const Dataset& data, const ForestOptions& options, std::uint64_t seed) {
  if (data.empty()) throw Error(ErrorCode::TooFewInstances, "random forest on empty data");
  if (options.n_estimators < 1) throw Error(ErrorCode::InvalidHyperparameter, "n_estimators must be >= 1");
  ForestModel model;
  model.trees.resize(static_cast<std::size_t>(options.n_estimators));
  const std::size_t n = data.size();
  parallel_for(model.trees.size(), [&](std::size_t t) {
    Rng rng(derive_seed(seed, "forest.tree", t));
    std::vector<std::size_t> rows(n);
    if (options.bootstrap) {
      for (auto& r : rows) r = rng.index(n);
    } else {
      for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    }
    model.trees[t] = grow_cart(data, rows, options.tree, &rng);
  });
  return model;
}

}  // namespace lmsrisk
