#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "json.hpp"
#include "lmsrisk/random.hpp"
#include "lmsrisk/types.hpp"

namespace lmsrisk {

/// Binary tree in flat arrays. Node 0 is the root; feature < 0 marks a leaf.
/// Samples with x[feature] <= threshold go left.
struct Tree {
  std::vector<int> feature;
  std::vector<double> threshold;
  std::vector<int> left;
  std::vector<int> right;
  std::vector<double> value;   // positive-class fraction (CART) or leaf weight (boosting)
  std::vector<double> cover;   // samples (CART) or hessian sum (boosting)

  std::size_t size() const { return feature.size(); }
  std::size_t leaf_of(const FeatureVector& x) const;
  double predict(const FeatureVector& x) const { return value[leaf_of(x)]; }
  std::size_t depth() const;

  nlohmann::json to_json() const;
  static Tree from_json(const nlohmann::json& j);
};

struct CartOptions {
  int max_depth = 0;  // 0 = unlimited
  int min_samples_split = 2;
  int min_samples_leaf = 1;
  /// Features examined per split; 0 = all. Features are drawn in random
  /// order and constant ones are skipped without counting, then the chosen
  /// set is scanned in canonical order.
  int max_features = 0;
};

/// CART with Gini impurity over the (possibly repeated) rows in `rows`.
/// Thresholds are midpoints between consecutive distinct values. The best
/// impurity decrease wins with ties going to the first feature/threshold in
/// canonical order; zero-gain splits are allowed so impure nodes keep growing
/// until pure or blocked by the options. `rng` is needed only when
/// max_features > 0.
Tree grow_cart(const Dataset& data, const std::vector<std::size_t>& rows, const CartOptions& options, Rng* rng = nullptr);

struct DecisionTreeModel {
  Tree tree;

  double predict(const FeatureVector& x) const { return tree.predict(x); }

  nlohmann::json to_json() const { return tree.to_json(); }
  static DecisionTreeModel from_json(const nlohmann::json& j) { return {Tree::from_json(j)}; }
};

struct ForestOptions {
  int n_estimators = 700;
  bool bootstrap = true;
  CartOptions tree;
};

/// Probability = fraction of trees voting at-risk (leaf fraction > 0.5).
struct ForestModel {
  std::vector<Tree> trees;

  double predict(const FeatureVector& x) const;
  /// Same values as predict(); walks one tree over every row before the next.
  void predict_batch(std::span<const FeatureVector> x, std::span<double> out) const;

  nlohmann::json to_json() const;
  static ForestModel from_json(const nlohmann::json& j);
};

/// Tree t uses seed derive_seed(seed, "forest.tree", t); trees are grown in
/// parallel and the result does not depend on the thread count.
ForestModel fit_forest(const Dataset& data, const ForestOptions& options, std::uint64_t seed);

}  // namespace lmsrisk
