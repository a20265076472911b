#include "lmsrisk/models/boosting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lmsrisk/error.hpp"

namespace lmsrisk {
namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

// Minimum loss reduction treated as a real improvement.
constexpr double kMinGain = 1e-6;

struct Pending {
  std::size_t node;
  std::size_t begin, end;
  int depth;
};

/// One regression tree on gradient/hessian statistics.
Tree grow_newton_tree(const Dataset& data, const std::vector<double>& grad, const std::vector<double>& hess,
                      const BoostingOptions& opt) {
  Tree tree;
  std::vector<std::size_t> buffer(data.size());
  for (std::size_t i = 0; i < buffer.size(); ++i) buffer[i] = i;

  auto sums = [&](std::size_t b, std::size_t e) {
    double g = 0, h = 0;
    for (std::size_t k = b; k < e; ++k) {
      g += grad[buffer[k]];
      h += hess[buffer[k]];
    }
    return std::pair{g, h};
  };
  auto leaf_weight = [&](double g, double h) { return -g / (h + opt.reg_lambda) * opt.learning_rate; };
  auto add_node = [&](double g, double h) {
    tree.feature.push_back(-1);
    tree.threshold.push_back(0.0);
    tree.left.push_back(-1);
    tree.right.push_back(-1);
    tree.value.push_back(leaf_weight(g, h));
    tree.cover.push_back(h);
    return tree.feature.size() - 1;
  };

  auto [g0, h0] = sums(0, buffer.size());
  add_node(g0, h0);
  std::vector<Pending> stack{{0, 0, buffer.size(), 0}};
  struct Entry {
    double value, g, h;
  };
  std::vector<Entry> sorted;
  while (!stack.empty()) {
    Pending cur = stack.back();
    stack.pop_back();
    if (cur.depth >= opt.max_depth) continue;
    auto [g, h] = sums(cur.begin, cur.end);
    const double parent_score = g * g / (h + opt.reg_lambda);

    double best_gain = -std::numeric_limits<double>::infinity();
    int best_feature = -1;
    double best_threshold = 0.0;
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      sorted.clear();
      for (std::size_t k = cur.begin; k < cur.end; ++k) {
        std::size_t r = buffer[k];
        sorted.push_back({data.x[r][f], grad[r], hess[r]});
      }
      std::sort(sorted.begin(), sorted.end(), [](const Entry& a, const Entry& b) { return a.value < b.value; });
      double gl = 0, hl = 0;
      for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
        gl += sorted[k].g;
        hl += sorted[k].h;
        if (sorted[k].value == sorted[k + 1].value) continue;
        double gr = g - gl, hr = h - hl;
        if (hl < opt.min_child_weight || hr < opt.min_child_weight) continue;
        double gain = 0.5 * (gl * gl / (hl + opt.reg_lambda) + gr * gr / (hr + opt.reg_lambda) - parent_score) - opt.gamma;
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = static_cast<int>(f);
          double mid = 0.5 * (sorted[k].value + sorted[k + 1].value);
          best_threshold = mid < sorted[k + 1].value ? mid : sorted[k].value;
        }
      }
    }
    if (best_feature < 0 || !(best_gain > kMinGain)) continue;

    auto middle = std::stable_partition(buffer.begin() + static_cast<std::ptrdiff_t>(cur.begin),
                                        buffer.begin() + static_cast<std::ptrdiff_t>(cur.end), [&](std::size_t r) {
                                          return data.x[r][static_cast<std::size_t>(best_feature)] <= best_threshold;
                                        });
    std::size_t mid = static_cast<std::size_t>(middle - buffer.begin());
    auto [gl, hl] = sums(cur.begin, mid);
    auto [gr, hr] = sums(mid, cur.end);
    std::size_t l = add_node(gl, hl);
    std::size_t r = add_node(gr, hr);
    tree.feature[cur.node] = best_feature;
    tree.threshold[cur.node] = best_threshold;
    tree.left[cur.node] = static_cast<int>(l);
    tree.right[cur.node] = static_cast<int>(r);
    stack.push_back({r, mid, cur.end, cur.depth + 1});
    stack.push_back({l, cur.begin, mid, cur.depth + 1});
  }
  return tree;
}

}  // namespace

double BoostingModel::predict_margin(const FeatureVector& x, std::size_t rounds) const {
  double m = base_margin;
  rounds = std::min(rounds, trees.size());
  for (std::size_t t = 0; t < rounds; ++t) m += trees[t].predict(x);
  return m;
}

double BoostingModel::predict(const FeatureVector& x) const { return sigmoid(predict_margin(x, trees.size())); }

void BoostingModel::predict_batch(std::span<const FeatureVector> x, std::span<double> out) const {
  std::vector<double> margin(x.size(), base_margin);
  for (const auto& t : trees) {
    for (std::size_t i = 0; i < x.size(); ++i) margin[i] += t.predict(x[i]);
  }
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = sigmoid(margin[i]);
}

nlohmann::json BoostingModel::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& t : trees) arr.push_back(t.to_json());
  return {{"base_margin", base_margin}, {"trees", std::move(arr)}};
}

BoostingModel BoostingModel::from_json(const nlohmann::json& j) {
  BoostingModel m;
  m.base_margin = j.at("base_margin").get<double>();
  for (const auto& t : j.at("trees")) m.trees.push_back(Tree::from_json(t));
  return m;
}

BoostingModel fit_boosting(const Dataset& data, const BoostingOptions& opt) {
  const std::size_t n = data.size();
  const std::size_t pos = data.positives();
  if (pos == 0 || pos == n) throw Error(ErrorCode::SingleClassTraining, "gradient boosting needs both classes");

  BoostingModel model;
  double prior = static_cast<double>(pos) / static_cast<double>(n);
  model.base_margin = std::log(prior / (1.0 - prior));

  std::vector<double> margin(n, model.base_margin), grad(n), hess(n);
  for (int round = 0; round < opt.n_estimators; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      double p = sigmoid(margin[i]);
      grad[i] = p - data.y[i];
      hess[i] = std::max(p * (1.0 - p), 1e-16);
    }
    Tree t = grow_newton_tree(data, grad, hess, opt);
    for (std::size_t i = 0; i < n; ++i) margin[i] += t.predict(data.x[i]);
    model.trees.push_back(std::move(t));
  }
  return model;
}

}  // namespace lmsrisk
