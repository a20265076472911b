#include "lmsrisk/models/tree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "lmsrisk/error.hpp"

namespace lmsrisk {

std::size_t Tree::leaf_of(const FeatureVector& x) const {
  std::size_t node = 0;
  while (feature[node] >= 0) {
    node = static_cast<std::size_t>(x[static_cast<std::size_t>(feature[node])] <= threshold[node] ? left[node] : right[node]);
  }
  return node;
}

std::size_t Tree::depth() const {
  if (feature.empty()) return 0;
  std::vector<std::size_t> depth_of(size(), 0);
  std::size_t deepest = 0;
  // Children always follow their parent in the arrays.
  for (std::size_t n = 0; n < size(); ++n) {
    deepest = std::max(deepest, depth_of[n]);
    if (feature[n] >= 0) {
      depth_of[static_cast<std::size_t>(left[n])] = depth_of[n] + 1;
      depth_of[static_cast<std::size_t>(right[n])] = depth_of[n] + 1;
    }
  }
  return deepest;
}

nlohmann::json Tree::to_json() const {
  return {{"feature", feature}, {"threshold", threshold}, {"left", left},
          {"right", right},     {"value", value},         {"cover", cover}};
}

Tree Tree::from_json(const nlohmann::json& j) {
  Tree t;
  t.feature = j.at("feature").get<std::vector<int>>();
  t.threshold = j.at("threshold").get<std::vector<double>>();
  t.left = j.at("left").get<std::vector<int>>();
  t.right = j.at("right").get<std::vector<int>>();
  t.value = j.at("value").get<std::vector<double>>();
  t.cover = j.at("cover").get<std::vector<double>>();
  const std::size_t n = t.feature.size();
  if (n == 0 || t.threshold.size() != n || t.left.size() != n || t.right.size() != n || t.value.size() != n ||
      t.cover.size() != n) {
    throw Error(ErrorCode::FeatureMismatch, "tree arrays have inconsistent lengths");
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (t.feature[k] >= static_cast<int>(kNumFeatures)) throw Error(ErrorCode::FeatureMismatch, "tree splits on unknown feature");
    if (t.feature[k] >= 0 && (t.left[k] <= static_cast<int>(k) || t.right[k] <= static_cast<int>(k) ||
                              t.left[k] >= static_cast<int>(n) || t.right[k] >= static_cast<int>(n))) {
      throw Error(ErrorCode::FeatureMismatch, "tree child index out of order");
    }
  }
  return t;
}

namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double score = -std::numeric_limits<double>::infinity();  // weighted child impurity, negated
};

double gini_sum(double pos, double n) {
  // n * gini = n * (1 - p^2 - q^2) = 2 * pos * neg / n
  return n > 0 ? 2.0 * pos * (n - pos) / n : 0.0;
}

struct Pending {
  std::size_t node;
  std::size_t begin, end;  // range into the shared row buffer
  int depth;
};

}  // namespace

Tree grow_cart(const Dataset& data, const std::vector<std::size_t>& rows, const CartOptions& options, Rng* rng) {
  if (rows.empty()) throw Error(ErrorCode::TooFewInstances, "cannot grow a tree on zero rows");
  if (options.max_features > 0 && options.max_features < static_cast<int>(kNumFeatures) && rng == nullptr) {
    throw Error(ErrorCode::InvalidHyperparameter, "feature subsampling needs a random stream");
  }

  Tree tree;
  std::vector<std::size_t> buffer = rows;
  std::vector<std::pair<double, int>> sorted;
  sorted.reserve(rows.size());

  auto add_node = [&](double value, double cover) {
    tree.feature.push_back(-1);
    tree.threshold.push_back(0.0);
    tree.left.push_back(-1);
    tree.right.push_back(-1);
    tree.value.push_back(value);
    tree.cover.push_back(cover);
    return tree.feature.size() - 1;
  };

  auto positives_in = [&](std::size_t b, std::size_t e) {
    double p = 0;
    for (std::size_t k = b; k < e; ++k) p += data.y[buffer[k]] != 0;
    return p;
  };

  {
    double n = static_cast<double>(buffer.size());
    add_node(positives_in(0, buffer.size()) / n, n);
  }
  // Depth-first with the left child expanded first, so node numbering is
  // a fixed function of the data.
  std::vector<Pending> stack{{0, 0, buffer.size(), 0}};
  while (!stack.empty()) {
    Pending cur = stack.back();
    stack.pop_back();
    const std::size_t count = cur.end - cur.begin;
    const double n = static_cast<double>(count);
    const double pos = positives_in(cur.begin, cur.end);
    if (pos == 0.0 || pos == n) continue;
    if (static_cast<int>(count) < options.min_samples_split) continue;
    if (options.max_depth > 0 && cur.depth >= options.max_depth) continue;

    // Candidate features.
    std::vector<std::size_t> candidates;
    auto is_constant = [&](std::size_t f) {
      double first = data.x[buffer[cur.begin]][f];
      for (std::size_t k = cur.begin + 1; k < cur.end; ++k) {
        if (data.x[buffer[k]][f] != first) return false;
      }
      return true;
    };
    if (options.max_features <= 0 || options.max_features >= static_cast<int>(kNumFeatures)) {
      for (std::size_t f = 0; f < kNumFeatures; ++f) {
        if (!is_constant(f)) candidates.push_back(f);
      }
    } else {
      std::vector<std::size_t> order(kNumFeatures);
      std::iota(order.begin(), order.end(), 0);
      rng->shuffle(order);
      for (std::size_t f : order) {
        if (candidates.size() >= static_cast<std::size_t>(options.max_features)) break;
        if (!is_constant(f)) candidates.push_back(f);
      }
      std::sort(candidates.begin(), candidates.end());
    }

    Split best;
    for (std::size_t f : candidates) {
      sorted.clear();
      for (std::size_t k = cur.begin; k < cur.end; ++k) sorted.emplace_back(data.x[buffer[k]][f], data.y[buffer[k]]);
      std::sort(sorted.begin(), sorted.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      double left_n = 0, left_pos = 0;
      for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
        left_n += 1;
        left_pos += sorted[k].second != 0;
        if (sorted[k].first == sorted[k + 1].first) continue;
        double right_n = n - left_n;
        if (left_n < options.min_samples_leaf || right_n < options.min_samples_leaf) continue;
        double score = -(gini_sum(left_pos, left_n) + gini_sum(pos - left_pos, right_n));
        if (score > best.score) {
          best.score = score;
          best.feature = static_cast<int>(f);
          double mid = 0.5 * (sorted[k].first + sorted[k + 1].first);
          // Midpoint can round up to the right value for adjacent doubles.
          best.threshold = mid < sorted[k + 1].first ? mid : sorted[k].first;
        }
      }
    }
    if (best.feature < 0) continue;

    auto middle = std::stable_partition(buffer.begin() + static_cast<std::ptrdiff_t>(cur.begin),
                                        buffer.begin() + static_cast<std::ptrdiff_t>(cur.end), [&](std::size_t r) {
                                          return data.x[r][static_cast<std::size_t>(best.feature)] <= best.threshold;
                                        });
    std::size_t mid = static_cast<std::size_t>(middle - buffer.begin());
    double ln = static_cast<double>(mid - cur.begin);
    double rn = static_cast<double>(cur.end - mid);
    std::size_t l = add_node(positives_in(cur.begin, mid) / ln, ln);
    std::size_t r = add_node(positives_in(mid, cur.end) / rn, rn);
    tree.feature[cur.node] = best.feature;
    tree.threshold[cur.node] = best.threshold;
    tree.left[cur.node] = static_cast<int>(l);
    tree.right[cur.node] = static_cast<int>(r);
    stack.push_back({r, mid, cur.end, cur.depth + 1});
    stack.push_back({l, cur.begin, mid, cur.depth + 1});
  }
  return tree;
}

}  // namespace lmsrisk
