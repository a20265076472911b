#include "lmsrisk/explain.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <sstream>

#include "lmsrisk/error.hpp"
#include "lmsrisk/parallel.hpp"

namespace lmsrisk {
namespace {

constexpr std::size_t kFullMask = kNumCoalitions - 1;

/// |S|!(d-|S|-1)!/d! indexed by |S|.
constexpr std::array<double, kNumFeatures> kWeights = [] {
  std::array<double, kNumFeatures> w{};
  auto fact = [](std::size_t n) {
    double r = 1;
    for (std::size_t i = 2; i <= n; ++i) r *= static_cast<double>(i);
    return r;
  };
  for (std::size_t s = 0; s < kNumFeatures; ++s) w[s] = fact(s) * fact(kNumFeatures - s - 1) / fact(kNumFeatures);
  return w;
}();

/// v(empty set): mean model output over the background.
double background_mean(const Predictor& model, std::span<const FeatureVector> background) {
  std::vector<double> out(background.size());
  model.predict(background, out);
  double sum = 0;
  for (double v : out) sum += v;
  return sum / static_cast<double>(background.size());
}

/// Values of the coalitions strictly between empty and full, plus the full one.
/// Returns f(x).
double fill_coalitions(const Predictor& model, const FeatureVector& x, std::span<const FeatureVector> background,
                     double empty_value, CoalitionValues& v) {
  const std::size_t nb = background.size();
  constexpr std::size_t kMiddle = kNumCoalitions - 2;
  std::vector<FeatureVector> hybrids;
  hybrids.reserve(kMiddle * nb + 1);
  for (std::size_t mask = 1; mask < kFullMask; ++mask) {
    for (const auto& b : background) {
      FeatureVector h = b;
      for (std::size_t f = 0; f < kNumFeatures; ++f) {
        if (mask & (std::size_t{1} << f)) h[f] = x[f];
      }
      hybrids.push_back(h);
    }
  }
  hybrids.push_back(x);
  std::vector<double> out(hybrids.size());
  model.predict(hybrids, out);
  v[0] = empty_value;
  for (std::size_t mask = 1; mask < kFullMask; ++mask) {
    double sum = 0;
    const std::size_t base = (mask - 1) * nb;
    for (std::size_t i = 0; i < nb; ++i) sum += out[base + i];
    v[mask] = sum / static_cast<double>(nb);
  }
  // Same accumulation as the other coalitions so a dummy feature cancels exactly.
  double sum = 0;
  for (std::size_t i = 0; i < nb; ++i) sum += out.back();
  v[kFullMask] = sum / static_cast<double>(nb);
  return out.back();
}

void require_background(std::span<const FeatureVector> background) {
  if (background.empty()) throw Error(ErrorCode::EmptyBackground, "Shapley background set is empty");
}

}  // namespace

CoalitionValues coalition_values(const Predictor& model, const FeatureVector& instance,
                                 std::span<const FeatureVector> background) {
  require_background(background);
  CoalitionValues v{};
  fill_coalitions(model, instance, background, background_mean(model, background), v);
  return v;
}

FeatureVector shapley_from_coalitions(const CoalitionValues& v) {
  FeatureVector phi{};
  for (std::size_t i = 0; i < kNumFeatures; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    double acc = 0;
    for (std::size_t s = 0; s < kNumCoalitions; ++s) {
      if (s & bit) continue;
      acc += kWeights[static_cast<std::size_t>(std::popcount(s))] * (v[s | bit] - v[s]);
    }
    phi[i] = acc;
  }
  return phi;
}

ShapleyValues shapley_values(const Predictor& model, const FeatureVector& instance,
                             std::span<const FeatureVector> background) {
  require_background(background);
  CoalitionValues v{};
  const double output = fill_coalitions(model, instance, background, background_mean(model, background), v);
  return {v[0], shapley_from_coalitions(v), output};
}

std::array<int, kNumFeatures> rank_descending(const FeatureVector& importance) {
  std::array<std::size_t, kNumFeatures> order;
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return importance[a] > importance[b]; });
  std::array<int, kNumFeatures> rank{};
  for (std::size_t pos = 0; pos < kNumFeatures; ++pos) rank[order[pos]] = static_cast<int>(pos) + 1;
  return rank;
}

ShapReport summarize(const Predictor& model, std::span<const FeatureVector> instances,
                     std::span<const FeatureVector> background, std::string label) {
  require_background(background);
  if (instances.empty()) throw Error(ErrorCode::TooFewInstances, "Shapley summary needs at least one instance");
  ShapReport r;
  r.model = std::move(label);
  r.background_size = background.size();
  r.baseline = background_mean(model, background);
  r.instances.assign(instances.begin(), instances.end());
  r.phi.resize(instances.size());
  r.outputs.resize(instances.size());
  parallel_for(instances.size(), [&](std::size_t i) {
    CoalitionValues v{};
    r.outputs[i] = fill_coalitions(model, instances[i], background, r.baseline, v);
    r.phi[i] = shapley_from_coalitions(v);
  });
  for (const auto& p : r.phi)
    for (std::size_t f = 0; f < kNumFeatures; ++f) r.mean_abs_phi[f] += std::abs(p[f]);
  for (auto& m : r.mean_abs_phi) m /= static_cast<double>(instances.size());
  r.rank = rank_descending(r.mean_abs_phi);
  return r;
}

RankTable rank_table(const std::vector<RankRow>& rows) {
  RankTable t;
  t.rows = rows;
  if (rows.empty()) return t;
  for (const auto& row : rows)
    for (std::size_t f = 0; f < kNumFeatures; ++f) t.mean_rank[f] += row.rank[f];
  for (auto& m : t.mean_rank) m /= static_cast<double>(rows.size());
  constexpr double kTieTolerance = 1e-9;
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    int better = 0;
    for (std::size_t g = 0; g < kNumFeatures; ++g) better += t.mean_rank[g] < t.mean_rank[f] - kTieTolerance;
    t.overall[f] = better + 1;
  }
  return t;
}

RankTable rank_table(const std::vector<ShapReport>& reports) {
  std::vector<RankRow> rows;
  for (const auto& r : reports) {
    RankRow row{r.model, {}};
    for (std::size_t f = 0; f < kNumFeatures; ++f) row.rank[f] = r.rank[f];
    rows.push_back(std::move(row));
  }
  return rank_table(rows);
}

namespace {

nlohmann::json by_feature(const auto& values) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t f = 0; f < kNumFeatures; ++f) j[std::string(kFeatureNames[f])] = values[f];
  return j;
}

}  // namespace

nlohmann::json to_json(const ShapReport& r) {
  nlohmann::json points = nlohmann::json::array();
  for (std::size_t i = 0; i < r.phi.size(); ++i) {
    points.push_back({{"x", r.instances[i]}, {"phi", r.phi[i]}, {"output", r.outputs[i]}});
  }
  nlohmann::json names = nlohmann::json::array();
  for (auto n : kFeatureNames) names.push_back(std::string(n));
  return {{"model", r.model},
          {"features", names},
          {"baseline", r.baseline},
          {"background_size", r.background_size},
          {"mean_abs_phi", by_feature(r.mean_abs_phi)},
          {"rank", by_feature(r.rank)},
          {"instances", points}};
}

nlohmann::json to_json(const RankTable& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : t.rows) rows.push_back({{"model", row.model}, {"rank", by_feature(row.rank)}});
  return {{"rows", rows}, {"overall_mean_rank", by_feature(t.mean_rank)}, {"overall", by_feature(t.overall)}};
}

std::string format_rank_table(const RankTable& t) {
  std::ostringstream out;
  out << "model";
  for (auto n : kFeatureNames) out << '\t' << n;
  out << '\n';
  for (const auto& row : t.rows) {
    out << row.model;
    for (double r : row.rank) out << '\t' << r;
    out << '\n';
  }
  out << "overall";
  for (int r : t.overall) out << '\t' << r;
  out << "\nmean_rank";
  for (double m : t.mean_rank) out << '\t' << m;
  out << '\n';
  return out.str();
}

}  // namespace lmsrisk
