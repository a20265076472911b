#include "lmsrisk/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "lmsrisk/error.hpp"
#include "lmsrisk/random.hpp"

namespace lmsrisk {
namespace {

constexpr std::size_t kEnumerateStarts = 64;

double sq_dist(const FeatureVector& a, const FeatureVector& b) {
  double s = 0;
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    const double d = a[f] - b[f];
    s += d * d;
  }
  return s;
}

/// k distinct points in draw order.
std::vector<FeatureVector> sample_distinct(std::span<const FeatureVector> points, int k, Rng& rng) {
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<FeatureVector> chosen;
  // Partial Fisher-Yates, skipping duplicates of already chosen points.
  for (std::size_t i = 0; i < order.size() && chosen.size() < static_cast<std::size_t>(k); ++i) {
    const std::size_t j = i + rng.index(order.size() - i);
    std::swap(order[i], order[j]);
    const FeatureVector& p = points[order[i]];
    if (std::find(chosen.begin(), chosen.end(), p) == chosen.end()) chosen.push_back(p);
  }
  return chosen;
}

void validate_k(std::span<const FeatureVector> points, int k) {
  if (points.empty()) throw Error(ErrorCode::EmptyInput, "k-means on an empty matrix");
  if (k < 1) throw Error(ErrorCode::InvalidConfig, "k must be >= 1");
  const std::size_t distinct = count_distinct(points);
  if (static_cast<std::size_t>(k) > distinct) {
    throw Error(ErrorCode::KTooLarge,
                "k = " + std::to_string(k) + " exceeds the " + std::to_string(distinct) + " distinct points");
  }
}

std::vector<FeatureVector> cluster_means(std::span<const FeatureVector> points, const std::vector<int>& assign,
                                         std::size_t k, std::vector<std::size_t>& count) {
  std::vector<FeatureVector> mean(k, FeatureVector{});
  count.assign(k, 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto c = static_cast<std::size_t>(assign[i]);
    for (std::size_t f = 0; f < kNumFeatures; ++f) mean[c][f] += points[i][f];
    ++count[c];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (count[c] > 0) {
      for (auto& v : mean[c]) v /= static_cast<double>(count[c]);
    }
  }
  return mean;
}

/// Hartigan single-point transfers: move a point to another cluster whenever
/// that lowers the SSE, until no move does. Every transfer strictly lowers
/// inertia, so a Lloyd fixed point only ever improves.
void hartigan_refine(std::span<const FeatureVector> points, std::vector<FeatureVector>& centroids,
                     std::vector<int>& assign, double& inertia, LloydTrace& trace, int max_passes) {
  const std::size_t k = centroids.size();
  std::vector<std::size_t> count;
  centroids = cluster_means(points, assign, k, count);
  for (int pass = 0; pass < max_passes; ++pass) {
    bool moved = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto a = static_cast<std::size_t>(assign[i]);
      if (count[a] <= 1) continue;
      const double na = static_cast<double>(count[a]);
      const double remove_gain = na / (na - 1.0) * sq_dist(points[i], centroids[a]);
      std::size_t target = a;
      double best_cost = remove_gain;
      for (std::size_t b = 0; b < k; ++b) {
        if (b == a) continue;
        const double nb = static_cast<double>(count[b]);
        const double cost = nb / (nb + 1.0) * sq_dist(points[i], centroids[b]);
        if (cost < best_cost) best_cost = cost, target = b;
      }
      // Margin keeps rounding noise from cycling points back and forth.
      if (target == a || remove_gain - best_cost <= 1e-12 * (1.0 + remove_gain)) continue;
      assign[i] = static_cast<int>(target);
      centroids = cluster_means(points, assign, k, count);
      moved = true;
    }
    if (!moved) break;
    const double next = compute_inertia(points, centroids, assign);
    if (next > inertia) break;
    inertia = next;
    trace.inertia.push_back(inertia);
  }
}

/// Number of k-subsets of m items, saturating just above `cap`.
std::size_t choose_capped(std::size_t m, std::size_t k, std::size_t cap) {
  if (k > m) return 0;
  std::size_t c = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    c = c * (m - k + i) / i;
    if (c > cap) return cap + 1;
  }
  return c;
}

/// Every k-subset of the distinct points in lexicographic order when there
/// are at most kEnumerateStarts of them; otherwise n_restarts seeded draws,
/// redrawn (bounded) when a set repeats an earlier restart's.
std::vector<std::vector<FeatureVector>> starting_sets(std::span<const FeatureVector> points, int k, std::uint64_t seed,
                                                      int n_restarts) {
  const std::set<FeatureVector> unique(points.begin(), points.end());
  const std::vector<FeatureVector> distinct(unique.begin(), unique.end());
  const auto kk = static_cast<std::size_t>(k);
  std::vector<std::vector<FeatureVector>> out;
  if (choose_capped(distinct.size(), kk, kEnumerateStarts) <= kEnumerateStarts) {
    std::vector<std::size_t> idx(kk);
    std::iota(idx.begin(), idx.end(), 0);
    while (true) {
      std::vector<FeatureVector> set;
      for (auto i : idx) set.push_back(distinct[i]);
      out.push_back(std::move(set));
      std::size_t pos = kk;
      while (pos > 0 && idx[pos - 1] == distinct.size() - kk + pos - 1) --pos;
      if (pos == 0) break;
      ++idx[pos - 1];
      for (std::size_t j = pos; j < kk; ++j) idx[j] = idx[j - 1] + 1;
    }
    return out;
  }
  std::set<std::vector<FeatureVector>> tried;
  for (int r = 0; r < n_restarts; ++r) {
    Rng rng(derive_seed(seed, "kmeans.restart", static_cast<std::uint64_t>(r)));
    std::vector<FeatureVector> init;
    for (int attempt = 0; attempt < 32; ++attempt) {
      init = sample_distinct(points, k, rng);
      std::vector<FeatureVector> key = init;
      std::sort(key.begin(), key.end());
      if (tried.insert(std::move(key)).second) break;
    }
    out.push_back(std::move(init));
  }
  return out;
}

}  // namespace

double compute_inertia(std::span<const FeatureVector> points, const std::vector<FeatureVector>& centroids,
                       const std::vector<int>& assignments) {
  double s = 0;
  for (std::size_t i = 0; i < points.size(); ++i) s += sq_dist(points[i], centroids[static_cast<std::size_t>(assignments[i])]);
  return s;
}

std::vector<int> assign_nearest(std::span<const FeatureVector> points, const std::vector<FeatureVector>& centroids) {
  std::vector<int> out(points.size(), 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
      const double d = sq_dist(points[i], centroids[c]);
      if (d < best) best = d, out[i] = static_cast<int>(c);
    }
  }
  return out;
}

std::size_t count_distinct(std::span<const FeatureVector> points) {
  std::set<FeatureVector> s(points.begin(), points.end());
  return s.size();
}

ClusterModel lloyd(std::span<const FeatureVector> points, std::vector<FeatureVector> centroids,
                   const KMeansOptions& options) {
  const std::size_t k = centroids.size();
  ClusterModel m;
  m.k = static_cast<int>(k);
  LloydTrace trace;
  std::vector<int> assign = assign_nearest(points, centroids);
  double inertia = compute_inertia(points, centroids, assign);
  trace.inertia.push_back(inertia);

  int iter = 0;
  for (; iter < options.max_iter; ++iter) {
    std::vector<FeatureVector> next(k, FeatureVector{});
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto c = static_cast<std::size_t>(assign[i]);
      for (std::size_t f = 0; f < kNumFeatures; ++f) next[c][f] += points[i][f];
      ++count[c];
    }
    std::vector<double> dist(points.size());
    bool have_dist = false;
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] > 0) {
        for (auto& v : next[c]) v /= static_cast<double>(count[c]);
        continue;
      }
      if (!have_dist) {
        for (std::size_t i = 0; i < points.size(); ++i) dist[i] = sq_dist(points[i], centroids[static_cast<std::size_t>(assign[i])]);
        have_dist = true;
      }
      const auto far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
      next[c] = points[far];
      dist[far] = -1.0;  // not reused by another empty cluster
    }
    double shift = 0;
    for (std::size_t c = 0; c < k; ++c) shift = std::max(shift, std::sqrt(sq_dist(next[c], centroids[c])));

    std::vector<int> next_assign = assign_nearest(points, next);
    const double next_inertia = compute_inertia(points, next, next_assign);
    if (next_inertia > inertia) break;  // rounding noise only; exact Lloyd steps never increase inertia
    centroids = std::move(next);
    assign = std::move(next_assign);
    inertia = next_inertia;
    trace.inertia.push_back(inertia);
    if (shift < options.tol) {
      ++iter;
      break;
    }
  }
  if (options.hartigan_passes > 0) {
    std::vector<FeatureVector> refined = centroids;
    std::vector<int> refined_assign = assign;
    double refined_inertia = inertia;
    LloydTrace refined_trace = trace;
    hartigan_refine(points, refined, refined_assign, refined_inertia, refined_trace, options.hartigan_passes);
    if (refined_inertia < inertia) {
      centroids = std::move(refined);
      assign = std::move(refined_assign);
      inertia = refined_inertia;
      trace = std::move(refined_trace);
    }
  }
  m.centroids = std::move(centroids);
  m.assignments = std::move(assign);
  m.inertia = inertia;
  m.n_iterations = iter;
  m.traces.push_back(std::move(trace));
  return m;
}

ClusterModel kmeans_fit(std::span<const FeatureVector> points, int k, std::uint64_t seed, const KMeansOptions& options,
                        const std::vector<std::vector<FeatureVector>>& warm_starts) {
  validate_k(points, k);
  if (options.n_restarts < 1) throw Error(ErrorCode::InvalidConfig, "n_restarts must be >= 1");
  const std::vector<std::vector<FeatureVector>> seeded = starting_sets(points, k, seed, options.n_restarts);
  ClusterModel best;
  std::vector<LloydTrace> traces;
  const std::size_t runs = seeded.size() + warm_starts.size();
  for (std::size_t r = 0; r < runs; ++r) {
    std::vector<FeatureVector> init = r < seeded.size() ? seeded[r] : warm_starts[r - seeded.size()];
    if (init.size() != static_cast<std::size_t>(k)) throw Error(ErrorCode::InvalidConfig, "warm start has wrong k");
    ClusterModel run = lloyd(points, std::move(init), options);
    traces.push_back(run.traces.front());
    if (r == 0 || run.inertia < best.inertia) {
      best = std::move(run);
      best.best_restart = static_cast<int>(r);
    }
  }
  best.seed = seed;
  best.traces = std::move(traces);
  return best;
}

double silhouette_mean(std::span<const FeatureVector> points, const std::vector<int>& assignments, int k) {
  std::vector<std::size_t> size(static_cast<std::size_t>(k), 0);
  for (int a : assignments) ++size[static_cast<std::size_t>(a)];
  if (std::count_if(size.begin(), size.end(), [](std::size_t s) { return s > 0; }) < 2) {
    throw Error(ErrorCode::SingleCluster, "silhouette needs at least two non-empty clusters");
  }
  const std::size_t n = points.size();
  double total = 0;
  std::vector<double> sum(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(sum.begin(), sum.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) sum[static_cast<std::size_t>(assignments[j])] += std::sqrt(sq_dist(points[i], points[j]));
    }
    const auto own = static_cast<std::size_t>(assignments[i]);
    if (size[own] <= 1) continue;  // singleton scores 0
    const double a = sum[own] / static_cast<double>(size[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < sum.size(); ++c) {
      if (c != own && size[c] > 0) b = std::min(b, sum[c] / static_cast<double>(size[c]));
    }
    const double denom = std::max(a, b);
    if (denom > 0) total += (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

double silhouette_mean(std::span<const FeatureVector> points, const ClusterModel& model) {
  return silhouette_mean(points, model.assignments, model.k);
}

int elbow_knee(const std::vector<std::pair<int, double>>& pts) {
  if (pts.empty()) throw Error(ErrorCode::EmptyInput, "empty k-selection curve");
  if (pts.size() < 3) return pts.front().first;
  const double k0 = pts.front().first, k1 = pts.back().first;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& p : pts) lo = std::min(lo, p.second), hi = std::max(hi, p.second);
  if (!(hi > lo)) return pts.front().first;
  auto nx = [&](double k) { return (k - k0) / (k1 - k0); };
  auto ny = [&](double v) { return (v - lo) / (hi - lo); };
  const double x0 = 0, y0 = ny(pts.front().second), x1 = 1, y1 = ny(pts.back().second);
  const double dx = x1 - x0, dy = y1 - y0, len = std::hypot(dx, dy);
  int best_k = pts.front().first;
  double best = -1;
  for (const auto& p : pts) {
    const double d = std::abs(dy * nx(p.first) - dx * ny(p.second) + x1 * y0 - y1 * x0) / len;
    if (d > best + 1e-12) best = d, best_k = p.first;
  }
  return best_k;
}

KSelection select_k(std::span<const FeatureVector> points, int k_min, int k_max, std::uint64_t seed,
                    const KMeansOptions& options) {
  if (k_min < 1 || k_max < k_min) throw Error(ErrorCode::InvalidConfig, "k range must satisfy 1 <= k_min <= k_max");
  if (points.empty()) throw Error(ErrorCode::EmptyInput, "k selection on an empty matrix");
  validate_k(points, k_max);
  KSelection sel;
  sel.elbow.method = KMethod::Elbow;
  sel.silhouette.method = KMethod::Silhouette;
  for (int k = k_min; k <= k_max; ++k) {
    std::vector<std::vector<FeatureVector>> warm;
    if (!sel.models.empty()) {
      std::vector<FeatureVector> start = sel.models.back().centroids;
      const auto nearest = assign_nearest(points, start);
      double far_d = -1;
      std::size_t far = 0;
      for (std::size_t i = 0; i < points.size(); ++i) {
        const double d = sq_dist(points[i], start[static_cast<std::size_t>(nearest[i])]);
        if (d > far_d) far_d = d, far = i;
      }
      start.push_back(points[far]);
      warm.push_back(std::move(start));
    }
    sel.models.push_back(kmeans_fit(points, k, derive_seed(seed, "kmeans.k", static_cast<std::uint64_t>(k)), options, warm));
    sel.elbow.points.emplace_back(k, sel.models.back().inertia);
    if (k >= 2) sel.silhouette.points.emplace_back(k, silhouette_mean(points, sel.models.back()));
  }
  sel.elbow.chosen_k = elbow_knee(sel.elbow.points);
  if (!sel.silhouette.points.empty()) {
    auto best = sel.silhouette.points.front();
    for (const auto& p : sel.silhouette.points) {
      if (p.second > best.second) best = p;
    }
    sel.silhouette.chosen_k = best.first;
  }
  return sel;
}

KSelectionCurve elbow_curve(std::span<const FeatureVector> points, int k_min, int k_max, std::uint64_t seed,
                            const KMeansOptions& options) {
  KSelection sel = select_k(points, k_min, k_max, seed, options);
  return sel.elbow;
}

ClusterSummary summarize_clusters(const ClusterModel& model, std::span<const FeatureVector> points,
                                  std::span<const double> grades) {
  if (model.assignments.size() != points.size() || grades.size() != points.size()) {
    throw Error(ErrorCode::FeatureMismatch, "assignments, points and grades differ in length");
  }
  const auto k = static_cast<std::size_t>(model.k);
  std::vector<ClusterProfile> prof(k);
  for (std::size_t c = 0; c < k; ++c) prof[c].original_index = static_cast<int>(c);
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto& p = prof[static_cast<std::size_t>(model.assignments[i])];
    ++p.count;
    for (std::size_t f = 0; f < kNumFeatures; ++f) p.mean[f] += points[i][f];
    p.grade_mean += grades[i];
  }
  for (auto& p : prof) {
    if (p.count == 0) continue;
    for (auto& v : p.mean) v /= static_cast<double>(p.count);
    p.grade_mean /= static_cast<double>(p.count);
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto& p = prof[static_cast<std::size_t>(model.assignments[i])];
    for (std::size_t f = 0; f < kNumFeatures; ++f) p.sd[f] += (points[i][f] - p.mean[f]) * (points[i][f] - p.mean[f]);
    p.grade_sd += (grades[i] - p.grade_mean) * (grades[i] - p.grade_mean);
  }
  for (auto& p : prof) {
    if (p.count == 0) continue;
    for (auto& v : p.sd) v = std::sqrt(v / static_cast<double>(p.count));
    p.grade_sd = std::sqrt(p.grade_sd / static_cast<double>(p.count));
  }
  std::stable_sort(prof.begin(), prof.end(), [](const ClusterProfile& a, const ClusterProfile& b) {
    if ((a.count == 0) != (b.count == 0)) return b.count == 0;
    return a.grade_mean > b.grade_mean;
  });
  ClusterSummary s;
  s.relabel.assign(k, 0);
  for (std::size_t pos = 0; pos < k; ++pos) {
    prof[pos].label = static_cast<int>(pos) + 1;
    s.relabel[static_cast<std::size_t>(prof[pos].original_index)] = prof[pos].label;
  }
  s.clusters = std::move(prof);
  return s;
}

std::vector<std::vector<double>> group_values(const ClusterSummary& summary, const ClusterModel& model,
                                              std::span<const double> values) {
  std::vector<std::vector<double>> groups(summary.clusters.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const int label = summary.relabel[static_cast<std::size_t>(model.assignments[i])];
    groups[static_cast<std::size_t>(label - 1)].push_back(values[i]);
  }
  return groups;
}

std::string to_string(KMethod method) { return method == KMethod::Elbow ? "elbow" : "silhouette"; }

nlohmann::json to_json(const ClusterModel& m, bool include_assignments) {
  nlohmann::json traces = nlohmann::json::array();
  for (const auto& t : m.traces) traces.push_back(t.inertia);
  nlohmann::json j = {{"k", m.k},           {"centroids", m.centroids}, {"inertia", m.inertia},
                      {"n_iterations", m.n_iterations}, {"seed", m.seed}, {"best_restart", m.best_restart},
                      {"restart_inertia_traces", traces}};
  if (include_assignments) j["assignments"] = m.assignments;
  return j;
}

nlohmann::json to_json(const KSelectionCurve& c) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& [k, v] : c.points) pts.push_back({{"k", k}, {"value", v}});
  return {{"method", to_string(c.method)}, {"points", pts}, {"chosen_k", c.chosen_k}};
}

nlohmann::json to_json(const ClusterSummary& s) {
  nlohmann::json clusters = nlohmann::json::array();
  for (const auto& p : s.clusters) {
    nlohmann::json feats = nlohmann::json::object();
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      feats[std::string(kFeatureNames[f])] = {{"mean", p.mean[f]}, {"sd", p.sd[f]}};
    }
    clusters.push_back({{"label", p.label},
                        {"original_index", p.original_index},
                        {"count", p.count},
                        {"features", feats},
                        {"final_grade", {{"mean", p.grade_mean}, {"sd", p.grade_sd}}}});
  }
  return {{"clusters", clusters}, {"relabel", s.relabel}};
}

}  // namespace lmsrisk
