#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lmsrisk/types.hpp"

namespace lmsrisk {

struct KMeansOptions {
  int n_restarts = 10;
  int max_iter = 300;
  double tol = 1e-6;  // stop once no centroid moves farther than this
  int hartigan_passes = 50;  // transfer passes after Lloyd converges; 0 disables
};

/// One Lloyd run: inertia after every assignment step, in order.
struct LloydTrace {
  std::vector<double> inertia;
};

struct ClusterModel {
  int k = 0;
  std::vector<FeatureVector> centroids;
  std::vector<int> assignments;  // 0-based cluster index per point
  double inertia = 0.0;
  int n_iterations = 0;
  std::uint64_t seed = 0;
  int best_restart = 0;
  std::vector<LloydTrace> traces;  // one per restart, including warm starts
};

/// Sum of squared distances from each point to its assigned centroid.
double compute_inertia(std::span<const FeatureVector> points, const std::vector<FeatureVector>& centroids,
                       const std::vector<int>& assignments);

/// Nearest centroid by squared Euclidean distance; ties go to the lowest index.
std::vector<int> assign_nearest(std::span<const FeatureVector> points, const std::vector<FeatureVector>& centroids);

std::size_t count_distinct(std::span<const FeatureVector> points);

/// Lloyd's algorithm from the given centroids. Empty clusters are reseeded at
/// the point farthest from its centroid. A step that would raise inertia
/// (floating-point noise at convergence) ends the run without being taken.
/// Hartigan single-point transfers then refine the Lloyd fixed point; each
/// pass that moves points appends one inertia value to the trace.
ClusterModel lloyd(std::span<const FeatureVector> points, std::vector<FeatureVector> centroids,
                   const KMeansOptions& options);

/// Best of several Lloyd runs (lowest inertia, earliest run on ties). When
/// the distinct points admit at most 64 starting sets of size k, every set
/// is tried in lexicographic order. Otherwise restart r starts from k
/// distinct points drawn with derive_seed(seed, "kmeans.restart", r),
/// redrawn when the set repeats an earlier restart's. Extra starting
/// centroid sets in `warm_starts` run afterwards.
/// EmptyInput on no points; KTooLarge when k exceeds the distinct points.
ClusterModel kmeans_fit(std::span<const FeatureVector> points, int k, std::uint64_t seed,
                        const KMeansOptions& options = {},
                        const std::vector<std::vector<FeatureVector>>& warm_starts = {});

/// Mean silhouette with Euclidean distances; singleton clusters score 0 and
/// so does a point with max(a, b) = 0. SingleCluster unless at least two
/// clusters are non-empty.
double silhouette_mean(std::span<const FeatureVector> points, const std::vector<int>& assignments, int k);
double silhouette_mean(std::span<const FeatureVector> points, const ClusterModel& model);

enum class KMethod { Elbow, Silhouette };

struct KSelectionCurve {
  KMethod method = KMethod::Elbow;
  std::vector<std::pair<int, double>> points;  // (k, SSE) or (k, mean silhouette)
  int chosen_k = 0;
};

/// Knee of a decreasing curve: with both axes scaled to [0, 1], the point
/// farthest from the chord joining the first and last points. Ties and flat
/// curves choose the smallest k.
int elbow_knee(const std::vector<std::pair<int, double>>& points);

struct KSelection {
  std::vector<ClusterModel> models;  // one per k in range
  KSelectionCurve elbow;
  KSelectionCurve silhouette;  // evaluated for k >= 2 only
};

/// Fits k = k_min..k_max. Each k > k_min adds a warm start from the previous
/// best centroids plus the point farthest from them, so SSE never increases
/// with k. Restart seeds derive from derive_seed(seed, "kmeans.k", k).
KSelection select_k(std::span<const FeatureVector> points, int k_min, int k_max, std::uint64_t seed,
                    const KMeansOptions& options = {});

/// Elbow curve only (same fits as select_k).
KSelectionCurve elbow_curve(std::span<const FeatureVector> points, int k_min, int k_max, std::uint64_t seed,
                            const KMeansOptions& options = {});

struct ClusterProfile {
  int label = 0;           // 1-based, after descending-grade relabeling
  int original_index = 0;  // 0-based index in the ClusterModel
  std::size_t count = 0;
  FeatureVector mean{};
  FeatureVector sd{};  // population SD
  double grade_mean = 0.0;
  double grade_sd = 0.0;
};

struct ClusterSummary {
  std::vector<ClusterProfile> clusters;  // in label order
  std::vector<int> relabel;              // original index -> label
};

/// Per-cluster mean and population SD of the features and final grade,
/// clusters ordered by descending mean grade (ties by original index).
/// Empty clusters are kept with zero counts and sort last.
ClusterSummary summarize_clusters(const ClusterModel& model, std::span<const FeatureVector> points,
                                  std::span<const double> grades);

/// Points grouped by relabeled cluster, for the stats stage.
std::vector<std::vector<double>> group_values(const ClusterSummary& summary, const ClusterModel& model,
                                              std::span<const double> values);

nlohmann::json to_json(const ClusterModel& model, bool include_assignments = true);
nlohmann::json to_json(const KSelectionCurve& curve);
nlohmann::json to_json(const ClusterSummary& summary);
std::string to_string(KMethod method);

}  // namespace lmsrisk
