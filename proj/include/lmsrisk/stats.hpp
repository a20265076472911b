#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace lmsrisk {

struct AnovaResult {
  std::size_t groups = 0;
  std::size_t n = 0;
  double f = 0.0;
  std::size_t df_between = 0;
  std::size_t df_within = 0;
  double ssb = 0.0;
  double ssw = 0.0;
  double msb = 0.0;
  double msw = 0.0;
  double p_value = 1.0;
  /// MSW = 0 while the group means differ: F is +inf and p is 0.
  bool zero_within_variance = false;
};

/// One-way ANOVA. DegenerateGroups unless there are >= 2 non-empty groups and
/// more observations than groups.
AnovaResult anova_oneway(const std::vector<std::vector<double>>& groups);

struct TukeyPair {
  std::size_t i = 0;
  std::size_t j = 0;
  double mean_difference = 0.0;  // mean_i - mean_j
  double q = 0.0;
  double p_value = 1.0;
  bool significant = false;
};

struct TukeyResult {
  double alpha = 0.05;
  std::vector<TukeyPair> pairs;  // i < j, lexicographic
};

/// Tukey-Kramer HSD; p = 1 - studentized_range_cdf(q, k, n - k).
/// ZeroWithinVariance when MSW = 0.
TukeyResult tukey_hsd(const std::vector<std::vector<double>>& groups, double alpha = 0.05);

/// Regularized incomplete beta I_x(a, b) by continued fraction.
double regularized_incomplete_beta(double x, double a, double b);

/// Upper tail P(F > f) of the F distribution with (d1, d2) degrees of freedom.
double f_distribution_sf(double f, double d1, double d2);

/// P(max - min of k standard normals <= w).
double normal_range_cdf(double w, int k);

/// CDF of the studentized range Q = R / (chi_df / sqrt(df)). Adaptive
/// Gauss-Kronrod quadrature over the chi scale (outer) and the normal
/// location (inner); QuadratureFailure if the error estimate exceeds 1e-7.
double studentized_range_cdf(double q, int k, double df);

nlohmann::json to_json(const AnovaResult& result);
nlohmann::json to_json(const TukeyResult& result);

}  // namespace lmsrisk
