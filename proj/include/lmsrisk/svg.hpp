#pragma once

#include <limits>
#include <string>
#include <vector>

#include "lmsrisk/explain.hpp"

namespace lmsrisk::svg {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

struct LineChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  /// Optional vertical marker (e.g. the chosen k); ignored when NaN.
  double marker_x = std::numeric_limits<double>::quiet_NaN();
  std::string marker_label;
  bool diagonal = false;  // dashed y = x reference, for ROC plots
};

std::string line_chart(const LineChart& chart);

struct BarGroup {
  std::string label;
  std::vector<double> values;  // one per category
};

/// Grouped bars: one group per cluster, one bar per category.
std::string grouped_bar_chart(const std::string& title, const std::vector<std::string>& categories,
                              const std::vector<BarGroup>& groups, double y_max);

/// One row per feature ordered by importance, points at x = phi with a
/// deterministic vertical jitter, colored by the feature value rank.
std::string shap_summary(const ShapReport& report);

}  // namespace lmsrisk::svg
