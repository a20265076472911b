#pragma once

#include <array>
#include <cstddef>
#include <string_view>
#include <vector>

namespace lmsrisk {

inline constexpr std::size_t kNumFeatures = 4;

/// Canonical feature order. Every matrix, model and report downstream of
/// featurization uses exactly this order.
inline constexpr std::array<std::string_view, kNumFeatures> kFeatureNames = {
    "content_completed",
    "number_of_assignment_submissions",
    "total_time_spent_in_content",
    "number_of_logins_to_the_system",
};

enum FeatureIndex : std::size_t {
  kContentCompleted = 0,
  kAssignmentSubmissions = 1,
  kTimeInContent = 2,
  kLogins = 3,
};

using FeatureVector = std::array<double, kNumFeatures>;

/// Plain training/evaluation view: features plus 0/1 labels (1 = at risk).
struct Dataset {
  std::vector<FeatureVector> x;
  std::vector<int> y;

  std::size_t size() const { return x.size(); }
  bool empty() const { return x.empty(); }
  std::size_t positives() const {
    std::size_t n = 0;
    for (int v : y) n += v != 0;
    return n;
  }
};

Dataset subset(const Dataset& data, const std::vector<std::size_t>& rows);

}  // namespace lmsrisk
