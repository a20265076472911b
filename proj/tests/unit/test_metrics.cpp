#include <gtest/gtest.h>

#include "lmsrisk/error.hpp"
#include "lmsrisk/metrics.hpp"
#include "lmsrisk/random.hpp"

namespace lmsrisk {
namespace {

// Fraction of positive-negative pairs ranked correctly, ties worth one half.
double mann_whitney(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j]) continue;
      pairs += 1.0;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

TEST(Auc, Examples) {
  std::vector<int> y{0, 0, 1, 1};
  std::vector<double> perfect{0, 0, 1, 1}, reversed{1, 1, 0, 0}, mixed{0.1, 0.4, 0.35, 0.8};
  EXPECT_DOUBLE_EQ(roc_auc(perfect, y), 1.0);
  EXPECT_DOUBLE_EQ(roc_auc(reversed, y), 0.0);
  EXPECT_DOUBLE_EQ(roc_auc(mixed, y), 0.75);
  EvalReport r = evaluate_scores(perfect, y);
  EXPECT_DOUBLE_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.confusion[1][1], 2u);
  EXPECT_EQ(r.confusion[0][0], 2u);
}

TEST(Auc, MatchesMannWhitney) {
  Rng rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.index(199);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.index(20)) / 20.0;  // coarse grid forces ties
      y[i] = rng.bernoulli(0.4);
    }
    y[0] = 1;
    y[1] = 0;
    EXPECT_NEAR(roc_auc(s, y), mann_whitney(s, y), 1e-12);
  }
}

TEST(Roc, CurveShape) {
  std::vector<double> s{0.9, 0.8, 0.8, 0.3, 0.1};
  std::vector<int> y{1, 0, 1, 0, 0};
  auto pts = roc_curve(s, y);
  ASSERT_GE(pts.size(), 2u);
  EXPECT_EQ(pts.front().fpr, 0.0);
  EXPECT_EQ(pts.front().tpr, 0.0);
  EXPECT_EQ(pts.back().fpr, 1.0);
  EXPECT_EQ(pts.back().tpr, 1.0);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    EXPECT_GE(pts[i].fpr, pts[i - 1].fpr);
    EXPECT_GE(pts[i].tpr, pts[i - 1].tpr);
  }
}

TEST(Auc, SingleClassTest) {
  std::vector<double> s{0.2, 0.7};
  std::vector<int> y{1, 1};
  try {
    roc_auc(s, y);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingleClassTest);
  }
  EvalReport r = evaluate_scores(s, y);
  EXPECT_TRUE(r.single_class_test);
  EXPECT_FALSE(r.auc.has_value());
  EXPECT_DOUBLE_EQ(r.accuracy, 0.5);
}

TEST(Accuracy, ThresholdIsStrict) {
  std::vector<double> s{0.5, 0.5000001};
  std::vector<int> y{0, 1};
  EXPECT_DOUBLE_EQ(evaluate_scores(s, y).accuracy, 1.0);
}

}  // namespace
}  // namespace lmsrisk
