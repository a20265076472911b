#include <gtest/gtest.h>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>

#include "lmsrisk/error.hpp"
#include "lmsrisk/random.hpp"
#include "lmsrisk/stats.hpp"

namespace lmsrisk {
namespace {

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Pooled-variance two-sample t statistic.
double pooled_t(const std::vector<double>& a, const std::vector<double>& b) {
  const double ma = mean(a), mb = mean(b);
  double ss = 0.0;
  for (double x : a) ss += (x - ma) * (x - ma);
  for (double x : b) ss += (x - mb) * (x - mb);
  const double df = static_cast<double>(a.size() + b.size() - 2);
  const double sp2 = ss / df;
  return (ma - mb) / std::sqrt(sp2 * (1.0 / a.size() + 1.0 / b.size()));
}

std::vector<double> draw(Rng& rng, std::size_t n, double mu, double sd) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal(mu, sd);
  return v;
}

TEST(Anova, IdenticalValues) {
  AnovaResult r = anova_oneway({{2, 2, 2}, {2, 2}, {2, 2, 2, 2}});
  EXPECT_EQ(r.f, 0.0);
  EXPECT_EQ(r.p_value, 1.0);
  EXPECT_FALSE(r.zero_within_variance);
}

TEST(Anova, ZeroWithinVarianceFlag) {
  AnovaResult r = anova_oneway({{1, 1}, {3, 3}});
  EXPECT_TRUE(r.zero_within_variance);
  EXPECT_TRUE(std::isinf(r.f));
  EXPECT_EQ(r.p_value, 0.0);
  EXPECT_THROW(tukey_hsd({{1, 1}, {3, 3}}), Error);
}

TEST(Anova, DegenerateGroups) {
  try {
    anova_oneway({{1, 2, 3}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateGroups);
  }
  EXPECT_THROW(anova_oneway({{1, 2}, {}}), Error);
}

TEST(Anova, SumsOfSquaresOracle) {
  AnovaResult r = anova_oneway({{1, 2, 3}, {2, 3, 4}, {5, 6, 7}});
  // Means 2, 3, 6; grand mean 11/3; SSB = 3 * 78/9 = 26; SSW = 6.
  EXPECT_NEAR(r.ssb, 26.0, 1e-10);
  EXPECT_NEAR(r.ssw, 6.0, 1e-10);
  EXPECT_NEAR(r.f, 13.0, 1e-8);
  const double p = boost::math::cdf(boost::math::complement(boost::math::fisher_f(2.0, 6.0), 13.0));
  EXPECT_NEAR(r.p_value, p, 1e-8);
  EXPECT_EQ(r.df_between, 2u);
  EXPECT_EQ(r.df_within, 6u);
}

TEST(Anova, FEqualsTSquared) {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    auto a = draw(rng, 2 + rng.index(20), 0.0, 1.0);
    auto b = draw(rng, 2 + rng.index(20), rng.uniform(-1, 1), rng.uniform(0.5, 2));
    const double t = pooled_t(a, b);
    const AnovaResult r = anova_oneway({a, b});
    EXPECT_NEAR(r.f, t * t, 1e-9 * std::max(1.0, t * t));
  }
}

TEST(Anova, FDistributionTail) {
  for (double d1 : {1.0, 3.0, 10.0}) {
    for (double d2 : {2.0, 15.0, 400.0}) {
      for (double f : {0.1, 1.0, 2.5, 9.0}) {
        const double p = boost::math::cdf(boost::math::complement(boost::math::fisher_f(d1, d2), f));
        EXPECT_NEAR(f_distribution_sf(f, d1, d2), p, 1e-10);
      }
    }
  }
}

TEST(Anova, AffineInvariance) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<double>> g{draw(rng, 8, 0, 1), draw(rng, 11, 0.5, 1), draw(rng, 6, -0.3, 2)};
    const double a = rng.uniform(-50, 50), b = rng.uniform(-100, 100);
    auto h = g;
    for (auto& grp : h) {
      for (double& x : grp) x = a * x + b;
    }
    AnovaResult r1 = anova_oneway(g), r2 = anova_oneway(h);
    EXPECT_NEAR(r1.f, r2.f, 1e-9 * std::max(1.0, r1.f));
    EXPECT_NEAR(r1.p_value, r2.p_value, 1e-9);
  }
}

TEST(StudentizedRange, TwoGroupIdentity) {
  for (double df : {2.0, 5.0, 20.0, 120.0, 1e4}) {
    boost::math::students_t t(df);
    for (double q : {0.3, 1.0, 2.0, 2.8, 4.0, 6.5}) {
      const double expected = 1.0 - 2.0 * boost::math::cdf(boost::math::complement(t, q / std::sqrt(2.0)));
      EXPECT_NEAR(studentized_range_cdf(q, 2, df), expected, 1e-6) << "q " << q << " df " << df;
    }
  }
  EXPECT_EQ(studentized_range_cdf(0.0, 3, 10), 0.0);
}

TEST(StudentizedRange, MonotoneAndBounded) {
  for (int k : {2, 3, 5, 8}) {
    double prev = 0.0;
    for (double q = 0.0; q <= 8.0; q += 0.25) {
      const double c = studentized_range_cdf(q, k, 12);
      EXPECT_GE(c, prev - 1e-12);
      EXPECT_LE(c, 1.0);
      prev = c;
    }
    double prev_df = 0.0;
    for (double df : {2.0, 4.0, 10.0, 30.0, 100.0, 1000.0}) {
      const double c = studentized_range_cdf(3.5, k, df);
      EXPECT_GE(c, prev_df - 1e-12);
      prev_df = c;
    }
  }
}

TEST(StudentizedRange, MonteCarlo) {
  Rng rng(20240);
  const int reps = 1'000'000;
  int hits = 0;
  for (int r = 0; r < reps; ++r) {
    double lo = 1e300, hi = -1e300;
    for (int i = 0; i < 3; ++i) {
      const double z = rng.normal();
      lo = std::min(lo, z);
      hi = std::max(hi, z);
    }
    double chi2 = 0.0;
    for (int i = 0; i < 20; ++i) {
      const double z = rng.normal();
      chi2 += z * z;
    }
    hits += (hi - lo) / std::sqrt(chi2 / 20.0) <= 3.0;
  }
  EXPECT_NEAR(studentized_range_cdf(3.0, 3, 20), static_cast<double>(hits) / reps, 0.003);
}

TEST(Tukey, EqualMeansFlagNothing) {
  TukeyResult t = tukey_hsd({{1, 2, 3}, {0, 2, 4}, {2, 2, 2, 1, 3}});
  for (const auto& p : t.pairs) {
    EXPECT_NEAR(p.q, 0.0, 1e-12);
    EXPECT_FALSE(p.significant);
  }
}

TEST(Tukey, TwoGroupsMatchTTest) {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    auto a = draw(rng, 5 + rng.index(10), 0, 1), b = draw(rng, 5 + rng.index(10), 0.8, 1);
    const double t = pooled_t(a, b);
    boost::math::students_t dist(static_cast<double>(a.size() + b.size() - 2));
    const double p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
    TukeyResult r = tukey_hsd({a, b});
    ASSERT_EQ(r.pairs.size(), 1u);
    EXPECT_NEAR(r.pairs[0].p_value, p, 1e-6);
    EXPECT_NEAR(r.pairs[0].q, std::abs(t) * std::sqrt(2.0), 1e-9);
  }
}

TEST(Tukey, OutlierGroupFlagsItsPairs) {
  Rng rng(4);
  std::vector<std::vector<double>> g{draw(rng, 10, 0, 0.1), draw(rng, 12, 0.05, 0.1), draw(rng, 9, 3, 0.1)};
  TukeyResult t = tukey_hsd(g);
  int flagged = 0;
  for (const auto& p : t.pairs) {
    flagged += p.significant;
    EXPECT_EQ(p.significant, p.j == 2 || p.i == 2);
  }
  EXPECT_EQ(flagged, 2);
}

TEST(Tukey, SwapSymmetry) {
  Rng rng(5);
  std::vector<std::vector<double>> g{draw(rng, 7, 0, 1), draw(rng, 9, 1, 1), draw(rng, 5, 0.2, 1)};
  TukeyResult a = tukey_hsd(g);
  std::swap(g[0], g[2]);
  TukeyResult b = tukey_hsd(g);
  auto find = [](const TukeyResult& t, std::size_t i, std::size_t j) {
    for (const auto& p : t.pairs) {
      if ((p.i == i && p.j == j) || (p.i == j && p.j == i)) return p;
    }
    return TukeyPair{};
  };
  // Original groups (0,1) are (2,1) after the swap.
  TukeyPair x = find(a, 0, 1), y = find(b, 2, 1);
  EXPECT_NEAR(x.q, y.q, 1e-12);
  EXPECT_NEAR(x.p_value, y.p_value, 1e-12);
  EXPECT_EQ(x.significant, y.significant);
  EXPECT_NEAR(x.mean_difference, -y.mean_difference, 1e-12);
}

}  // namespace
}  // namespace lmsrisk
