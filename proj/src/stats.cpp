#include "lmsrisk/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "lmsrisk/error.hpp"

namespace lmsrisk {
namespace {

constexpr double kAbsTolerance = 1e-7;

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

void check_groups(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw Error(ErrorCode::DegenerateGroups, "ANOVA needs at least two groups");
  std::size_t n = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) throw Error(ErrorCode::DegenerateGroups, "group " + std::to_string(g) + " is empty");
    n += groups[g].size();
  }
  if (n <= groups.size()) throw Error(ErrorCode::DegenerateGroups, "need more observations than groups");
}

double upper_normal(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

/// Phi(b) - Phi(a) for a <= b, using whichever tail avoids cancellation.
double normal_mass(double a, double b) {
  if (a + b > 0) return upper_normal(a) - upper_normal(b);
  return upper_normal(-b) - upper_normal(-a);
}

template <typename F>
double integrate(F f, double a, double b, double tol, const char* what) {
  double error = 0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 15, tol, &error);
  if (!std::isfinite(value) || error > kAbsTolerance) {
    throw Error(ErrorCode::QuadratureFailure,
                std::string(what) + " quadrature error estimate " + std::to_string(error) + " exceeds 1e-7");
  }
  return value;
}

}  // namespace

AnovaResult anova_oneway(const std::vector<std::vector<double>>& groups) {
  check_groups(groups);
  AnovaResult r;
  r.groups = groups.size();
  double total = 0;
  for (const auto& g : groups) {
    r.n += g.size();
    for (double x : g) total += x;
  }
  const double grand = total / static_cast<double>(r.n);
  bool means_differ = false;
  const double first_mean = mean_of(groups.front());
  for (const auto& g : groups) {
    const double m = mean_of(g);
    r.ssb += static_cast<double>(g.size()) * (m - grand) * (m - grand);
    for (double x : g) r.ssw += (x - m) * (x - m);
    means_differ = means_differ || m != first_mean;
  }
  r.df_between = r.groups - 1;
  r.df_within = r.n - r.groups;
  r.msb = r.ssb / static_cast<double>(r.df_between);
  r.msw = r.ssw / static_cast<double>(r.df_within);
  if (r.msw > 0) {
    r.f = r.msb / r.msw;
    r.p_value = f_distribution_sf(r.f, static_cast<double>(r.df_between), static_cast<double>(r.df_within));
  } else if (means_differ && r.ssb > 0) {
    r.f = std::numeric_limits<double>::infinity();
    r.p_value = 0.0;
    r.zero_within_variance = true;
  } else {
    r.f = 0.0;
    r.p_value = 1.0;
  }
  return r;
}

TukeyResult tukey_hsd(const std::vector<std::vector<double>>& groups, double alpha) {
  const AnovaResult a = anova_oneway(groups);
  if (!(a.msw > 0)) throw Error(ErrorCode::ZeroWithinVariance, "Tukey HSD needs positive within-group variance");
  TukeyResult t;
  t.alpha = alpha;
  const int k = static_cast<int>(groups.size());
  const double df = static_cast<double>(a.df_within);
  for (std::size_t i = 0; i < groups.size(); ++i) {
    for (std::size_t j = i + 1; j < groups.size(); ++j) {
      TukeyPair p;
      p.i = i;
      p.j = j;
      p.mean_difference = mean_of(groups[i]) - mean_of(groups[j]);
      const double se = std::sqrt(a.msw / 2.0 *
                                  (1.0 / static_cast<double>(groups[i].size()) + 1.0 / static_cast<double>(groups[j].size())));
      p.q = std::abs(p.mean_difference) / se;
      p.p_value = std::clamp(1.0 - studentized_range_cdf(p.q, k, df), 0.0, 1.0);
      p.significant = p.p_value < alpha;
      t.pairs.push_back(p);
    }
  }
  return t;
}

double regularized_incomplete_beta(double x, double a, double b) {
  if (x <= 0) return 0.0;
  if (x >= 1) return 1.0;
  if (x > (a + 1.0) / (a + b + 2.0)) return 1.0 - regularized_incomplete_beta(1.0 - x, b, a);
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  // Modified Lentz evaluation of the continued fraction.
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-16;
  double c = 1.0, d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double num = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
    d = 1.0 + num * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + num / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    num = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
    d = 1.0 + num * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + num / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) return std::exp(log_front) * h / a;
  }
  throw Error(ErrorCode::QuadratureFailure, "incomplete beta continued fraction did not converge");
}

double f_distribution_sf(double f, double d1, double d2) {
  if (!(f > 0)) return 1.0;
  if (std::isinf(f)) return 0.0;
  return regularized_incomplete_beta(d2 / (d2 + d1 * f), d2 / 2.0, d1 / 2.0);
}

double normal_range_cdf(double w, int k) {
  if (k < 2) throw Error(ErrorCode::InvalidConfig, "studentized range needs k >= 2");
  if (!(w > 0)) return 0.0;
  constexpr double kInvSqrt2Pi = 0.3989422804014327;
  auto integrand = [&](double z) {
    const double mass = normal_mass(z - w, z);
    return kInvSqrt2Pi * std::exp(-0.5 * z * z) * std::pow(mass, k - 1);
  };
  const double v = static_cast<double>(k) * integrate(integrand, -8.5, 8.5, 1e-12, "normal range");
  return std::clamp(v, 0.0, 1.0);
}

double studentized_range_cdf(double q, int k, double df) {
  if (k < 2) throw Error(ErrorCode::InvalidConfig, "studentized range needs k >= 2");
  if (!(df >= 1)) throw Error(ErrorCode::InvalidConfig, "studentized range needs df >= 1");
  if (!(q > 0)) return 0.0;
  if (df > 1e7) return normal_range_cdf(q, k);

  // Density of s = chi_df / sqrt(df), in log space.
  const double log_norm = (df / 2.0) * std::log(df) - std::lgamma(df / 2.0) - (df / 2.0 - 1.0) * std::numbers::ln2;
  auto log_density = [&](double s) { return log_norm + (df - 1.0) * std::log(s) - df * s * s / 2.0; };
  const double mode = std::sqrt((df - 1.0) / df);
  const double step = 1.0 / std::sqrt(2.0 * df);
  const double peak = df > 1.0 ? log_density(mode) : log_norm;
  constexpr double kLogCut = -60.0;
  double lo = mode, hi = std::max(mode, step);
  while (lo > 0 && log_density(lo) - peak > kLogCut) lo -= step;
  lo = std::max(lo, 0.0);
  while (log_density(hi) - peak > kLogCut) hi += step;

  auto outer = [&](double s) {
    if (s <= 0) return 0.0;
    return std::exp(log_density(s)) * normal_range_cdf(q * s, k);
  };
  return std::clamp(integrate(outer, lo, hi, 1e-10, "studentized range"), 0.0, 1.0);
}

nlohmann::json to_json(const AnovaResult& r) {
  return {{"groups", r.groups},         {"n", r.n},
          {"F", std::isinf(r.f) ? nlohmann::json("inf") : nlohmann::json(r.f)},
          {"df_between", r.df_between}, {"df_within", r.df_within},
          {"SSB", r.ssb},               {"SSW", r.ssw},
          {"MSB", r.msb},               {"MSW", r.msw},
          {"p_value", r.p_value},       {"zero_within_variance", r.zero_within_variance}};
}

nlohmann::json to_json(const TukeyResult& t) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : t.pairs) {
    pairs.push_back({{"i", p.i},
                     {"j", p.j},
                     {"mean_difference", p.mean_difference},
                     {"q", p.q},
                     {"p_value", p.p_value},
                     {"significant", p.significant}});
  }
  return {{"alpha", t.alpha}, {"pairs", pairs}};
}

}  // namespace lmsrisk
