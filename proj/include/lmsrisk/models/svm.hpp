#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"
#include "lmsrisk/types.hpp"

namespace lmsrisk {

struct SvmOptions {
  double c = 1000.0;
  double gamma = 1.0;
  double tol = 1e-3;
  std::size_t max_rows = 5000;
  long long max_iter = 0;  // 0 = max(10^7, 100 n)
  double calibration_fraction = 0.2;
};

/// Dual solution of the RBF soft-margin problem on labels y in {-1, +1}.
struct SmoResult {
  std::vector<double> alpha;
  double rho = 0.0;  // decision(x) = sum_i alpha_i y_i K(x_i, x) - rho
  long long iterations = 0;
  double objective = 0.0;
};

double rbf_kernel(const FeatureVector& a, const FeatureVector& b, double gamma);

/// SMO with second-order working-set selection and a full kernel cache;
/// stops when the maximal KKT violating pair gap falls below tol.
SmoResult solve_smo(const std::vector<FeatureVector>& x, const std::vector<int>& y_pm1, double c, double gamma,
                    double tol, long long max_iter);

/// Largest per-sample KKT violation of a dual solution, measured on
/// y_i * decision(x_i): free vectors should sit at 1, vectors at 0 above it
/// and vectors at C below it.
double max_kkt_violation(const std::vector<FeatureVector>& x, const std::vector<int>& y_pm1, const SmoResult& result,
                         double c, double gamma);

/// Sigmoid P(y = 1 | f) = 1 / (1 + exp(a f + b)) fitted by regularized
/// maximum likelihood (Newton with backtracking).
struct PlattScaling {
  double a = -1.0;
  double b = 0.0;
  double operator()(double decision) const;
};
PlattScaling fit_platt(const std::vector<double>& decisions, const std::vector<int>& y01);

struct SvmModel {
  double gamma = 1.0;
  std::vector<FeatureVector> support_vectors;
  std::vector<double> coefficients;  // alpha_i * y_i
  double rho = 0.0;
  PlattScaling platt;
  long long iterations = 0;

  double decision(const FeatureVector& x) const;
  double predict(const FeatureVector& x) const { return platt(decision(x)); }

  nlohmann::json to_json() const;
  static SvmModel from_json(const nlohmann::json& j);
};

/// Holds out a stratified calibration_fraction of rows for Platt scaling,
/// caps the remaining rows at max_rows by seeded sampling, then runs SMO.
SvmModel fit_svm(const Dataset& data, const SvmOptions& options, std::uint64_t seed);

}  // namespace lmsrisk
