#include "lmsrisk/models/logistic.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "lmsrisk/error.hpp"

namespace lmsrisk {
namespace {

constexpr std::size_t kDim = kNumFeatures + 1;

double margin(const LogisticParams& p, const FeatureVector& x) {
  double z = p[kNumFeatures];
  for (std::size_t f = 0; f < kNumFeatures; ++f) z += p[f] * x[f];
  return z;
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

/// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

}  // namespace

double LogisticModel::predict(const FeatureVector& x) const {
  double z = intercept;
  for (std::size_t f = 0; f < kNumFeatures; ++f) z += weights[f] * x[f];
  return sigmoid(z);
}

nlohmann::json LogisticModel::to_json() const {
  return {{"weights", weights}, {"intercept", intercept}, {"iterations", iterations}};
}

LogisticModel LogisticModel::from_json(const nlohmann::json& j) {
  LogisticModel m;
  m.weights = j.at("weights").get<FeatureVector>();
  m.intercept = j.at("intercept").get<double>();
  m.iterations = j.value("iterations", 0);
  return m;
}

double logistic_objective(const LogisticParams& p, const Dataset& data, double c) {
  double penalty = 0.0;
  for (std::size_t f = 0; f < kNumFeatures; ++f) penalty += p[f] * p[f];
  double loss = 0.5 * penalty / c;
  for (std::size_t i = 0; i < data.size(); ++i) {
    double z = margin(p, data.x[i]);
    loss += softplus(z) - data.y[i] * z;
  }
  return loss;
}

LogisticParams logistic_gradient(const LogisticParams& p, const Dataset& data, double c) {
  LogisticParams g{};
  for (std::size_t f = 0; f < kNumFeatures; ++f) g[f] = p[f] / c;
  for (std::size_t i = 0; i < data.size(); ++i) {
    double r = sigmoid(margin(p, data.x[i])) - data.y[i];
    for (std::size_t f = 0; f < kNumFeatures; ++f) g[f] += r * data.x[i][f];
    g[kNumFeatures] += r;
  }
  return g;
}

LogisticModel fit_logistic(const Dataset& data, double c, int max_iter, double tol) {
  if (data.empty()) throw Error(ErrorCode::TooFewInstances, "logistic regression on empty data");
  std::size_t pos = data.positives();
  if (pos == 0 || pos == data.size()) throw Error(ErrorCode::SingleClassTraining, "logistic regression needs both classes");

  LogisticParams p{};
  auto done = [&p](int iter) {
    LogisticModel m;
    for (std::size_t f = 0; f < kNumFeatures; ++f) m.weights[f] = p[f];
    m.intercept = p[kNumFeatures];
    m.iterations = iter;
    return m;
  };
  double objective = logistic_objective(p, data, c);
  for (int iter = 0; iter < max_iter; ++iter) {
    LogisticParams g = logistic_gradient(p, data, c);
    double gnorm = 0.0;
    for (double v : g) gnorm += v * v;
    gnorm = std::sqrt(gnorm);
    if (gnorm < tol) return done(iter);

    Eigen::Matrix<double, kDim, kDim> h = Eigen::Matrix<double, kDim, kDim>::Zero();
    for (std::size_t f = 0; f < kNumFeatures; ++f) h(f, f) = 1.0 / c;
    Eigen::Matrix<double, kDim, 1> xi;
    for (std::size_t i = 0; i < data.size(); ++i) {
      double s = sigmoid(margin(p, data.x[i]));
      double w = s * (1.0 - s);
      for (std::size_t f = 0; f < kNumFeatures; ++f) xi(f) = data.x[i][f];
      xi(kNumFeatures) = 1.0;
      h.noalias() += w * xi * xi.transpose();
    }
    Eigen::Matrix<double, kDim, 1> grad;
    for (std::size_t k = 0; k < kDim; ++k) grad(k) = g[k];
    Eigen::Matrix<double, kDim, 1> step = h.ldlt().solve(grad);

    // Backtracking on the objective keeps Newton globally convergent. Inside
    // the quadratic region the objective change falls below rounding, so full
    // steps are taken there and the gradient decides convergence.
    double t = 1.0;
    double slope = grad.dot(step);
    const double scale = 1.0 + std::abs(objective);
    if (0.5 * slope <= 1e-15 * scale && gnorm < 100 * tol) return done(iter);
    LogisticParams trial{};
    double trial_objective = objective;
    const bool quadratic_region = 0.5 * slope <= 1e-8 * scale;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t k = 0; k < kDim; ++k) trial[k] = p[k] - t * step(k);
      trial_objective = logistic_objective(trial, data, c);
      if (quadratic_region || trial_objective <= objective - 1e-4 * t * slope) break;
      t *= 0.5;
    }
    p = trial;
    objective = trial_objective;
  }
  LogisticParams g = logistic_gradient(p, data, c);
  double gnorm = 0.0;
  for (double v : g) gnorm += v * v;
  throw Error(ErrorCode::NonConvergence, "logistic regression: gradient norm " + std::to_string(std::sqrt(gnorm)) +
                                             " after " + std::to_string(max_iter) + " Newton steps, loss " +
                                             std::to_string(objective));
}

}  // namespace lmsrisk
