#include "lmsrisk/models/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lmsrisk/error.hpp"
#include "lmsrisk/random.hpp"

namespace lmsrisk {
namespace {

constexpr double kTau = 1e-12;

}  // namespace

double rbf_kernel(const FeatureVector& a, const FeatureVector& b, double gamma) {
  double d2 = 0.0;
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    const double d = a[f] - b[f];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

SmoResult solve_smo(const std::vector<FeatureVector>& x, const std::vector<int>& y, double c, double gamma,
                    double tol, long long max_iter) {
  const std::size_t n = x.size();
  if (max_iter <= 0) max_iter = std::max<long long>(10'000'000LL, 100LL * static_cast<long long>(n));

  // Q[i][j] = y_i y_j K(x_i, x_j), row-major, symmetric.
  std::vector<double> q(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    q[i * n + i] = 1.0;
    for (std::size_t j = 0; j < i; ++j) {
      const double v = y[i] * y[j] * rbf_kernel(x[i], x[j], gamma);
      q[i * n + j] = v;
      q[j * n + i] = v;
    }
  }

  std::vector<double> alpha(n, 0.0);
  std::vector<double> grad(n, -1.0);
  auto is_upper = [&](std::size_t t) { return alpha[t] >= c; };
  auto is_lower = [&](std::size_t t) { return alpha[t] <= 0.0; };

  long long iter = 0;
  for (;; ++iter) {
    // Working-set selection with second-order information.
    double gmax = -std::numeric_limits<double>::infinity();
    double gmax2 = -std::numeric_limits<double>::infinity();
    std::size_t i = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] == +1) {
        if (!is_upper(t) && -grad[t] >= gmax) gmax = -grad[t], i = t;
      } else {
        if (!is_lower(t) && grad[t] >= gmax) gmax = grad[t], i = t;
      }
    }
    std::size_t j = n;
    double obj_min = std::numeric_limits<double>::infinity();
    const double* qi = i < n ? &q[i * n] : nullptr;
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] == +1) {
        if (is_lower(t)) continue;
        gmax2 = std::max(gmax2, grad[t]);
        const double diff = gmax + grad[t];
        if (diff > 0 && qi) {
          double quad = 2.0 - 2.0 * y[i] * qi[t];
          if (quad <= 0) quad = kTau;
          const double obj = -(diff * diff) / quad;
          if (obj <= obj_min) obj_min = obj, j = t;
        }
      } else {
        if (is_upper(t)) continue;
        gmax2 = std::max(gmax2, -grad[t]);
        const double diff = gmax - grad[t];
        if (diff > 0 && qi) {
          double quad = 2.0 + 2.0 * y[i] * qi[t];
          if (quad <= 0) quad = kTau;
          const double obj = -(diff * diff) / quad;
          if (obj <= obj_min) obj_min = obj, j = t;
        }
      }
    }
    if (gmax + gmax2 < tol || i == n || j == n) break;
    if (iter >= max_iter) {
      throw Error(ErrorCode::NonConvergence,
                  "SMO exceeded " + std::to_string(max_iter) + " iterations (gap " + std::to_string(gmax + gmax2) + ")");
    }

    const double* qj = &q[j * n];
    const double old_ai = alpha[i], old_aj = alpha[j];
    if (y[i] != y[j]) {
      double quad = 2.0 + 2.0 * qi[j];
      if (quad <= 0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) alpha[j] = 0, alpha[i] = diff;
      } else {
        if (alpha[i] < 0) alpha[i] = 0, alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > c) alpha[i] = c, alpha[j] = c - diff;
      } else {
        if (alpha[j] > c) alpha[j] = c, alpha[i] = c + diff;
      }
    } else {
      double quad = 2.0 - 2.0 * qi[j];
      if (quad <= 0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) alpha[i] = c, alpha[j] = sum - c;
      } else {
        if (alpha[j] < 0) alpha[j] = 0, alpha[i] = sum;
      }
      if (sum > c) {
        if (alpha[j] > c) alpha[j] = c, alpha[i] = sum - c;
      } else {
        if (alpha[i] < 0) alpha[i] = 0, alpha[j] = sum;
      }
    }
    const double dai = alpha[i] - old_ai, daj = alpha[j] - old_aj;
    for (std::size_t t = 0; t < n; ++t) grad[t] += qi[t] * dai + qj[t] * daj;
  }

  SmoResult result;
  result.iterations = iter;
  double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0.0;
  std::size_t free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (is_upper(t)) {
      if (y[t] == -1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (is_lower(t)) {
      if (y[t] == +1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++free;
      sum_free += yg;
    }
  }
  result.rho = free > 0 ? sum_free / static_cast<double>(free) : (ub + lb) / 2.0;
  double obj = 0.0;
  for (std::size_t t = 0; t < n; ++t) obj += alpha[t] * (grad[t] - 1.0);
  result.objective = obj / 2.0;
  result.alpha = std::move(alpha);
  return result;
}

double max_kkt_violation(const std::vector<FeatureVector>& x, const std::vector<int>& y, const SmoResult& r, double c,
                         double gamma) {
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double f = -r.rho;
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (r.alpha[j] > 0) f += r.alpha[j] * y[j] * rbf_kernel(x[j], x[i], gamma);
    }
    const double m = y[i] * f;
    double v;
    if (r.alpha[i] <= 0) v = std::max(0.0, 1.0 - m);
    else if (r.alpha[i] >= c) v = std::max(0.0, m - 1.0);
    else v = std::abs(m - 1.0);
    worst = std::max(worst, v);
  }
  return worst;
}

double PlattScaling::operator()(double f) const {
  const double z = a * f + b;
  return z >= 0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
}

PlattScaling fit_platt(const std::vector<double>& dec, const std::vector<int>& y01) {
  const std::size_t n = dec.size();
  double prior1 = 0, prior0 = 0;
  for (int v : y01) (v ? prior1 : prior0) += 1;
  const double hi = (prior1 + 1.0) / (prior1 + 2.0), lo = 1.0 / (prior0 + 2.0);
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = y01[i] ? hi : lo;

  constexpr int kMaxIter = 100;
  constexpr double kMinStep = 1e-10, kSigma = 1e-12, kEps = 1e-5;
  double a = 0.0, b = std::log((prior0 + 1.0) / (prior1 + 1.0));

  auto objective = [&](double aa, double bb) {
    double f = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = dec[i] * aa + bb;
      f += z >= 0 ? t[i] * z + std::log1p(std::exp(-z)) : (t[i] - 1) * z + std::log1p(std::exp(z));
    }
    return f;
  };
  double fval = objective(a, b);
  for (int it = 0; it < kMaxIter; ++it) {
    double h11 = kSigma, h22 = kSigma, h21 = 0, g1 = 0, g2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = dec[i] * a + b;
      double p, q;
      if (z >= 0) {
        p = std::exp(-z) / (1.0 + std::exp(-z));
        q = 1.0 / (1.0 + std::exp(-z));
      } else {
        p = 1.0 / (1.0 + std::exp(z));
        q = std::exp(z) / (1.0 + std::exp(z));
      }
      const double d2 = p * q;
      h11 += dec[i] * dec[i] * d2;
      h22 += d2;
      h21 += dec[i] * d2;
      const double d1 = t[i] - p;
      g1 += dec[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < kEps && std::abs(g2) < kEps) break;
    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;
    double step = 1.0;
    while (step >= kMinStep) {
      const double na = a + step * da, nb = b + step * db;
      const double nf = objective(na, nb);
      if (nf < fval + 1e-4 * step * gd) {
        a = na, b = nb, fval = nf;
        break;
      }
      step /= 2.0;
    }
    if (step < kMinStep) break;
  }
  return {a, b};
}

double SvmModel::decision(const FeatureVector& x) const {
  double f = -rho;
  for (std::size_t i = 0; i < support_vectors.size(); ++i) f += coefficients[i] * rbf_kernel(support_vectors[i], x, gamma);
  return f;
}

nlohmann::json SvmModel::to_json() const {
  nlohmann::json sv = nlohmann::json::array();
  for (const auto& v : support_vectors) sv.push_back(v);
  return {{"gamma", gamma},           {"rho", rho},
          {"support_vectors", sv},    {"coefficients", coefficients},
          {"platt_a", platt.a},       {"platt_b", platt.b},
          {"iterations", iterations}};
}

SvmModel SvmModel::from_json(const nlohmann::json& j) {
  SvmModel m;
  m.gamma = j.at("gamma").get<double>();
  m.rho = j.at("rho").get<double>();
  for (const auto& v : j.at("support_vectors")) m.support_vectors.push_back(v.get<FeatureVector>());
  m.coefficients = j.at("coefficients").get<std::vector<double>>();
  if (m.coefficients.size() != m.support_vectors.size()) {
    throw Error(ErrorCode::FeatureMismatch, "support vector and coefficient counts differ");
  }
  m.platt = {j.at("platt_a").get<double>(), j.at("platt_b").get<double>()};
  m.iterations = j.value("iterations", 0LL);
  return m;
}

SvmModel fit_svm(const Dataset& data, const SvmOptions& opt, std::uint64_t seed) {
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < data.size(); ++i) by_class[data.y[i] ? 1 : 0].push_back(i);
  if (by_class[0].empty() || by_class[1].empty()) {
    throw Error(ErrorCode::SingleClassTraining, "SVM needs both classes");
  }

  // Stratified calibration holdout; each class keeps at least one row on
  // both sides when it has two or more.
  Rng split_rng(derive_seed(seed, "svm.calibration"));
  std::vector<std::size_t> fit_rows, calib_rows;
  for (auto& rows : by_class) {
    split_rng.shuffle(rows);
    std::size_t k = static_cast<std::size_t>(std::llround(opt.calibration_fraction * static_cast<double>(rows.size())));
    if (rows.size() >= 2) k = std::clamp<std::size_t>(k, 1, rows.size() - 1);
    else k = 0;
    calib_rows.insert(calib_rows.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(k));
    fit_rows.insert(fit_rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(k), rows.end());
  }
  std::sort(fit_rows.begin(), fit_rows.end());
  std::sort(calib_rows.begin(), calib_rows.end());
  if (opt.max_rows > 0 && fit_rows.size() > opt.max_rows) {
    Rng cap_rng(derive_seed(seed, "svm.cap"));
    auto pick = cap_rng.sample_without_replacement(fit_rows.size(), opt.max_rows);
    std::sort(pick.begin(), pick.end());
    std::vector<std::size_t> kept;
    kept.reserve(pick.size());
    for (auto p : pick) kept.push_back(fit_rows[p]);
    fit_rows = std::move(kept);
  }

  std::vector<FeatureVector> x;
  std::vector<int> y;
  for (auto r : fit_rows) {
    x.push_back(data.x[r]);
    y.push_back(data.y[r] ? 1 : -1);
  }
  if (std::find(y.begin(), y.end(), 1) == y.end() || std::find(y.begin(), y.end(), -1) == y.end()) {
    throw Error(ErrorCode::SingleClassTraining, "SVM training subset lost a class");
  }
  SmoResult smo = solve_smo(x, y, opt.c, opt.gamma, opt.tol, opt.max_iter);

  SvmModel model;
  model.gamma = opt.gamma;
  model.rho = smo.rho;
  model.iterations = smo.iterations;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (smo.alpha[i] > 0) {
      model.support_vectors.push_back(x[i]);
      model.coefficients.push_back(smo.alpha[i] * y[i]);
    }
  }

  // Calibration rows; fall back to the fit rows when the holdout is too small
  // to carry both classes.
  std::vector<std::size_t>& platt_rows = calib_rows;
  bool has0 = false, has1 = false;
  for (auto r : platt_rows) (data.y[r] ? has1 : has0) = true;
  std::vector<double> dec;
  std::vector<int> labels;
  const auto& rows = (has0 && has1) ? platt_rows : fit_rows;
  for (auto r : rows) {
    dec.push_back(model.decision(data.x[r]));
    labels.push_back(data.y[r] ? 1 : 0);
  }
  model.platt = fit_platt(dec, labels);
  return model;
}

}  // namespace lmsrisk
