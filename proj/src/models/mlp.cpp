#include "lmsrisk/models/mlp.hpp"

#include <cmath>
#include <limits>

#include "lmsrisk/error.hpp"
#include "lmsrisk/random.hpp"

namespace lmsrisk {
namespace {

Eigen::VectorXd sigmoid(const Eigen::VectorXd& z) {
  return z.unaryExpr([](double v) {
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    double e = std::exp(v);
    return e / (1.0 + e);
  });
}

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

Eigen::MatrixXd to_matrix(const std::vector<FeatureVector>& rows) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(kNumFeatures));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t f = 0; f < kNumFeatures; ++f) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) = rows[i][f];
  return x;
}

}  // namespace

std::vector<int> MlpModel::layer_sizes() const {
  std::vector<int> sizes;
  if (weights.empty()) return sizes;
  sizes.push_back(static_cast<int>(weights.front().rows()));
  for (const auto& w : weights) sizes.push_back(static_cast<int>(w.cols()));
  return sizes;
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
  return n;
}

void MlpModel::predict_batch(const Eigen::MatrixXd& x, Eigen::VectorXd& out) const {
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l + 1 < weights.size(); ++l) {
    Eigen::MatrixXd z = a * weights[l];
    z.rowwise() += biases[l].transpose();
    a = z.array().tanh().matrix();
  }
  Eigen::VectorXd logits = a * weights.back();
  logits.array() += biases.back()(0);
  out = sigmoid(logits);
}

double MlpModel::predict(const FeatureVector& x) const {
  Eigen::MatrixXd row(1, static_cast<Eigen::Index>(kNumFeatures));
  for (std::size_t f = 0; f < kNumFeatures; ++f) row(0, static_cast<Eigen::Index>(f)) = x[f];
  Eigen::VectorXd out;
  predict_batch(row, out);
  return out(0);
}

Eigen::VectorXd MlpModel::flatten() const {
  Eigen::VectorXd p(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    p.segment(k, weights[l].size()) = Eigen::Map<const Eigen::VectorXd>(weights[l].data(), weights[l].size());
    k += weights[l].size();
    p.segment(k, biases[l].size()) = biases[l];
    k += biases[l].size();
  }
  return p;
}

void MlpModel::unflatten(const Eigen::VectorXd& p) {
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] = Eigen::Map<const Eigen::MatrixXd>(p.data() + k, weights[l].rows(), weights[l].cols());
    k += weights[l].size();
    biases[l] = p.segment(k, biases[l].size());
    k += biases[l].size();
  }
}

nlohmann::json MlpModel::to_json() const {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < weights.size(); ++l) {
    std::vector<double> w(weights[l].data(), weights[l].data() + weights[l].size());
    std::vector<double> b(biases[l].data(), biases[l].data() + biases[l].size());
    layers.push_back({{"rows", weights[l].rows()}, {"cols", weights[l].cols()}, {"weights", w}, {"bias", b}});
  }
  return {{"activation", "tanh"}, {"layers", layers}, {"iterations", iterations}, {"final_loss", final_loss}};
}

MlpModel MlpModel::from_json(const nlohmann::json& j) {
  MlpModel m;
  Eigen::Index expected_rows = static_cast<Eigen::Index>(kNumFeatures);
  for (const auto& layer : j.at("layers")) {
    auto rows = layer.at("rows").get<Eigen::Index>();
    auto cols = layer.at("cols").get<Eigen::Index>();
    auto w = layer.at("weights").get<std::vector<double>>();
    auto b = layer.at("bias").get<std::vector<double>>();
    if (rows != expected_rows || static_cast<Eigen::Index>(w.size()) != rows * cols ||
        static_cast<Eigen::Index>(b.size()) != cols) {
      throw Error(ErrorCode::FeatureMismatch, "neural network layer shapes are inconsistent");
    }
    m.weights.push_back(Eigen::Map<Eigen::MatrixXd>(w.data(), rows, cols));
    m.biases.push_back(Eigen::Map<Eigen::VectorXd>(b.data(), cols));
    expected_rows = cols;
  }
  if (m.weights.empty() || expected_rows != 1) throw Error(ErrorCode::FeatureMismatch, "neural network must end in one unit");
  m.iterations = j.value("iterations", 0);
  m.final_loss = j.value("final_loss", 0.0);
  return m;
}

MlpModel init_mlp(const std::vector<int>& hidden, std::uint64_t seed) {
  Rng rng(seed);
  MlpModel m;
  std::vector<int> sizes{static_cast<int>(kNumFeatures)};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int fan_in = sizes[l], fan_out = sizes[l + 1];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    Eigen::MatrixXd w(fan_in, fan_out);
    Eigen::VectorXd b(fan_out);
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = rng.uniform(-bound, bound);
    for (Eigen::Index r = 0; r < b.size(); ++r) b(r) = rng.uniform(-bound, bound);
    m.weights.push_back(std::move(w));
    m.biases.push_back(std::move(b));
  }
  return m;
}

double mlp_loss_and_gradient(const MlpModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double alpha,
                             Eigen::VectorXd* gradient) {
  const std::size_t layers = model.weights.size();
  const double n = static_cast<double>(x.rows());

  std::vector<Eigen::MatrixXd> act(layers);  // act[l] = input to layer l
  act[0] = x;
  for (std::size_t l = 0; l + 1 < layers; ++l) {
    Eigen::MatrixXd z = act[l] * model.weights[l];
    z.rowwise() += model.biases[l].transpose();
    act[l + 1] = z.array().tanh().matrix();
  }
  Eigen::VectorXd logits = act[layers - 1] * model.weights.back();
  logits.array() += model.biases.back()(0);

  double data_loss = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) data_loss += softplus(logits(i)) - y(i) * logits(i);
  double penalty = 0.0;
  for (const auto& w : model.weights) penalty += w.squaredNorm();
  const double loss = data_loss / n + 0.5 * alpha * penalty / n;
  if (!gradient) return loss;

  std::vector<Eigen::MatrixXd> dw(layers);
  std::vector<Eigen::VectorXd> db(layers);
  Eigen::MatrixXd delta = (sigmoid(logits) - y) / n;  // n x 1
  for (std::size_t l = layers; l-- > 0;) {
    dw[l] = act[l].transpose() * delta + (alpha / n) * model.weights[l];
    db[l] = delta.colwise().sum().transpose();
    if (l > 0) {
      Eigen::MatrixXd back = delta * model.weights[l].transpose();
      delta = back.array() * (1.0 - act[l].array().square());
    }
  }
  gradient->resize(static_cast<Eigen::Index>(model.parameter_count()));
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    gradient->segment(k, dw[l].size()) = Eigen::Map<const Eigen::VectorXd>(dw[l].data(), dw[l].size());
    k += dw[l].size();
    gradient->segment(k, db[l].size()) = db[l];
    k += db[l].size();
  }
  return loss;
}

MlpModel fit_mlp(const Dataset& data, const MlpOptions& opt, std::uint64_t seed) {
  const std::size_t pos = data.positives();
  if (data.empty() || pos == 0 || pos == data.size()) {
    throw Error(ErrorCode::SingleClassTraining, "neural network needs both classes");
  }
  Eigen::MatrixXd x = to_matrix(data.x);
  Eigen::VectorXd y(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) y(static_cast<Eigen::Index>(i)) = data.y[i];

  MlpModel model = init_mlp(opt.hidden, seed);
  Eigen::VectorXd params = model.flatten();
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(params.size());
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(params.size());
  Eigen::VectorXd grad;
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  double best_loss = std::numeric_limits<double>::infinity();
  int no_improvement = 0;
  double loss = 0.0;
  int iter = 0;
  for (; iter < opt.max_iter; ++iter) {
    loss = mlp_loss_and_gradient(model, x, y, opt.alpha, &grad);
    if (!std::isfinite(loss)) {
      throw Error(ErrorCode::NonConvergence, "neural network loss diverged at iteration " + std::to_string(iter));
    }
    if (loss > best_loss - opt.tol) {
      if (++no_improvement >= opt.n_iter_no_change) break;
    } else {
      no_improvement = 0;
    }
    best_loss = std::min(best_loss, loss);

    const double t = iter + 1;
    m1 = beta1 * m1 + (1.0 - beta1) * grad;
    m2 = beta2 * m2 + (1.0 - beta2) * grad.cwiseProduct(grad);
    const double step = opt.learning_rate * std::sqrt(1.0 - std::pow(beta2, t)) / (1.0 - std::pow(beta1, t));
    params.array() -= step * m1.array() / (m2.array().sqrt() + eps);
    model.unflatten(params);
  }
  model.iterations = iter;
  model.final_loss = mlp_loss_and_gradient(model, x, y, opt.alpha, nullptr);
  return model;
}

}  // namespace lmsrisk
