#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "lmsrisk/types.hpp"

namespace lmsrisk {

/// Fully connected tanh network with one sigmoid output unit.
struct MlpModel {
  std::vector<Eigen::MatrixXd> weights;  // layer l maps width[l] -> width[l+1]
  std::vector<Eigen::VectorXd> biases;
  int iterations = 0;
  double final_loss = 0.0;

  std::vector<int> layer_sizes() const;
  std::size_t parameter_count() const;

  double predict(const FeatureVector& x) const;
  void predict_batch(const Eigen::MatrixXd& x, Eigen::VectorXd& out) const;

  /// Flattened parameters: each weight matrix (column-major) then its bias.
  Eigen::VectorXd flatten() const;
  void unflatten(const Eigen::VectorXd& params);

  nlohmann::json to_json() const;
  static MlpModel from_json(const nlohmann::json& j);
};

/// Glorot-uniform initial parameters for the given hidden widths.
MlpModel init_mlp(const std::vector<int>& hidden, std::uint64_t seed);

/// Mean log-loss + alpha / (2n) * (sum of squared weights, biases excluded).
/// Returns the loss and writes the gradient in flatten() layout.
double mlp_loss_and_gradient(const MlpModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double alpha,
                             Eigen::VectorXd* gradient);

struct MlpOptions {
  std::vector<int> hidden{100, 100};
  double alpha = 0.1;
  double learning_rate = 0.001;
  int max_iter = 1000;
  double tol = 1e-4;
  int n_iter_no_change = 10;
};

/// Full-batch Adam (beta1 0.9, beta2 0.999, eps 1e-8). Stops early once the
/// loss fails to improve by tol for n_iter_no_change consecutive iterations;
/// otherwise runs max_iter iterations. A non-finite loss is NonConvergence.
MlpModel fit_mlp(const Dataset& data, const MlpOptions& options, std::uint64_t seed);

}  // namespace lmsrisk
