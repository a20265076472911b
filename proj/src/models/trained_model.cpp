#include <cmath>
#include <numeric>

#include "lmsrisk/csv.hpp"
#include "lmsrisk/error.hpp"
#include "lmsrisk/models.hpp"

namespace lmsrisk {

using nlohmann::json;

namespace {

CartOptions cart_options(const ModelSpec& spec) {
  CartOptions o;
  o.max_depth = static_cast<int>(spec.integer("max_depth"));
  o.min_samples_split = static_cast<int>(spec.integer("min_samples_split"));
  o.min_samples_leaf = static_cast<int>(spec.integer("min_samples_leaf"));
  return o;
}

int resolve_max_features(const json& v) {
  const int d = static_cast<int>(kNumFeatures);
  if (v.is_null()) return d;
  if (v.is_number_integer()) return static_cast<int>(v.get<long long>());
  const auto s = v.get<std::string>();
  if (s == "log2") return static_cast<int>(std::ceil(std::log2(static_cast<double>(d))));
  if (s == "sqrt") return static_cast<int>(std::ceil(std::sqrt(static_cast<double>(d))));
  return d;
}

FittedParameters fit(const ModelSpec& spec, const Dataset& data) {
  switch (spec.family) {
    case Family::LogisticRegression:
      return fit_logistic(data, spec.real("C"), static_cast<int>(spec.integer("max_iter")), spec.real("tol"));
    case Family::GaussianNaiveBayes:
      return fit_naive_bayes(data, spec.real("var_smoothing"));
    case Family::DecisionTree: {
      if (data.empty()) throw Error(ErrorCode::TooFewInstances, "decision tree on empty data");
      std::vector<std::size_t> rows(data.size());
      std::iota(rows.begin(), rows.end(), 0);
      return DecisionTreeModel{grow_cart(data, rows, cart_options(spec))};
    }
    case Family::RandomForest: {
      ForestOptions o;
      o.n_estimators = static_cast<int>(spec.integer("n_estimators"));
      o.bootstrap = spec.get("bootstrap").get<bool>();
      o.tree = cart_options(spec);
      const int mf = resolve_max_features(spec.get("max_features"));
      o.tree.max_features = mf >= static_cast<int>(kNumFeatures) ? 0 : mf;
      return fit_forest(data, o, spec.seed);
    }
    case Family::NeuralNetwork: {
      MlpOptions o;
      o.hidden = spec.get("hidden_layer_sizes").get<std::vector<int>>();
      o.alpha = spec.real("alpha");
      o.learning_rate = spec.real("learning_rate_init");
      o.max_iter = static_cast<int>(spec.integer("max_iter"));
      o.tol = spec.real("tol");
      o.n_iter_no_change = static_cast<int>(spec.integer("n_iter_no_change"));
      return fit_mlp(data, o, spec.seed);
    }
    case Family::GradientBoosting: {
      BoostingOptions o;
      o.n_estimators = static_cast<int>(spec.integer("n_estimators"));
      o.learning_rate = spec.real("learning_rate");
      o.max_depth = static_cast<int>(spec.integer("max_depth"));
      o.reg_lambda = spec.real("reg_lambda");
      o.gamma = spec.real("gamma");
      o.min_child_weight = spec.real("min_child_weight");
      return fit_boosting(data, o);
    }
    case Family::SupportVectorMachine: {
      SvmOptions o;
      o.c = spec.real("C");
      o.gamma = spec.real("gamma");
      o.tol = spec.real("tol");
      o.max_rows = static_cast<std::size_t>(spec.integer("max_rows"));
      o.max_iter = spec.integer("max_iter");
      return fit_svm(data, o, spec.seed);
    }
  }
  throw Error(ErrorCode::InvalidHyperparameter, "unknown family");
}

FittedParameters params_from_json(Family family, const json& j) {
  switch (family) {
    case Family::LogisticRegression: return LogisticModel::from_json(j);
    case Family::GaussianNaiveBayes: return NaiveBayesModel::from_json(j);
    case Family::DecisionTree: return DecisionTreeModel::from_json(j);
    case Family::RandomForest: return ForestModel::from_json(j);
    case Family::NeuralNetwork: return MlpModel::from_json(j);
    case Family::GradientBoosting: return BoostingModel::from_json(j);
    case Family::SupportVectorMachine: return SvmModel::from_json(j);
  }
  throw Error(ErrorCode::InvalidHyperparameter, "unknown family");
}

}  // namespace

double TrainedModel::predict_one(const FeatureVector& x) const {
  return std::visit([&](const auto& m) { return m.predict(x); }, params_);
}

void TrainedModel::predict(std::span<const FeatureVector> x, std::span<double> out) const {
  if (out.size() != x.size()) throw Error(ErrorCode::FeatureMismatch, "output span size differs from input");
  if (const auto* mlp = std::get_if<MlpModel>(&params_)) {
    constexpr std::size_t kBlock = 4096;
    for (std::size_t start = 0; start < x.size(); start += kBlock) {
      const std::size_t len = std::min(kBlock, x.size() - start);
      Eigen::MatrixXd m(static_cast<Eigen::Index>(len), static_cast<Eigen::Index>(kNumFeatures));
      for (std::size_t i = 0; i < len; ++i)
        for (std::size_t f = 0; f < kNumFeatures; ++f)
          m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) = x[start + i][f];
      Eigen::VectorXd p;
      mlp->predict_batch(m, p);
      for (std::size_t i = 0; i < len; ++i) out[start + i] = p(static_cast<Eigen::Index>(i));
    }
    return;
  }
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, ForestModel> || std::is_same_v<M, BoostingModel>) {
          m.predict_batch(x, out);
        } else {
          for (std::size_t i = 0; i < x.size(); ++i) out[i] = m.predict(x[i]);
        }
      },
      params_);
}

json TrainedModel::to_json() const {
  json names = json::array();
  for (auto n : kFeatureNames) names.push_back(std::string(n));
  return {{"format_version", kModelFormatVersion},
          {"feature_names", names},
          {"spec", lmsrisk::to_json(spec_)},
          {"parameters", std::visit([](const auto& m) { return m.to_json(); }, params_)}};
}

TrainedModel TrainedModel::from_json(const json& j) {
  try {
    if (j.at("format_version").get<int>() != kModelFormatVersion) {
      throw Error(ErrorCode::FeatureMismatch, "unsupported model format version " + j.at("format_version").dump());
    }
    const auto& names = j.at("feature_names");
    bool ok = names.is_array() && names.size() == kNumFeatures;
    for (std::size_t f = 0; ok && f < kNumFeatures; ++f) ok = names[f] == std::string(kFeatureNames[f]);
    if (!ok) throw Error(ErrorCode::FeatureMismatch, "model feature names differ from the canonical order");
    ModelSpec spec = model_spec_from_json(j.at("spec"));
    FittedParameters params = params_from_json(spec.family, j.at("parameters"));
    return TrainedModel(std::move(spec), std::move(params));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::FeatureMismatch, std::string("malformed model document: ") + e.what());
  }
}

void TrainedModel::save(const std::filesystem::path& path) const { csv::write_text(path, to_json().dump(1) + "\n"); }

TrainedModel TrainedModel::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::MissingArtifact, "missing model " + path.string());
  json j;
  try {
    j = json::parse(csv::read_text(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::FeatureMismatch, "model " + path.string() + " is not valid JSON");
  }
  return from_json(j);
}

TrainedModel train(const ModelSpec& spec, const Dataset& data) {
  spec.validate();
  return TrainedModel(spec, fit(spec, data));
}

std::vector<double> predict_proba(const TrainedModel& model, std::span<const FeatureVector> instances) {
  std::vector<double> out(instances.size());
  model.predict(instances, out);
  return out;
}

std::vector<double> predict_proba(const TrainedModel& model, const std::vector<std::vector<double>>& rows) {
  std::vector<FeatureVector> x;
  x.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != kNumFeatures) {
      throw Error(ErrorCode::FeatureMismatch,
                  "instance " + std::to_string(i) + " has " + std::to_string(rows[i].size()) + " features, expected 4");
    }
    FeatureVector v;
    std::copy(rows[i].begin(), rows[i].end(), v.begin());
    x.push_back(v);
  }
  return predict_proba(model, x);
}

}  // namespace lmsrisk
