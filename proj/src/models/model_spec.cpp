#include "lmsrisk/models/model_spec.hpp"

#include <cmath>

#include "lmsrisk/error.hpp"
#include "lmsrisk/types.hpp"

namespace lmsrisk {

using nlohmann::json;

std::string_view to_string(Family family) {
  switch (family) {
    case Family::LogisticRegression: return "logistic_regression";
    case Family::GaussianNaiveBayes: return "naive_bayes";
    case Family::DecisionTree: return "decision_tree";
    case Family::RandomForest: return "random_forest";
    case Family::NeuralNetwork: return "neural_network";
    case Family::GradientBoosting: return "gradient_boosting";
    case Family::SupportVectorMachine: return "svm";
  }
  return "unknown";
}

std::optional<Family> parse_family(std::string_view name) {
  for (Family f : kAllFamilies) {
    if (to_string(f) == name) return f;
  }
  if (name == "xgboost") return Family::GradientBoosting;
  if (name == "support_vector_machine") return Family::SupportVectorMachine;
  if (name == "gaussian_naive_bayes") return Family::GaussianNaiveBayes;
  return std::nullopt;
}

Hyperparameters ModelSpec::defaults(Family family) {
  switch (family) {
    case Family::LogisticRegression:
      return {{"C", 0.009}, {"max_iter", 100}, {"tol", 1e-8}};
    case Family::GaussianNaiveBayes:
      return {{"var_smoothing", 1e-9}};
    case Family::DecisionTree:
      return {{"criterion", "gini"}, {"max_depth", nullptr}, {"min_samples_split", 2}, {"min_samples_leaf", 1}};
    case Family::RandomForest:
      return {{"n_estimators", 700}, {"max_features", "log2"}, {"min_samples_split", 3}, {"min_samples_leaf", 1},
              {"max_depth", nullptr}, {"bootstrap", true}, {"criterion", "gini"}};
    case Family::NeuralNetwork:
      return {{"hidden_layer_sizes", json::array({100, 100})}, {"activation", "tanh"}, {"alpha", 0.1},
              {"learning_rate_init", 0.001}, {"max_iter", 1000}, {"tol", 1e-4}, {"n_iter_no_change", 10}};
    case Family::GradientBoosting:
      return {{"n_estimators", 400}, {"learning_rate", 0.1}, {"max_depth", 15}, {"reg_lambda", 1.0},
              {"gamma", 0.0}, {"min_child_weight", 1.0}};
    case Family::SupportVectorMachine:
      return {{"C", 1000.0}, {"gamma", 1.0}, {"kernel", "rbf"}, {"tol", 1e-3}, {"max_rows", 5000}, {"max_iter", 0}};
  }
  return {};
}

namespace {

const Hyperparameters& cached_defaults(Family family) {
  static const std::array<Hyperparameters, std::size(kAllFamilies)> table = [] {
    std::array<Hyperparameters, std::size(kAllFamilies)> t;
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = ModelSpec::defaults(kAllFamilies[i]);
    return t;
  }();
  return table[static_cast<std::size_t>(family)];
}

[[noreturn]] void bad(const ModelSpec& spec, const std::string& name, const std::string& why) {
  throw Error(ErrorCode::InvalidHyperparameter,
              std::string(to_string(spec.family)) + "." + name + " " + why);
}

void require_positive(const ModelSpec& s, const std::string& name) {
  const json& v = s.get(name);
  if (!v.is_number() || !(v.get<double>() > 0.0)) bad(s, name, "must be a positive number");
}

void require_non_negative(const ModelSpec& s, const std::string& name) {
  const json& v = s.get(name);
  if (!v.is_number() || !(v.get<double>() >= 0.0)) bad(s, name, "must be a non-negative number");
}

void require_int_at_least(const ModelSpec& s, const std::string& name, long long lo) {
  const json& v = s.get(name);
  if (!v.is_number_integer() || v.get<long long>() < lo) bad(s, name, "must be an integer >= " + std::to_string(lo));
}

void require_depth(const ModelSpec& s, const std::string& name) {
  const json& v = s.get(name);
  if (v.is_null()) return;
  if (!v.is_number_integer() || v.get<long long>() < 1) bad(s, name, "must be null or an integer >= 1");
}

void require_string(const ModelSpec& s, const std::string& name, std::initializer_list<const char*> allowed) {
  const json& v = s.get(name);
  if (v.is_string()) {
    for (const char* a : allowed) {
      if (v.get<std::string>() == a) return;
    }
  }
  std::string list;
  for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
  bad(s, name, "must be one of {" + list + "}");
}

}  // namespace

const json& ModelSpec::get(const std::string& name) const {
  if (auto it = hyperparameters.find(name); it != hyperparameters.end()) return it->second;
  const auto& d = cached_defaults(family);
  if (auto it = d.find(name); it != d.end()) return it->second;
  throw Error(ErrorCode::InvalidHyperparameter, std::string(to_string(family)) + " has no hyperparameter '" + name + "'");
}

double ModelSpec::real(const std::string& name) const { return get(name).get<double>(); }
long long ModelSpec::integer(const std::string& name) const {
  const json& v = get(name);
  return v.is_null() ? 0 : v.get<long long>();
}

void ModelSpec::validate() const {
  const auto& d = cached_defaults(family);
  for (const auto& [name, value] : hyperparameters) {
    if (!d.contains(name)) bad(*this, name, "is not a hyperparameter of this family");
  }
  switch (family) {
    case Family::LogisticRegression:
      require_positive(*this, "C");
      require_int_at_least(*this, "max_iter", 1);
      require_positive(*this, "tol");
      break;
    case Family::GaussianNaiveBayes:
      require_non_negative(*this, "var_smoothing");
      break;
    case Family::DecisionTree:
      require_string(*this, "criterion", {"gini"});
      require_depth(*this, "max_depth");
      require_int_at_least(*this, "min_samples_split", 2);
      require_int_at_least(*this, "min_samples_leaf", 1);
      break;
    case Family::RandomForest: {
      require_int_at_least(*this, "n_estimators", 1);
      const json& mf = get("max_features");
      if (!(mf.is_null() || (mf.is_number_integer() && mf.get<long long>() >= 1 &&
                             mf.get<long long>() <= static_cast<long long>(kNumFeatures)) ||
            (mf.is_string() && (mf == "log2" || mf == "sqrt" || mf == "all")))) {
        bad(*this, "max_features", "must be log2, sqrt, all, null or an integer in [1, 4]");
      }
      require_int_at_least(*this, "min_samples_split", 2);
      require_int_at_least(*this, "min_samples_leaf", 1);
      require_depth(*this, "max_depth");
      if (!get("bootstrap").is_boolean()) bad(*this, "bootstrap", "must be a boolean");
      require_string(*this, "criterion", {"gini"});
      break;
    }
    case Family::NeuralNetwork: {
      const json& h = get("hidden_layer_sizes");
      if (!h.is_array() || h.empty()) bad(*this, "hidden_layer_sizes", "must be a non-empty array");
      for (const auto& w : h) {
        if (!w.is_number_integer() || w.get<long long>() < 1) bad(*this, "hidden_layer_sizes", "entries must be integers >= 1");
      }
      require_string(*this, "activation", {"tanh"});
      require_non_negative(*this, "alpha");
      require_positive(*this, "learning_rate_init");
      require_int_at_least(*this, "max_iter", 1);
      require_non_negative(*this, "tol");
      require_int_at_least(*this, "n_iter_no_change", 1);
      break;
    }
    case Family::GradientBoosting:
      require_int_at_least(*this, "n_estimators", 0);
      require_positive(*this, "learning_rate");
      require_int_at_least(*this, "max_depth", 1);
      require_non_negative(*this, "reg_lambda");
      require_non_negative(*this, "gamma");
      require_non_negative(*this, "min_child_weight");
      break;
    case Family::SupportVectorMachine:
      require_positive(*this, "C");
      require_positive(*this, "gamma");
      require_string(*this, "kernel", {"rbf"});
      require_positive(*this, "tol");
      require_int_at_least(*this, "max_rows", 2);
      require_int_at_least(*this, "max_iter", 0);
      break;
  }
}

json to_json(const ModelSpec& spec) {
  json hp = json::object();
  for (const auto& [k, v] : spec.hyperparameters) hp[k] = v;
  return {{"family", std::string(to_string(spec.family))}, {"hyperparameters", hp}, {"seed", spec.seed}};
}

ModelSpec model_spec_from_json(const json& j) {
  ModelSpec spec;
  auto family = parse_family(j.at("family").get<std::string>());
  if (!family) throw Error(ErrorCode::InvalidHyperparameter, "unknown family " + j.at("family").dump());
  spec.family = *family;
  for (const auto& [k, v] : j.at("hyperparameters").items()) spec.hyperparameters[k] = v;
  spec.seed = j.at("seed").get<std::uint64_t>();
  spec.validate();
  return spec;
}

}  // namespace lmsrisk
