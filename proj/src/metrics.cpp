#include "lmsrisk/metrics.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "lmsrisk/error.hpp"
#include "lmsrisk/models.hpp"

namespace lmsrisk {
namespace {

struct RocCounts {
  std::vector<std::size_t> fp, tp;
  std::vector<double> thresholds;
  std::size_t positives = 0, negatives = 0;
};

RocCounts roc_counts(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error(ErrorCode::FeatureMismatch, "scores and labels differ in length");
  RocCounts c;
  for (int y : labels) (y ? c.positives : c.negatives)++;
  if (c.positives == 0 || c.negatives == 0) {
    throw Error(ErrorCode::SingleClassTest, "ROC needs both classes in the test set");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  c.fp.push_back(0);
  c.tp.push_back(0);
  c.thresholds.push_back(std::numeric_limits<double>::infinity());
  std::size_t fp = 0, tp = 0;
  for (std::size_t k = 0; k < order.size();) {
    const double s = scores[order[k]];
    while (k < order.size() && scores[order[k]] == s) {
      (labels[order[k]] ? tp : fp)++;
      ++k;
    }
    c.fp.push_back(fp);
    c.tp.push_back(tp);
    c.thresholds.push_back(s);
  }
  return c;
}

}  // namespace

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
  const RocCounts c = roc_counts(scores, labels);
  std::vector<RocPoint> out;
  out.reserve(c.fp.size());
  for (std::size_t i = 0; i < c.fp.size(); ++i) {
    out.push_back({static_cast<double>(c.fp[i]) / static_cast<double>(c.negatives),
                   static_cast<double>(c.tp[i]) / static_cast<double>(c.positives), c.thresholds[i]});
  }
  return out;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  const RocCounts c = roc_counts(scores, labels);
  // Twice the area in count units stays an exact integer until the final division.
  unsigned long long twice_area = 0;
  for (std::size_t i = 1; i < c.fp.size(); ++i) {
    twice_area += static_cast<unsigned long long>(c.fp[i] - c.fp[i - 1]) * (c.tp[i] + c.tp[i - 1]);
  }
  return static_cast<double>(twice_area) / (2.0 * static_cast<double>(c.positives) * static_cast<double>(c.negatives));
}

EvalReport evaluate_scores(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error(ErrorCode::FeatureMismatch, "scores and labels differ in length");
  if (scores.empty()) throw Error(ErrorCode::TooFewInstances, "empty test set");
  EvalReport r;
  r.n = scores.size();
  std::size_t correct = 0, pos = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const int actual = labels[i] ? 1 : 0;
    const int predicted = predict_class(scores[i]);
    r.confusion[static_cast<std::size_t>(actual)][static_cast<std::size_t>(predicted)]++;
    correct += actual == predicted;
    pos += static_cast<std::size_t>(actual);
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.n);
  if (pos == 0 || pos == r.n) {
    r.single_class_test = true;
    return r;
  }
  r.roc_points = roc_curve(scores, labels);
  r.auc = roc_auc(scores, labels);
  return r;
}

EvalReport evaluate(const Predictor& model, const Dataset& test) {
  std::vector<double> scores(test.size());
  model.predict(test.x, scores);
  return evaluate_scores(scores, test.y);
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json roc = nlohmann::json::array();
  for (const auto& p : r.roc_points) roc.push_back({p.fpr, p.tpr});
  nlohmann::json j = {
      {"n", r.n},
      {"accuracy", r.accuracy},
      {"auc", r.auc ? nlohmann::json(*r.auc) : nlohmann::json(nullptr)},
      {"confusion", {{"tn", r.confusion[0][0]}, {"fp", r.confusion[0][1]}, {"fn", r.confusion[1][0]}, {"tp", r.confusion[1][1]}}},
      {"roc_points", roc},
  };
  if (r.single_class_test) j["warning"] = "SingleClassTest: AUC undefined";
  return j;
}

}  // namespace lmsrisk
