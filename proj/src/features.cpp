#include "lmsrisk/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "lmsrisk/csv.hpp"
#include "lmsrisk/error.hpp"
#include "lmsrisk/random.hpp"

namespace lmsrisk {
namespace {

std::string key_of(const std::string& student, const std::string& section) {
  std::string key = student;
  key.push_back('\x1f');
  key += section;
  return key;
}

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

double parse_real_or_throw(const std::string& cell, std::size_t row) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw Error(ErrorCode::MalformedRow, "row " + std::to_string(row) + ": '" + cell + "' is not a number");
  }
  return v;
}

}  // namespace

FeatureSelection select_features(const CohortTable& cohort, double max_missing_fraction) {
  FeatureSelection out;
  for (const auto& field : numeric_usage_fields()) {
    MissingnessEntry e;
    e.feature = std::string(field.feature_name);
    e.total = cohort.rows.size();
    for (const auto& row : cohort.rows) e.missing += !field.get(row.usage).has_value();
    if (e.total > 0 && e.fraction() < max_missing_fraction) out.selected.push_back(e.feature);
    out.missingness.push_back(std::move(e));
  }
  if (out.selected.empty()) {
    throw Error(ErrorCode::NoFeaturesSelected,
                "no usage field has less than " + format_real(max_missing_fraction * 100.0) + "% missing values");
  }
  return out;
}

std::pair<CohortTable, std::size_t> retain_complete_rows(const CohortTable& cohort, const FeatureSelection& selection) {
  for (auto name : kFeatureNames) {
    if (std::find(selection.selected.begin(), selection.selected.end(), name) == selection.selected.end()) {
      throw Error(ErrorCode::FeatureMismatch, "model feature '" + std::string(name) + "' failed the missingness screen");
    }
  }
  CohortTable out;
  out.provenance = cohort.provenance;
  out.orphan_grade_rows = cohort.orphan_grade_rows;
  std::size_t dropped = 0;
  for (const auto& row : cohort.rows) {
    if (raw_features(row.usage)) out.rows.push_back(row);
    else ++dropped;
  }
  return {std::move(out), dropped};
}

std::optional<FeatureVector> raw_features(const LearnerUsageRecord& r) {
  if (!r.content_completed || !r.number_of_assignment_submissions || !r.total_time_spent_in_content ||
      !r.number_of_logins_to_the_system) {
    return std::nullopt;
  }
  return FeatureVector{static_cast<double>(*r.content_completed),
                       static_cast<double>(*r.number_of_assignment_submissions), *r.total_time_spent_in_content,
                       static_cast<double>(*r.number_of_logins_to_the_system)};
}

FeatureMatrix normalize_per_section(const std::vector<RawFeatureRow>& rows) {
  if (rows.empty()) throw Error(ErrorCode::EmptySection, "no rows to normalize");
  FeatureMatrix out;
  for (const auto& r : rows) {
    auto [it, inserted] = out.witnesses.try_emplace(r.section_id, SectionRange{r.raw, r.raw});
    if (!inserted) {
      for (std::size_t f = 0; f < kNumFeatures; ++f) {
        it->second.min[f] = std::min(it->second.min[f], r.raw[f]);
        it->second.max[f] = std::max(it->second.max[f], r.raw[f]);
      }
    }
  }
  out.rows.reserve(rows.size());
  for (const auto& r : rows) {
    const SectionRange& range = out.witnesses.at(r.section_id);
    FeatureRow row{r.student_id, r.section_id, {}};
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      double span = range.max[f] - range.min[f];
      row.values[f] = span > 0.0 ? std::clamp((r.raw[f] - range.min[f]) / span, 0.0, 1.0) : 0.0;
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

FeatureMatrix normalize_per_section(const CohortTable& cohort) {
  std::vector<RawFeatureRow> raw;
  raw.reserve(cohort.rows.size());
  for (const auto& row : cohort.rows) {
    auto values = raw_features(row.usage);
    if (!values) {
      throw Error(ErrorCode::FeatureMismatch, "student '" + row.usage.student_id + "' in section '" +
                                                  row.usage.section_id + "' lacks a model feature");
    }
    raw.push_back({row.usage.student_id, row.usage.section_id, *values});
  }
  return normalize_per_section(raw);
}

FeatureVector FeatureMatrix::apply(const std::string& section_id, const FeatureVector& raw) const {
  auto it = witnesses.find(section_id);
  if (it == witnesses.end()) throw Error(ErrorCode::FeatureMismatch, "no normalization range for section '" + section_id + "'");
  FeatureVector out{};
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    double span = it->second.max[f] - it->second.min[f];
    out[f] = span > 0.0 ? std::clamp((raw[f] - it->second.min[f]) / span, 0.0, 1.0) : 0.0;
  }
  return out;
}

Eigen::MatrixXd FeatureMatrix::design() const {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(kNumFeatures));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t f = 0; f < kNumFeatures; ++f) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) = rows[i].values[f];
  }
  return x;
}

nlohmann::json to_json(const FeatureMatrix& matrix) {
  nlohmann::json sections = nlohmann::json::object();
  for (const auto& [id, range] : matrix.witnesses) {
    sections[id] = {{"min", range.min}, {"max", range.max}};
  }
  return {{"feature_names", kFeatureNames}, {"sections", sections}};
}

VifReport compute_vif(const Eigen::MatrixXd& design, std::vector<std::string> names) {
  const Eigen::Index n = design.rows();
  const Eigen::Index d = design.cols();
  if (d < 2) throw Error(ErrorCode::DegenerateDesign, "VIF needs at least two features");
  if (n <= d) throw Error(ErrorCode::DegenerateDesign, "VIF needs more rows than features");
  if (names.empty()) {
    for (Eigen::Index j = 0; j < d; ++j) names.push_back("x" + std::to_string(j));
  }

  VifReport report;
  report.features = std::move(names);
  for (Eigen::Index j = 0; j < d; ++j) {
    Eigen::VectorXd target = design.col(j);
    double mean = target.mean();
    double tss = (target.array() - mean).square().sum();
    if (!(tss > 0.0)) {
      throw Error(ErrorCode::DegenerateDesign, "feature '" + report.features[static_cast<std::size_t>(j)] + "' is constant");
    }
    Eigen::MatrixXd others(n, d);
    others.col(0).setOnes();
    for (Eigen::Index k = 0, c = 1; k < d; ++k) {
      if (k != j) others.col(c++) = design.col(k);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(others);
    Eigen::VectorXd beta = qr.solve(target);
    double rss = (target - others * beta).squaredNorm();
    double r2 = 1.0 - rss / tss;
    report.r_squared.push_back(r2);
    report.vif.push_back(r2 > 1.0 - 1e-12 ? std::numeric_limits<double>::infinity() : 1.0 / (1.0 - r2));
  }
  return report;
}

VifReport compute_vif(const FeatureMatrix& matrix) {
  std::vector<std::string> names(kFeatureNames.begin(), kFeatureNames.end());
  return compute_vif(matrix.design(), std::move(names));
}

nlohmann::json to_json(const VifReport& report) {
  nlohmann::json j = nlohmann::json::array();
  for (std::size_t f = 0; f < report.vif.size(); ++f) {
    nlohmann::json entry = {{"feature", report.features[f]}, {"r_squared", report.r_squared[f]}};
    if (report.is_infinite(f)) entry["vif"] = "infinite";
    else entry["vif"] = report.vif[f];
    j.push_back(std::move(entry));
  }
  return j;
}

bool is_at_risk(double final_grade_fraction, const LabelPolicy& policy) {
  return final_grade_fraction * 100.0 < policy.threshold;
}

LabelResult label(const CohortTable& cohort, const FeatureMatrix& matrix, const LabelPolicy& policy) {
  if (!(policy.threshold > 0.0 && policy.threshold < 100.0)) {
    throw Error(ErrorCode::InvalidConfig, "label threshold must lie in (0, 100)");
  }
  std::unordered_map<std::string, const CohortRow*> by_key;
  by_key.reserve(cohort.rows.size());
  for (const auto& row : cohort.rows) by_key.emplace(key_of(row.usage.student_id, row.usage.section_id), &row);

  LabelResult out;
  out.instances.reserve(matrix.rows.size());
  for (const auto& fr : matrix.rows) {
    auto it = by_key.find(key_of(fr.student_id, fr.section_id));
    std::optional<double> grade;
    if (it != by_key.end()) {
      grade = it->second->final_calculated();
      if (!grade && policy.use_adjusted_fallback) grade = it->second->final_adjusted();
    }
    if (!grade) {
      ++out.dropped_without_grade;
      continue;
    }
    LabeledInstance inst;
    inst.student_id = fr.student_id;
    inst.section_id = fr.section_id;
    inst.features = fr.values;
    inst.final_grade = *grade / 100.0;
    inst.at_risk = is_at_risk(inst.final_grade, policy);
    out.instances.push_back(std::move(inst));
  }
  return out;
}

std::vector<LabeledInstance> oversample(const std::vector<LabeledInstance>& instances, std::uint64_t seed) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < instances.size(); ++i) (instances[i].at_risk ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty()) throw Error(ErrorCode::SingleClass, "oversampling needs both classes");

  std::vector<LabeledInstance> out = instances;
  const auto& minority = pos.size() < neg.size() ? pos : neg;
  const std::size_t deficit = std::max(pos.size(), neg.size()) - minority.size();
  Rng rng(seed);
  out.reserve(instances.size() + deficit);
  for (std::size_t k = 0; k < deficit; ++k) out.push_back(instances[minority[rng.index(minority.size())]]);
  return out;
}

TrainTestSplit split(const std::vector<LabeledInstance>& instances, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "train_fraction must lie in (0, 1)");
  }
  const std::size_t n = instances.size();
  if (n < 2) throw Error(ErrorCode::TooFewInstances, "need at least 2 instances to split");
  const auto n_train = static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(n)));
  if (n_train == 0 || n_train == n) {
    throw Error(ErrorCode::TooFewInstances, std::to_string(n) + " instances leave one side of the split empty");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(spec.seed);
  rng.shuffle(order);

  TrainTestSplit out;
  out.train.reserve(n_train);
  out.test.reserve(n - n_train);
  for (std::size_t i = 0; i < n; ++i) (i < n_train ? out.train : out.test).push_back(instances[order[i]]);
  return out;
}

Dataset to_dataset(const std::vector<LabeledInstance>& instances) {
  Dataset d;
  d.x.reserve(instances.size());
  d.y.reserve(instances.size());
  for (const auto& inst : instances) {
    d.x.push_back(inst.features);
    d.y.push_back(inst.at_risk ? 1 : 0);
  }
  return d;
}

void write_instances(const std::filesystem::path& path, const std::vector<LabeledInstance>& instances) {
  std::vector<std::string> header = {"student_id", "section_id"};
  for (auto name : kFeatureNames) header.emplace_back(name);
  header.emplace_back("final_grade");
  header.emplace_back("at_risk");
  std::vector<std::vector<std::string>> rows;
  rows.reserve(instances.size());
  for (const auto& inst : instances) {
    std::vector<std::string> r = {inst.student_id, inst.section_id};
    for (double v : inst.features) r.push_back(format_real(v));
    r.push_back(format_real(inst.final_grade));
    r.emplace_back(inst.at_risk ? "1" : "0");
    rows.push_back(std::move(r));
  }
  csv::write_file(path, header, rows);
}

std::vector<LabeledInstance> read_instances(const std::filesystem::path& path) {
  csv::Table table = csv::read_file(path);
  std::vector<int> cols;
  std::vector<std::string> expected = {"student_id", "section_id"};
  for (auto name : kFeatureNames) expected.emplace_back(name);
  expected.emplace_back("final_grade");
  expected.emplace_back("at_risk");
  for (const auto& name : expected) {
    int c = table.column(name);
    if (c < 0) throw Error(ErrorCode::MissingColumn, "dataset " + path.string() + " lacks column '" + name + "'");
    cols.push_back(c);
  }
  std::vector<LabeledInstance> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    if (row.fields.size() != table.header.size()) {
      throw Error(ErrorCode::MalformedRow, "row " + std::to_string(row.number) + " of " + path.string());
    }
    auto cell = [&](std::size_t k) -> const std::string& { return row.fields[static_cast<std::size_t>(cols[k])]; };
    LabeledInstance inst;
    inst.student_id = cell(0);
    inst.section_id = cell(1);
    for (std::size_t f = 0; f < kNumFeatures; ++f) inst.features[f] = parse_real_or_throw(cell(2 + f), row.number);
    inst.final_grade = parse_real_or_throw(cell(2 + kNumFeatures), row.number);
    inst.at_risk = cell(3 + kNumFeatures) == "1";
    out.push_back(std::move(inst));
  }
  return out;
}

}  // namespace lmsrisk
