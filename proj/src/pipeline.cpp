#include "lmsrisk/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <set>
#include <sstream>

#include "lmsrisk/csv.hpp"
#include "lmsrisk/digest.hpp"
#include "lmsrisk/error.hpp"
#include "lmsrisk/explain.hpp"
#include "lmsrisk/metrics.hpp"
#include "lmsrisk/random.hpp"
#include "lmsrisk/stats.hpp"
#include "lmsrisk/svg.hpp"

namespace lmsrisk {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

namespace {

std::string placement_name(OversamplePlacement p) {
  switch (p) {
    case OversamplePlacement::BeforeSplit: return "before_split";
    case OversamplePlacement::TrainOnly: return "train_only";
    case OversamplePlacement::None: return "none";
  }
  return "before_split";
}

}  // namespace

OversamplePlacement parse_oversample(const std::string& s) {
  if (s == "before_split") return OversamplePlacement::BeforeSplit;
  if (s == "train_only") return OversamplePlacement::TrainOnly;
  if (s == "none") return OversamplePlacement::None;
  throw Error(ErrorCode::InvalidConfig, "oversample must be before_split, train_only or none, got '" + s + "'");
}

namespace {

Family family_or_throw(const std::string& name) {
  auto f = parse_family(name);
  if (!f) throw Error(ErrorCode::InvalidConfig, "unknown model family '" + name + "'");
  return *f;
}

}  // namespace

std::vector<Family> parse_families(const std::vector<std::string>& names) {
  std::vector<Family> out;
  for (const auto& name : names) {
    if (name == "all") return {std::begin(kAllFamilies), std::end(kAllFamilies)};
    out.push_back(family_or_throw(name));
  }
  return out;
}

std::pair<int, int> parse_k_range(const std::string& s) {
  const auto dots = s.find("..");
  if (dots != std::string::npos) {
    try {
      std::size_t used_lo = 0, used_hi = 0;
      const std::string lo = s.substr(0, dots), hi = s.substr(dots + 2);
      const int a = std::stoi(lo, &used_lo), b = std::stoi(hi, &used_hi);
      if (used_lo == lo.size() && used_hi == hi.size()) return {a, b};
    } catch (const std::exception&) {
    }
  }
  throw Error(ErrorCode::InvalidConfig, "k range must look like lo..hi, got '" + s + "'");
}

namespace {

std::pair<int, int> k_range_from_json(const json& v) {
  if (v.is_array() && v.size() == 2) return {v[0].get<int>(), v[1].get<int>()};
  if (v.is_string()) return parse_k_range(v.get<std::string>());
  throw Error(ErrorCode::InvalidConfig, "k_range must be [lo, hi] or \"lo..hi\"");
}

}  // namespace

void PipelineConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidConfig, m); };
  if (!(max_missing_fraction >= 0.0 && max_missing_fraction <= 1.0)) fail("max_missing_fraction must lie in [0, 1]");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) fail("train_fraction must lie in (0, 1)");
  if (!(label_policy.threshold > 0.0 && label_policy.threshold <= 100.0)) fail("label threshold must lie in (0, 100]");
  if (families.empty()) fail("no model families selected");
  if (cv_folds < 2) fail("cv_folds must be >= 2");
  if (shap_background < 1) fail("shap_background must be >= 1");
  if (shap_instances < 1) fail("shap_instances must be >= 1");
  if (k_min < 1 || k_max < k_min) fail("k_range must satisfy 1 <= lo <= hi");
  for (int k : cluster_k_override) {
    if (k < 1) fail("cluster_k_override entries must be >= 1");
  }
  if (kmeans.n_restarts < 1 || kmeans.max_iter < 1 || !(kmeans.tol >= 0)) fail("invalid kmeans options");
  if (!(alpha > 0.0 && alpha < 1.0)) fail("alpha must lie in (0, 1)");
  if (lur_path.has_value() != gr_path.has_value()) fail("lur and gr must be given together");
  if (synthetic) synthetic->validate();
  for (const auto& [family, grid] : grids) expand_grid(grid);
}

Grid PipelineConfig::grid_for(Family family) const {
  if (auto it = grids.find(family); it != grids.end()) return it->second;
  return default_grid(family);
}

json to_json(const PipelineConfig& c) {
  json families = json::array();
  json grids = json::object();
  for (Family f : c.families) {
    families.push_back(std::string(to_string(f)));
    json g = json::object();
    for (const auto& [name, values] : c.grid_for(f)) g[name] = values;
    grids[std::string(to_string(f))] = g;
  }
  json j = {
      {"seed", c.seed},
      {"output_dir", c.output_dir.generic_string()},
      {"max_missing_fraction", c.max_missing_fraction},
      {"label_policy", {{"threshold", c.label_policy.threshold}, {"use_adjusted_fallback", c.label_policy.use_adjusted_fallback}}},
      {"train_fraction", c.train_fraction},
      {"oversample", placement_name(c.oversample)},
      {"families", families},
      {"grids", grids},
      {"cv_folds", c.cv_folds},
      {"shap_background", c.shap_background},
      {"shap_instances", c.shap_instances},
      {"k_range", {c.k_min, c.k_max}},
      {"kmeans", {{"n_restarts", c.kmeans.n_restarts}, {"max_iter", c.kmeans.max_iter}, {"tol", c.kmeans.tol}}},
      {"cluster_k_override", c.cluster_k_override},
      {"alpha", c.alpha},
  };
  if (c.lur_path) j["lur"] = c.lur_path->generic_string();
  if (c.gr_path) j["gr"] = c.gr_path->generic_string();
  if (c.synthetic) j["synthetic"] = to_json(*c.synthetic);
  return j;
}

PipelineConfig pipeline_config_from_json(const json& j, const fs::path& base_dir) {
  PipelineConfig c;
  try {
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "pipeline config must be a JSON object");
    static const std::set<std::string> known = {
        "seed", "output_dir", "lur", "gr", "synthetic", "max_missing_fraction", "label_policy", "train_fraction",
        "oversample", "families", "grids", "cv_folds", "shap_background", "shap_instances", "k_range", "kmeans",
        "cluster_k_override", "alpha"};
    for (const auto& [key, value] : j.items()) {
      if (!known.contains(key)) throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
    }
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() || base_dir.empty() ? fs::path(p) : base_dir / p; };
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("output_dir")) c.output_dir = resolve(j.at("output_dir").get<std::string>());
    if (j.contains("lur")) c.lur_path = resolve(j.at("lur").get<std::string>());
    if (j.contains("gr")) c.gr_path = resolve(j.at("gr").get<std::string>());
    if (j.contains("synthetic")) {
      const json& s = j.at("synthetic");
      if (s.is_string()) {
        const fs::path p = resolve(s.get<std::string>());
        if (!fs::exists(p)) throw Error(ErrorCode::Io, "synthetic config " + p.string() + " does not exist");
        c.synthetic = synthetic_config_from_json(json::parse(csv::read_text(p)));
      } else {
        c.synthetic = synthetic_config_from_json(s);
      }
    }
    if (j.contains("max_missing_fraction")) c.max_missing_fraction = j.at("max_missing_fraction").get<double>();
    if (j.contains("label_policy")) {
      const json& lp = j.at("label_policy");
      c.label_policy.threshold = lp.value("threshold", c.label_policy.threshold);
      c.label_policy.use_adjusted_fallback = lp.value("use_adjusted_fallback", c.label_policy.use_adjusted_fallback);
    }
    if (j.contains("train_fraction")) c.train_fraction = j.at("train_fraction").get<double>();
    if (j.contains("oversample")) c.oversample = parse_oversample(j.at("oversample").get<std::string>());
    if (j.contains("families")) {
      c.families = parse_families(j.at("families").get<std::vector<std::string>>());
    }
    if (j.contains("grids")) {
      for (const auto& [name, grid] : j.at("grids").items()) {
        Grid g;
        for (const auto& [hp, values] : grid.items()) {
          g[hp] = values.is_array() ? values.get<std::vector<json>>() : std::vector<json>{values};
        }
        c.grids[family_or_throw(name)] = std::move(g);
      }
    }
    if (j.contains("cv_folds")) c.cv_folds = j.at("cv_folds").get<int>();
    if (j.contains("shap_background")) c.shap_background = j.at("shap_background").get<std::size_t>();
    if (j.contains("shap_instances")) c.shap_instances = j.at("shap_instances").get<std::size_t>();
    if (j.contains("k_range")) std::tie(c.k_min, c.k_max) = k_range_from_json(j.at("k_range"));
    if (j.contains("kmeans")) {
      const json& km = j.at("kmeans");
      c.kmeans.n_restarts = km.value("n_restarts", c.kmeans.n_restarts);
      c.kmeans.max_iter = km.value("max_iter", c.kmeans.max_iter);
      c.kmeans.tol = km.value("tol", c.kmeans.tol);
    }
    if (j.contains("cluster_k_override")) c.cluster_k_override = j.at("cluster_k_override").get<std::vector<int>>();
    if (j.contains("alpha")) c.alpha = j.at("alpha").get<double>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("malformed pipeline config: ") + e.what());
  }
  c.validate();
  return c;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::InvalidConfig, "config file " + path.string() + " does not exist");
  json j;
  try {
    j = json::parse(csv::read_text(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, "config file " + path.string() + " is not valid JSON");
  }
  return pipeline_config_from_json(j, path.parent_path());
}

std::string config_hash(const PipelineConfig& config) {
  json j = to_json(config);
  j.erase("output_dir");
  return sha256_hex(j.dump());
}

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::Ingest: return "ingest";
    case Stage::Featurize: return "featurize";
    case Stage::Train: return "train";
    case Stage::Explain: return "explain";
    case Stage::Cluster: return "cluster";
    case Stage::Stats: return "stats";
    case Stage::Report: return "report";
  }
  return "unknown";
}

int verbosity() {
  static const int level = [] {
    const char* v = std::getenv("LMSRISK_VERBOSITY");
    if (!v || !*v) return 1;
    try {
      return std::stoi(v);
    } catch (const std::exception&) {
      return 1;
    }
  }();
  return level;
}

void log_message(int level, const std::string& message) {
  if (level <= verbosity()) std::cerr << message << '\n';
}

namespace artifacts {
std::string model(Family f) { return "models/" + std::string(to_string(f)) + ".json"; }
std::string metrics(Family f) { return "metrics/" + std::string(to_string(f)) + ".json"; }
std::string roc_svg(Family f) { return "metrics/" + std::string(to_string(f)) + "_roc.svg"; }
std::string shap(Family f) { return "explain/" + std::string(to_string(f)) + "_shap.json"; }
std::string shap_svg(Family f) { return "explain/" + std::string(to_string(f)) + "_shap.svg"; }
}  // namespace artifacts

// ---------------------------------------------------------------------------
// Stage plumbing
// ---------------------------------------------------------------------------

namespace {

class StageContext {
 public:
  StageContext(const PipelineConfig& config, Stage stage)
      : config_(config), start_(std::chrono::steady_clock::now()) {
    record_.stage = stage;
  }

  fs::path path(const std::string& rel) const { return config_.output_dir / rel; }

  /// Marks `rel` as an input, failing with MissingArtifact when absent.
  fs::path input(const std::string& rel, Stage producer) {
    const fs::path p = path(rel);
    if (!fs::exists(p)) {
      throw Error(ErrorCode::MissingArtifact,
                  "missing " + p.generic_string() + "; run the " + to_string(producer) + " stage first");
    }
    record_.inputs[rel] = sha256_file(p);
    return p;
  }

  void external_input(const fs::path& p) {
    if (!fs::exists(p)) throw Error(ErrorCode::Io, "input file " + p.string() + " does not exist");
    record_.inputs[p.filename().generic_string()] = sha256_file(p);
  }

  void write_text(const std::string& rel, const std::string& text) {
    csv::write_text(path(rel), text);
    record_.outputs[rel] = sha256_hex(text);
  }

  void write_json(const std::string& rel, const json& j) { write_text(rel, j.dump(2) + "\n"); }

  /// Records a file written by a library helper.
  void output(const std::string& rel) { record_.outputs[rel] = sha256_file(path(rel)); }

  StageRecord finish();

 private:
  const PipelineConfig& config_;
  std::chrono::steady_clock::time_point start_;
  StageRecord record_;
};

json record_json(const StageRecord& r) {
  return {{"inputs", r.inputs}, {"outputs", r.outputs}, {"seconds", r.seconds}};
}

void merge_manifest(const PipelineConfig& config, const StageRecord& record,
                    const std::map<std::string, std::string>* artifacts = nullptr) {
  const fs::path p = config.output_dir / artifacts::kManifest;
  const std::string hash = config_hash(config);
  json m;
  if (fs::exists(p)) {
    try {
      m = json::parse(csv::read_text(p));
    } catch (const json::exception&) {
      m = json();
    }
    if (!m.is_object() || m.value("config_hash", "") != hash) m = json();
  }
  if (m.is_null()) m = json::object();
  m["tool_version"] = kToolVersion;
  m["config_hash"] = hash;
  m["stages"][to_string(record.stage)] = record_json(record);
  if (artifacts) m["artifacts"] = *artifacts;
  csv::write_text(p, m.dump(2) + "\n");
}

StageRecord StageContext::finish() {
  record_.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  merge_manifest(config_, record_);
  log_message(2, to_string(record_.stage) + " finished in " + std::to_string(record_.seconds) + " s");
  return record_;
}

CohortTable read_cohort(StageContext& ctx) {
  auto usage = parse_lur(ctx.input(artifacts::kCohortLur, Stage::Ingest));
  auto grades = parse_gr(ctx.input(artifacts::kCohortGr, Stage::Ingest));
  return join_reports(std::move(usage), grades);
}

Dataset read_dataset(StageContext& ctx, const char* rel) {
  return to_dataset(read_instances(ctx.input(rel, Stage::Featurize)));
}

/// Seeded subset of `count` rows (all rows when fewer), in draw order.
std::vector<FeatureVector> sample_rows(const std::vector<FeatureVector>& x, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  const auto idx = rng.sample_without_replacement(x.size(), std::min(count, x.size()));
  std::vector<FeatureVector> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(x[i]);
  return out;
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream o;
  o.setf(std::ios::fixed);
  o.precision(digits);
  o << v;
  return o.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

StageRecord run_ingest(const PipelineConfig& config) {
  config.validate();
  StageContext ctx(config, Stage::Ingest);
  CohortTable cohort;
  json summary;
  if (config.synthetic) {
    SyntheticCohort syn = generate_synthetic(*config.synthetic);
    cohort = std::move(syn.cohort);
    ctx.write_json(artifacts::kTruth, to_json(syn.truth));
    summary["source"] = "synthetic";
    summary["synthetic_seed"] = config.synthetic->seed;
  } else if (config.lur_path && config.gr_path) {
    ctx.external_input(*config.lur_path);
    ctx.external_input(*config.gr_path);
    auto usage = parse_lur(*config.lur_path);
    auto grades = parse_gr(*config.gr_path);
    summary["source"] = "exports";
    summary["grade_rows"] = grades.size();
    cohort = join_reports(std::move(usage), grades);
  } else {
    throw Error(ErrorCode::InvalidConfig, "ingest needs --lur and --gr, or --synthetic");
  }
  FilterCounts counts;
  const CohortTable filtered = filter_courses(cohort, &counts);
  write_cohort(filtered, ctx.path(artifacts::kCohortLur), ctx.path(artifacts::kCohortGr));
  ctx.output(artifacts::kCohortLur);
  ctx.output(artifacts::kCohortGr);
  summary["usage_rows"] = cohort.rows.size();
  summary["orphan_grade_rows"] = cohort.orphan_grade_rows;
  summary["excluded_school_rows"] = counts.excluded_school;
  summary["excluded_summer_rows"] = counts.excluded_summer;
  summary["excluded_role_rows"] = counts.excluded_role;
  summary["retained_rows"] = filtered.rows.size();
  ctx.write_json(artifacts::kIngestSummary, summary);
  log_message(1, "ingest: " + std::to_string(cohort.rows.size()) + " usage rows, " +
                     std::to_string(filtered.rows.size()) + " retained (school " + std::to_string(counts.excluded_school) +
                     ", summer " + std::to_string(counts.excluded_summer) + ", role " +
                     std::to_string(counts.excluded_role) + " dropped; " + std::to_string(cohort.orphan_grade_rows) +
                     " orphan grade rows)");
  return ctx.finish();
}

StageRecord run_featurize(const PipelineConfig& config) {
  config.validate();
  StageContext ctx(config, Stage::Featurize);
  const CohortTable cohort = read_cohort(ctx);
  const FeatureSelection selection = select_features(cohort, config.max_missing_fraction);
  auto [complete, dropped_incomplete] = retain_complete_rows(cohort, selection);
  const FeatureMatrix matrix = normalize_per_section(complete);
  const LabelResult labels = label(complete, matrix, config.label_policy);

  std::vector<LabeledInstance> train_rows, test_rows;
  const std::uint64_t over_seed = derive_seed(config.seed, "oversample");
  const SplitSpec spec{config.train_fraction, derive_seed(config.seed, "split")};
  switch (config.oversample) {
    case OversamplePlacement::BeforeSplit: {
      auto sp = split(oversample(labels.instances, over_seed), spec);
      train_rows = std::move(sp.train);
      test_rows = std::move(sp.test);
      break;
    }
    case OversamplePlacement::TrainOnly: {
      auto sp = split(labels.instances, spec);
      train_rows = oversample(sp.train, over_seed);
      test_rows = std::move(sp.test);
      break;
    }
    case OversamplePlacement::None: {
      auto sp = split(labels.instances, spec);
      train_rows = std::move(sp.train);
      test_rows = std::move(sp.test);
      break;
    }
  }
  write_instances(ctx.path(artifacts::kInstances), labels.instances);
  ctx.output(artifacts::kInstances);
  write_instances(ctx.path(artifacts::kTrain), train_rows);
  ctx.output(artifacts::kTrain);
  write_instances(ctx.path(artifacts::kTest), test_rows);
  ctx.output(artifacts::kTest);

  std::size_t at_risk = 0;
  for (const auto& inst : labels.instances) at_risk += inst.at_risk;
  json missing = json::array();
  for (const auto& m : selection.missingness) {
    missing.push_back({{"feature", m.feature}, {"missing", m.missing}, {"total", m.total}, {"fraction", m.fraction()}});
  }
  json vif;
  try {
    vif = to_json(compute_vif(matrix));
  } catch (const Error& e) {
    vif = {{"error", e.what()}};
  }
  const double prevalence = labels.instances.empty() ? 0.0 : static_cast<double>(at_risk) / static_cast<double>(labels.instances.size());
  ctx.write_json(artifacts::kFeatures, {{"selected", selection.selected},
                                        {"missingness", missing},
                                        {"dropped_incomplete_rows", dropped_incomplete},
                                        {"dropped_without_grade", labels.dropped_without_grade},
                                        {"instances", labels.instances.size()},
                                        {"at_risk", at_risk},
                                        {"prevalence", prevalence},
                                        {"oversample", placement_name(config.oversample)},
                                        {"train_rows", train_rows.size()},
                                        {"test_rows", test_rows.size()},
                                        {"normalization", to_json(matrix)},
                                        {"vif", vif}});
  log_message(1, "featurize: " + std::to_string(labels.instances.size()) + " instances (" +
                     std::to_string(dropped_incomplete) + " incomplete, " + std::to_string(labels.dropped_without_grade) +
                     " without grade dropped), at-risk " + fixed(100.0 * prevalence, 1) + "%, train " +
                     std::to_string(train_rows.size()) + ", test " + std::to_string(test_rows.size()));
  return ctx.finish();
}

StageRecord run_train(const PipelineConfig& config) {
  config.validate();
  StageContext ctx(config, Stage::Train);
  const Dataset train_set = read_dataset(ctx, artifacts::kTrain);
  const Dataset test_set = read_dataset(ctx, artifacts::kTest);
  for (Family family : config.families) {
    const std::string name(to_string(family));
    const Grid grid = config.grid_for(family);
    const std::uint64_t seed = derive_seed(config.seed, "train." + name);
    GridSearchResult gs;
    try {
      gs = grid_search(family, grid, train_set, config.cv_folds, seed);
    } catch (const Error& e) {
      json g = json::object();
      for (const auto& [k, v] : grid) g[k] = v;
      throw Error(e.code(), name + " grid " + g.dump() + ": " + e.detail());
    }
    TrainedModel model = [&] {
      try {
        return train(gs.best_spec, train_set);
      } catch (const Error& e) {
        throw Error(e.code(), name + " spec " + to_json(gs.best_spec).dump() + ": " + e.detail());
      }
    }();
    const EvalReport report = evaluate(model, test_set);
    ctx.write_text(artifacts::model(family), model.to_json().dump(1) + "\n");
    ctx.write_json(artifacts::metrics(family),
                   {{"family", name}, {"best_spec", to_json(gs.best_spec)}, {"grid_search", to_json(gs)},
                    {"evaluation", to_json(report)}});
    svg::LineChart roc{"ROC: " + name, "false positive rate", "true positive rate", {}, std::numeric_limits<double>::quiet_NaN(), "", true};
    svg::Series s{report.auc ? "AUC " + fixed(*report.auc, 3) : "AUC undefined", {}};
    for (const auto& p : report.roc_points) s.points.emplace_back(p.fpr, p.tpr);
    roc.series.push_back(std::move(s));
    ctx.write_text(artifacts::roc_svg(family), svg::line_chart(roc));
    log_message(1, "train: " + name + " accuracy " + fixed(report.accuracy) + " AUC " +
                       (report.auc ? fixed(*report.auc) : std::string("n/a")));
  }

  // Table-5-shaped summary over every family with metrics on disk.
  json rows = json::array();
  std::string table = "family\taccuracy\tauc\n";
  for (Family family : kAllFamilies) {
    const fs::path p = ctx.path(artifacts::metrics(family));
    if (!fs::exists(p)) continue;
    const json m = json::parse(csv::read_text(p));
    const json& ev = m.at("evaluation");
    rows.push_back({{"family", m.at("family")}, {"accuracy", ev.at("accuracy")}, {"auc", ev.at("auc")}});
    table += m.at("family").get<std::string>() + "\t" + fixed(ev.at("accuracy").get<double>()) + "\t" +
             (ev.at("auc").is_null() ? std::string("NA") : fixed(ev.at("auc").get<double>())) + "\n";
  }
  ctx.write_json(artifacts::kTrainSummary, {{"models", rows}});
  ctx.write_text(artifacts::kTrainTable, table);
  return ctx.finish();
}

StageRecord run_explain(const PipelineConfig& config) {
  config.validate();
  StageContext ctx(config, Stage::Explain);
  const Dataset train_set = read_dataset(ctx, artifacts::kTrain);
  const Dataset test_set = read_dataset(ctx, artifacts::kTest);
  const auto background = sample_rows(train_set.x, config.shap_background, derive_seed(config.seed, "explain.background"));
  const auto instances = sample_rows(test_set.x, config.shap_instances, derive_seed(config.seed, "explain.instances"));
  std::vector<ShapReport> reports;
  for (Family family : config.families) {
    const TrainedModel model = TrainedModel::load(ctx.input(artifacts::model(family), Stage::Train));
    ShapReport r = summarize(model, instances, background, std::string(to_string(family)));
    ctx.write_json(artifacts::shap(family), to_json(r));
    ctx.write_text(artifacts::shap_svg(family), svg::shap_summary(r));
    std::string ranks;
    for (std::size_t f = 0; f < kNumFeatures; ++f) ranks += (f ? "," : "") + std::to_string(r.rank[f]);
    log_message(1, "explain: " + r.model + " ranks (" + ranks + ")");
    reports.push_back(std::move(r));
  }
  const RankTable table = rank_table(reports);
  ctx.write_json(artifacts::kRankTable, to_json(table));
  ctx.write_text(artifacts::kRankTableText, format_rank_table(table));
  return ctx.finish();
}

StageRecord run_cluster(const PipelineConfig& config) {
  config.validate();
  StageContext ctx(config, Stage::Cluster);
  const auto instances = read_instances(ctx.input(artifacts::kInstances, Stage::Featurize));
  std::vector<FeatureVector> points;
  std::vector<double> grades;
  for (const auto& inst : instances) {
    points.push_back(inst.features);
    grades.push_back(inst.final_grade);
  }
  if (points.empty()) throw Error(ErrorCode::EmptyInput, "no instances to cluster");
  const int distinct = static_cast<int>(count_distinct(points));
  const int k_max = std::min(config.k_max, distinct);
  if (k_max < config.k_max) log_message(1, "cluster: k range capped at " + std::to_string(k_max) + " distinct points");
  const std::uint64_t seed = derive_seed(config.seed, "cluster");
  const KSelection sel = select_k(points, std::min(config.k_min, k_max), k_max, seed, config.kmeans);

  std::vector<int> ks = config.cluster_k_override;
  if (ks.empty()) {
    ks.push_back(sel.elbow.chosen_k);
    if (sel.silhouette.chosen_k > 0) ks.push_back(sel.silhouette.chosen_k);
  }
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());

  json fits = json::array();
  for (const auto& m : sel.models) fits.push_back(to_json(m, false));
  json profiles = json::array();
  for (int k : ks) {
    const int lo = std::min(config.k_min, k_max);
    const ClusterModel model = (k >= lo && k <= k_max)
                                   ? sel.models[static_cast<std::size_t>(k - lo)]
                                   : kmeans_fit(points, k, derive_seed(seed, "kmeans.k", static_cast<std::uint64_t>(k)), config.kmeans);
    const ClusterSummary summary = summarize_clusters(model, points, grades);
    std::vector<int> labels;
    labels.reserve(points.size());
    for (int a : model.assignments) labels.push_back(summary.relabel[static_cast<std::size_t>(a)]);
    profiles.push_back({{"k", k}, {"summary", to_json(summary)}, {"labels", labels},
                        {"centroids", model.centroids}, {"inertia", model.inertia}});

    std::vector<std::string> cats;
    for (auto n : kFeatureNames) cats.emplace_back(n);
    cats.emplace_back("final_grade");
    std::vector<svg::BarGroup> groups;
    for (const auto& p : summary.clusters) {
      svg::BarGroup g{"Cluster-" + std::to_string(p.label) + " (n=" + std::to_string(p.count) + ")", {}};
      g.values.assign(p.mean.begin(), p.mean.end());
      g.values.push_back(p.grade_mean);
      groups.push_back(std::move(g));
    }
    ctx.write_text("cluster/centroids_k" + std::to_string(k) + ".svg",
                   svg::grouped_bar_chart("Cluster means, k = " + std::to_string(k), cats, groups, 1.0));
  }

  auto curve_svg = [&](const KSelectionCurve& c, const std::string& title, const std::string& y) {
    svg::LineChart chart{title, "k", y, {}, static_cast<double>(c.chosen_k), "chosen k = " + std::to_string(c.chosen_k), false};
    svg::Series s{"", {}};
    for (const auto& [k, v] : c.points) s.points.emplace_back(k, v);
    chart.series.push_back(std::move(s));
    return svg::line_chart(chart);
  };
  ctx.write_text("cluster/elbow.svg", curve_svg(sel.elbow, "Elbow method", "sum of squared distances"));
  if (!sel.silhouette.points.empty()) {
    ctx.write_text("cluster/silhouette.svg", curve_svg(sel.silhouette, "Silhouette coefficient", "mean silhouette"));
  }
  ctx.write_json(artifacts::kCluster, {{"k_range", {std::min(config.k_min, k_max), k_max}},
                                       {"seed", seed},
                                       {"elbow", to_json(sel.elbow)},
                                       {"silhouette", to_json(sel.silhouette)},
                                       {"profiled_k", ks},
                                       {"profiles", profiles},
                                       {"fits", fits}});
  log_message(1, "cluster: elbow k = " + std::to_string(sel.elbow.chosen_k) + ", silhouette k = " +
                     std::to_string(sel.silhouette.chosen_k));
  return ctx.finish();
}

StageRecord run_stats(const PipelineConfig& config) {
  config.validate();
  StageContext ctx(config, Stage::Stats);
  const auto instances = read_instances(ctx.input(artifacts::kInstances, Stage::Featurize));
  const json cluster = json::parse(csv::read_text(ctx.input(artifacts::kCluster, Stage::Cluster)));

  std::vector<std::string> variables;
  for (auto n : kFeatureNames) variables.emplace_back(n);
  variables.emplace_back("final_grade");

  json analyses = json::array();
  std::ostringstream text;
  for (const auto& profile : cluster.at("profiles")) {
    const int k = profile.at("k").get<int>();
    const auto labels = profile.at("labels").get<std::vector<int>>();
    if (labels.size() != instances.size()) {
      throw Error(ErrorCode::FeatureMismatch, "cluster labels do not match the instance table; rerun cluster");
    }
    text << "k = " << k << '\n' << "variable\tF\tp\tsignificant pairs (alpha " << config.alpha << ")\n";
    json vars = json::array();
    for (std::size_t v = 0; v < variables.size(); ++v) {
      std::vector<std::vector<double>> groups(static_cast<std::size_t>(k));
      for (std::size_t i = 0; i < instances.size(); ++i) {
        const double value = v < kNumFeatures ? instances[i].features[v] : instances[i].final_grade;
        groups[static_cast<std::size_t>(labels[i] - 1)].push_back(value);
      }
      std::erase_if(groups, [](const auto& g) { return g.empty(); });
      json entry = {{"variable", variables[v]}};
      try {
        const AnovaResult a = anova_oneway(groups);
        entry["anova"] = to_json(a);
        entry["significant"] = a.p_value < config.alpha;
        std::string pairs;
        if (a.msw > 0) {
          const TukeyResult t = tukey_hsd(groups, config.alpha);
          json tj = to_json(t);
          for (auto& p : tj["pairs"]) {  // report 1-based cluster labels
            p["i"] = p["i"].get<int>() + 1;
            p["j"] = p["j"].get<int>() + 1;
          }
          entry["tukey"] = tj;
          for (const auto& p : t.pairs) {
            if (p.significant) pairs += (pairs.empty() ? "" : ", ") + std::string("C") + std::to_string(p.i + 1) + "-C" + std::to_string(p.j + 1);
          }
        }
        text << variables[v] << '\t' << (std::isinf(a.f) ? std::string("inf") : fixed(a.f, 3)) << '\t' << fixed(a.p_value, 4)
             << '\t' << (pairs.empty() ? "-" : pairs) << '\n';
      } catch (const Error& e) {
        entry["error"] = e.what();
        text << variables[v] << "\tNA\tNA\t" << e.what() << '\n';
      }
      vars.push_back(std::move(entry));
    }
    text << '\n';
    analyses.push_back({{"k", k}, {"variables", vars}});
  }
  ctx.write_json(artifacts::kStats, {{"alpha", config.alpha}, {"analyses", analyses}});
  ctx.write_text(artifacts::kStatsText, text.str());
  log_message(1, "stats: " + std::to_string(analyses.size()) + " clusterings analyzed");
  return ctx.finish();
}

StageRecord run_report(const PipelineConfig& config) {
  config.validate();
  StageContext ctx(config, Stage::Report);
  auto load = [&](const char* rel, Stage producer) { return json::parse(csv::read_text(ctx.input(rel, producer))); };
  const json ingest = load(artifacts::kIngestSummary, Stage::Ingest);
  const json features = load(artifacts::kFeatures, Stage::Featurize);
  const json table5 = load(artifacts::kTrainSummary, Stage::Train);
  const json ranks = load(artifacts::kRankTable, Stage::Explain);
  const json cluster = load(artifacts::kCluster, Stage::Cluster);
  const json stats = load(artifacts::kStats, Stage::Stats);

  json profiles = json::array();
  for (const auto& p : cluster.at("profiles")) profiles.push_back({{"k", p.at("k")}, {"summary", p.at("summary")}});
  json features_brief = features;
  features_brief.erase("normalization");
  ctx.write_json(artifacts::kReport, {{"tool_version", kToolVersion},
                                      {"config_hash", config_hash(config)},
                                      {"config", [&] {
                                         json c = to_json(config);
                                         c.erase("output_dir");
                                         return c;
                                       }()},
                                      {"ingest", ingest},
                                      {"features", features_brief},
                                      {"models", table5.at("models")},
                                      {"feature_importance", ranks},
                                      {"k_selection", {{"elbow", cluster.at("elbow")}, {"silhouette", cluster.at("silhouette")}}},
                                      {"clusters", profiles},
                                      {"stats", stats}});

  // Digest of every artifact except the manifest itself.
  std::map<std::string, std::string> all;
  for (const auto& entry : fs::recursive_directory_iterator(config.output_dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string rel = fs::relative(entry.path(), config.output_dir).generic_string();
    if (rel == artifacts::kManifest) continue;
    all[rel] = sha256_file(entry.path());
  }
  StageRecord record = ctx.finish();
  merge_manifest(config, record, &all);
  log_message(1, "report: " + std::to_string(all.size()) + " artifacts digested into " +
                     (config.output_dir / artifacts::kManifest).generic_string());
  return record;
}

std::vector<StageRecord> run_pipeline(const PipelineConfig& config) {
  std::vector<StageRecord> out;
  out.push_back(run_ingest(config));
  out.push_back(run_featurize(config));
  out.push_back(run_train(config));
  out.push_back(run_explain(config));
  out.push_back(run_cluster(config));
  out.push_back(run_stats(config));
  out.push_back(run_report(config));
  return out;
}

void write_synthetic_exports(const SyntheticConfig& config, const fs::path& dir) {
  const SyntheticCohort syn = generate_synthetic(config);
  write_cohort(syn.cohort, dir / "lur.csv", dir / "gr.csv");
  csv::write_text(dir / "truth.json", to_json(syn.truth).dump(2) + "\n");
  csv::write_text(dir / "synthetic_config.json", to_json(config).dump(2) + "\n");
}

}  // namespace lmsrisk
