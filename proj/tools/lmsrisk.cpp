// lmsrisk: command-line entry point for the at-risk prediction pipeline.
//
// Exit codes: 0 ok, 1 usage or config, 2 ingest/featurize, 3 train,
// 4 missing upstream artifact, 5 any other analysis failure.

#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lmsrisk/csv.hpp"
#include "lmsrisk/error.hpp"
#include "lmsrisk/pipeline.hpp"

namespace {

using namespace lmsrisk;

enum Exit { kOk = 0, kUsage = 1, kIngest = 2, kTrain = 3, kMissing = 4, kAnalysis = 5 };

struct Flags {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> lur, gr, synthetic;
  std::vector<std::string> families;
  std::optional<int> folds;
  std::optional<std::string> k_range;
  std::vector<int> k;
  std::optional<double> alpha;
  std::optional<std::size_t> shap_background, shap_instances;
  std::optional<std::string> oversample;
  std::optional<double> train_fraction;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "PipelineConfig JSON file")->check(CLI::ExistingFile);
  cmd->add_option("--out", f.out, "run directory (default: out)");
  cmd->add_option("--seed", f.seed, "master seed");
}

PipelineConfig build_config(const Flags& f) {
  PipelineConfig c = f.config.empty() ? PipelineConfig{} : load_pipeline_config(f.config);
  if (f.out) c.output_dir = *f.out;
  if (f.seed) c.seed = *f.seed;
  if (f.lur) c.lur_path = *f.lur;
  if (f.gr) c.gr_path = *f.gr;
  if (f.synthetic) {
    if (!std::filesystem::exists(*f.synthetic)) {
      throw Error(ErrorCode::Io, "synthetic config " + *f.synthetic + " does not exist");
    }
    c.synthetic = synthetic_config_from_json(nlohmann::json::parse(csv::read_text(*f.synthetic)));
    c.lur_path.reset();
    c.gr_path.reset();
  }
  if (!f.families.empty()) c.families = parse_families(f.families);
  if (f.folds) c.cv_folds = *f.folds;
  if (f.k_range) std::tie(c.k_min, c.k_max) = parse_k_range(*f.k_range);
  if (!f.k.empty()) c.cluster_k_override = f.k;
  if (f.alpha) c.alpha = *f.alpha;
  if (f.shap_background) c.shap_background = *f.shap_background;
  if (f.shap_instances) c.shap_instances = *f.shap_instances;
  if (f.train_fraction) c.train_fraction = *f.train_fraction;
  if (f.oversample) c.oversample = parse_oversample(*f.oversample);
  c.validate();
  return c;
}

int exit_code(Stage stage, const Error& e) {
  if (e.code() == ErrorCode::MissingArtifact) return kMissing;
  if (e.code() == ErrorCode::InvalidConfig) return kUsage;
  switch (stage) {
    case Stage::Ingest:
    case Stage::Featurize: return kIngest;
    case Stage::Train: return kTrain;
    default: return kAnalysis;
  }
}

int run_stages(const Flags& flags, const std::vector<Stage>& stages) {
  PipelineConfig config;
  try {
    config = build_config(flags);
  } catch (const Error& e) {
    std::cerr << "lmsrisk: " << e.what() << '\n';
    return e.code() == ErrorCode::Io ? kIngest : kUsage;
  } catch (const std::exception& e) {
    std::cerr << "lmsrisk: " << e.what() << '\n';
    return kUsage;
  }
  for (Stage stage : stages) {
    try {
      switch (stage) {
        case Stage::Ingest: run_ingest(config); break;
        case Stage::Featurize: run_featurize(config); break;
        case Stage::Train: run_train(config); break;
        case Stage::Explain: run_explain(config); break;
        case Stage::Cluster: run_cluster(config); break;
        case Stage::Stats: run_stats(config); break;
        case Stage::Report: run_report(config); break;
      }
    } catch (const Error& e) {
      std::cerr << "lmsrisk " << to_string(stage) << ": " << e.what() << '\n';
      return exit_code(stage, e);
    } catch (const std::exception& e) {
      std::cerr << "lmsrisk " << to_string(stage) << ": " << e.what() << '\n';
      return stage == Stage::Train ? kTrain : (stage <= Stage::Featurize ? kIngest : kAnalysis);
    }
  }
  return kOk;
}

int run_synth(const std::string& config_path, const std::string& out, std::optional<std::uint64_t> seed,
              std::optional<std::size_t> n) {
  try {
    SyntheticConfig c;
    if (!config_path.empty()) c = synthetic_config_from_json(nlohmann::json::parse(csv::read_text(config_path)));
    if (seed) c.seed = *seed;
    if (n) c.n_students = *n;
    c.validate();
    write_synthetic_exports(c, out);
    log_message(1, "synth: wrote " + std::to_string(c.n_students) + " students to " + out);
    return kOk;
  } catch (const std::exception& e) {
    std::cerr << "lmsrisk synth: " << e.what() << '\n';
    return kUsage;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"At-risk student prediction from LMS usage logs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  Flags flags;
  int status = kOk;
  auto stage_cmd = [&](const char* name, const char* help, std::vector<Stage> stages) {
    CLI::App* cmd = app.add_subcommand(name, help);
    add_common(cmd, flags);
    cmd->callback([&flags, &status, stages] { status = run_stages(flags, stages); });
    return cmd;
  };

  CLI::App* ingest = stage_cmd("ingest", "parse, join and filter the LUR/GR exports", {Stage::Ingest});
  CLI::App* featurize = stage_cmd("featurize", "select, normalize and label features; split", {Stage::Featurize});
  CLI::App* train = stage_cmd("train", "grid-search, fit and evaluate model families", {Stage::Train});
  CLI::App* explain = stage_cmd("explain", "exact Shapley attributions and rank table", {Stage::Explain});
  CLI::App* cluster = stage_cmd("cluster", "k-means with elbow and silhouette selection", {Stage::Cluster});
  CLI::App* stats = stage_cmd("stats", "ANOVA and Tukey HSD across clusters", {Stage::Stats});
  stage_cmd("report", "bundle artifacts and digest them into the manifest", {Stage::Report});
  CLI::App* run = stage_cmd("run", "all stages in order",
                            {Stage::Ingest, Stage::Featurize, Stage::Train, Stage::Explain, Stage::Cluster,
                             Stage::Stats, Stage::Report});

  for (CLI::App* cmd : {ingest, run}) {
    cmd->add_option("--lur", flags.lur, "Learner Usage Report CSV");
    cmd->add_option("--gr", flags.gr, "Grades Report CSV");
    cmd->add_option("--synthetic", flags.synthetic, "SyntheticConfig JSON; generates the cohort");
  }
  for (CLI::App* cmd : {featurize, run}) {
    cmd->add_option("--oversample", flags.oversample, "before_split | train_only | none");
    cmd->add_option("--train-fraction", flags.train_fraction);
  }
  for (CLI::App* cmd : {train, explain, run}) {
    cmd->add_option("--family", flags.families, "model family name or 'all'")->delimiter(',');
  }
  for (CLI::App* cmd : {train, run}) cmd->add_option("--folds", flags.folds, "cross-validation folds");
  for (CLI::App* cmd : {explain, run}) {
    cmd->add_option("--shap-background", flags.shap_background);
    cmd->add_option("--shap-instances", flags.shap_instances);
  }
  for (CLI::App* cmd : {cluster, run}) {
    cmd->add_option("--k-range", flags.k_range, "candidate k, e.g. 1..10");
    cmd->add_option("--k", flags.k, "profile these k instead of the selected ones")->delimiter(',');
  }
  for (CLI::App* cmd : {stats, run}) cmd->add_option("--alpha", flags.alpha, "significance level");

  std::string synth_config, synth_out = "synthetic";
  std::optional<std::uint64_t> synth_seed;
  std::optional<std::size_t> synth_n;
  CLI::App* synth = app.add_subcommand("synth", "write a seeded synthetic LUR/GR export pair");
  synth->add_option("--config", synth_config, "SyntheticConfig JSON")->check(CLI::ExistingFile);
  synth->add_option("--out", synth_out, "output directory");
  synth->add_option("--seed", synth_seed);
  synth->add_option("--n", synth_n, "number of students");
  synth->callback([&] { status = run_synth(synth_config, synth_out, synth_seed, synth_n); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }
  return status;
}
