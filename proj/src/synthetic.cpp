#include "lmsrisk/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "lmsrisk/error.hpp"
#include "lmsrisk/random.hpp"

namespace lmsrisk {
namespace {

constexpr std::array<const char*, 5> kSchools = {
    "School of Business", "School of Education", "School of Health and Sciences",
    "School of Liberal Arts", "School of Science and Technology",
};

struct SectionScale {
  std::string id;
  Term term;
  std::string school;
  double content_items = 0;
  double assignments = 0;
  double minutes = 0;
  double logins = 0;
};

std::string padded(const char* prefix, std::size_t value, int width) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, value);
  return buf;
}

Term term_of(std::size_t section) {
  static const std::array<const char*, 3> terms = {"Fall2019", "Spring2020", "Fall2020"};
  return Term::parse(terms[section % terms.size()]);
}

std::string date_in(const Term& term, Rng& rng) {
  int year = term.kind == Term::Kind::Fall2019 ? 2019 : 2020;
  int month = term.kind == Term::Kind::Spring2020 ? 1 + static_cast<int>(rng.index(5))
            : term.kind == Term::Kind::Summer    ? 6 + static_cast<int>(rng.index(2))
                                                 : 8 + static_cast<int>(rng.index(5));
  int day = 1 + static_cast<int>(rng.index(28));
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
  return buf;
}

SectionScale make_section(std::uint64_t seed, std::size_t index, std::string id, Term term, std::string school) {
  Rng rng(derive_seed(seed, "synthetic.section", index));
  SectionScale s;
  s.id = std::move(id);
  s.term = std::move(term);
  s.school = std::move(school);
  s.content_items = static_cast<double>(20 + rng.index(101));
  s.assignments = static_cast<double>(8 + rng.index(33));
  s.minutes = rng.uniform(600.0, 6000.0);
  s.logins = static_cast<double>(40 + rng.index(361));
  return s;
}

std::size_t draw_cluster(const std::array<double, kNumPlantedClusters>& weights, Rng& rng) {
  double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t c = 0; c < weights.size(); ++c) {
    acc += weights[c];
    if (u < acc) return c;
  }
  // Rounding slack: fall back to the last cluster with positive weight.
  for (std::size_t c = weights.size(); c-- > 0;) {
    if (weights[c] > 0.0) return c;
  }
  return 0;
}

struct Student {
  CohortRow row;
  std::size_t cluster = 0;
  FeatureVector latent{};
};

Student make_student(const SyntheticConfig& cfg, const SectionScale& section, std::string student_id,
                     Role role, std::uint64_t stream) {
  Rng rng(stream);
  Student s;
  s.cluster = draw_cluster(cfg.cluster_weights, rng);
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    double z = cfg.cluster_centroids[s.cluster][f] + cfg.feature_noise_sd * rng.normal();
    s.latent[f] = std::clamp(z, 0.0, 1.0);
  }

  LearnerUsageRecord& u = s.row.usage;
  u.student_id = std::move(student_id);
  u.section_id = section.id;
  u.term = section.term;
  u.school = section.school;
  u.role = role;

  auto count = [](double latent, double cap) { return static_cast<std::int64_t>(std::llround(latent * cap)); };
  auto present = [&](double missing_rate) { return !rng.bernoulli(missing_rate); };

  if (present(0.02)) u.content_completed = count(s.latent[kContentCompleted], section.content_items);
  if (present(0.02)) u.number_of_assignment_submissions = count(s.latent[kAssignmentSubmissions], section.assignments);
  if (present(0.02)) u.total_time_spent_in_content = std::round(s.latent[kTimeInContent] * section.minutes * 10.0) / 10.0;
  if (present(0.02)) u.number_of_logins_to_the_system = count(s.latent[kLogins], section.logins);

  // Fields that the missingness screen should reject.
  if (present(0.40)) u.content_required = static_cast<std::int64_t>(section.content_items);
  if (present(0.70)) u.checklist_completed = static_cast<std::int64_t>(rng.index(6));
  if (present(0.35)) {
    u.quiz_completed = static_cast<std::int64_t>(rng.index(12));
    u.total_quiz_attempts = *u.quiz_completed + static_cast<std::int64_t>(rng.index(6));
  }
  if (present(0.55)) {
    u.discussion_post_created = static_cast<std::int64_t>(rng.index(10));
    u.discussion_post_replies = static_cast<std::int64_t>(rng.index(15));
    u.discussion_post_read = static_cast<std::int64_t>(rng.index(80));
    u.last_discussion_post_date = date_in(section.term, rng);
  }
  if (u.number_of_assignment_submissions && *u.number_of_assignment_submissions > 0) {
    u.last_assignment_submission_date = date_in(section.term, rng);
  }
  if (present(0.05)) u.last_visited_date = date_in(section.term, rng);
  if (present(0.05)) u.last_system_login = date_in(section.term, rng);

  // Grades.
  double score = cfg.grade_intercept + cfg.grade_noise_sd * rng.normal();
  for (std::size_t f = 0; f < kNumFeatures; ++f) score += cfg.grade_weights[f] * s.latent[f];
  double grade = std::round(100.0 * std::clamp(score, 0.0, 1.0) * 100.0) / 100.0;
  if (rng.bernoulli(cfg.label_noise_rate)) {
    const double t = cfg.at_risk_threshold;
    grade = grade < t ? std::min(100.0, 2.0 * t - grade) : std::min(2.0 * t - grade, t - 0.01);
    grade = std::max(0.0, grade);
  }

  auto add_grade = [&](GradeItem::Kind kind, const char* label, std::optional<double> value) {
    GradeRecord g;
    g.student_id = u.student_id;
    g.section_id = u.section_id;
    g.item.kind = kind;
    g.item.label = label;
    g.grade_value = value;
    s.row.grades.push_back(std::move(g));
  };
  if (role == Role::Student) {
    add_grade(GradeItem::Kind::Other, "Assignment 1", std::round(rng.uniform(40.0, 100.0)));
    add_grade(GradeItem::Kind::Other, "Quiz 1", std::round(rng.uniform(30.0, 100.0)));
    double source = rng.uniform();
    if (source < 0.92) {
      add_grade(GradeItem::Kind::FinalCalculated, "Final Calculated Grade", grade);
    } else if (source < 0.99) {
      add_grade(GradeItem::Kind::FinalCalculated, "Final Calculated Grade", std::nullopt);
      add_grade(GradeItem::Kind::FinalAdjusted, "Final Adjusted Grade", grade);
    }
  }
  return s;
}

}  // namespace

void SyntheticConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (n_students == 0) fail("n_students must be positive");
  if (n_sections == 0) fail("n_sections must be positive");
  double total = 0.0;
  for (double w : cluster_weights) {
    if (!(w >= 0.0)) fail("cluster weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) fail("cluster weights must sum to 1");
  for (const auto& c : cluster_centroids) {
    for (double v : c) {
      if (!(v >= 0.0 && v <= 1.0)) fail("centroid coordinates must lie in [0, 1]");
    }
  }
  if (!(feature_noise_sd > 0.0)) fail("feature_noise_sd must be positive");
  if (!(label_noise_rate >= 0.0 && label_noise_rate < 0.5)) fail("label_noise_rate must lie in [0, 0.5)");
  for (double w : grade_weights) {
    if (!(w >= 0.0)) fail("grade weights must be non-negative");
  }
  if (!(grade_noise_sd >= 0.0)) fail("grade_noise_sd must be non-negative");
  if (!(at_risk_threshold > 0.0 && at_risk_threshold < 100.0)) fail("at_risk_threshold must lie in (0, 100)");
}

SyntheticCohort generate_synthetic(const SyntheticConfig& config) {
  config.validate();
  SyntheticCohort out;
  out.cohort.provenance = Provenance{true, config.seed};

  std::vector<SectionScale> sections;
  sections.reserve(config.n_sections);
  for (std::size_t s = 0; s < config.n_sections; ++s) {
    sections.push_back(make_section(config.seed, s, padded("SEC", s + 1, 3), term_of(s), kSchools[s % kSchools.size()]));
  }

  // Section assignment comes from its own stream so the per-student streams
  // stay aligned with student index.
  Rng placement(derive_seed(config.seed, "synthetic.placement"));
  std::vector<std::vector<Student>> by_section(config.n_sections);
  for (std::size_t i = 0; i < config.n_students; ++i) {
    std::size_t s = placement.index(config.n_sections);
    by_section[s].push_back(make_student(config, sections[s], padded("S", i + 1, 6), Role::Student,
                                         derive_seed(config.seed, "synthetic.student", i)));
  }

  auto& truth = out.truth;
  truth.seed = config.seed;
  truth.grade_weights = config.grade_weights;
  truth.grade_intercept = config.grade_intercept;
  truth.centroids = config.cluster_centroids;
  truth.cluster_weights = config.cluster_weights;
  std::vector<std::size_t> order(kNumFeatures);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return config.grade_weights[a] > config.grade_weights[b]; });
  for (std::size_t f : order) truth.importance_order.emplace_back(kFeatureNames[f]);

  for (std::size_t s = 0; s < config.n_sections; ++s) {
    for (auto& st : by_section[s]) {
      truth.students.push_back({st.row.usage.student_id, st.row.usage.section_id, static_cast<int>(st.cluster) + 1, st.latent});
      out.cohort.rows.push_back(std::move(st.row));
    }
    if (config.include_excluded_rows) {
      auto instructor = make_student(config, sections[s], padded("I", s + 1, 4), Role::Instructor,
                                     derive_seed(config.seed, "synthetic.instructor", s));
      out.cohort.rows.push_back(std::move(instructor.row));
    }
  }

  if (config.include_excluded_rows) {
    SectionScale career = make_section(config.seed, config.n_sections, "SEC_CC", Term::parse("Fall2020"), "Career Center");
    SectionScale summer = make_section(config.seed, config.n_sections + 1, "SEC_SU", Term::parse("Summer2020"),
                                       kSchools[0]);
    for (std::size_t i = 0; i < 15; ++i) {
      out.cohort.rows.push_back(make_student(config, career, padded("C", i + 1, 4), Role::Student,
                                             derive_seed(config.seed, "synthetic.career", i)).row);
      out.cohort.rows.push_back(make_student(config, summer, padded("U", i + 1, 4), Role::Student,
                                             derive_seed(config.seed, "synthetic.summer", i)).row);
    }
    out.cohort.orphan_grade_rows = 0;
  }
  return out;
}

nlohmann::json to_json(const SyntheticConfig& c) {
  nlohmann::json j;
  j["seed"] = c.seed;
  j["n_students"] = c.n_students;
  j["n_sections"] = c.n_sections;
  j["cluster_weights"] = c.cluster_weights;
  j["cluster_centroids"] = c.cluster_centroids;
  j["feature_noise_sd"] = c.feature_noise_sd;
  j["label_noise_rate"] = c.label_noise_rate;
  j["grade_weights"] = c.grade_weights;
  j["grade_intercept"] = c.grade_intercept;
  j["grade_noise_sd"] = c.grade_noise_sd;
  j["at_risk_threshold"] = c.at_risk_threshold;
  j["include_excluded_rows"] = c.include_excluded_rows;
  return j;
}

SyntheticConfig synthetic_config_from_json(const nlohmann::json& j) {
  SyntheticConfig c;
  try {
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("n_students")) c.n_students = j.at("n_students").get<std::size_t>();
    if (j.contains("n_sections")) c.n_sections = j.at("n_sections").get<std::size_t>();
    if (j.contains("cluster_weights")) c.cluster_weights = j.at("cluster_weights").get<std::array<double, kNumPlantedClusters>>();
    if (j.contains("cluster_centroids")) {
      c.cluster_centroids = j.at("cluster_centroids").get<std::array<FeatureVector, kNumPlantedClusters>>();
    }
    if (j.contains("feature_noise_sd")) c.feature_noise_sd = j.at("feature_noise_sd").get<double>();
    if (j.contains("label_noise_rate")) c.label_noise_rate = j.at("label_noise_rate").get<double>();
    if (j.contains("grade_weights")) c.grade_weights = j.at("grade_weights").get<FeatureVector>();
    if (j.contains("grade_intercept")) c.grade_intercept = j.at("grade_intercept").get<double>();
    if (j.contains("grade_noise_sd")) c.grade_noise_sd = j.at("grade_noise_sd").get<double>();
    if (j.contains("at_risk_threshold")) c.at_risk_threshold = j.at("at_risk_threshold").get<double>();
    if (j.contains("include_excluded_rows")) c.include_excluded_rows = j.at("include_excluded_rows").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("synthetic config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json to_json(const SyntheticTruth& t) {
  nlohmann::json j;
  j["seed"] = t.seed;
  nlohmann::json weights = nlohmann::json::object();
  for (std::size_t f = 0; f < kNumFeatures; ++f) weights[std::string(kFeatureNames[f])] = t.grade_weights[f];
  j["feature_names"] = kFeatureNames;
  j["grade_weights"] = weights;
  j["grade_weight_vector"] = t.grade_weights;
  j["grade_intercept"] = t.grade_intercept;
  j["importance_order"] = t.importance_order;
  j["centroids"] = t.centroids;
  j["cluster_weights"] = t.cluster_weights;
  nlohmann::json students = nlohmann::json::array();
  for (const auto& s : t.students) {
    students.push_back({{"student_id", s.student_id}, {"section_id", s.section_id}, {"cluster", s.cluster}});
  }
  j["students"] = std::move(students);
  return j;
}

}  // namespace lmsrisk
