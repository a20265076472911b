#include <gtest/gtest.h>

#include <set>

#include "lmsrisk/error.hpp"
#include "lmsrisk/features.hpp"
#include "lmsrisk/ingest.hpp"
#include "lmsrisk/random.hpp"
#include "lmsrisk/synthetic.hpp"

namespace lmsrisk {
namespace {

std::string lur_line(const std::string& id, const std::string& section, const std::string& term,
                     const std::string& school, const std::string& role, const std::string& logins) {
  return id + "," + section + "," + term + "," + school + "," + role + ",3,10,,,,,,,,5,,12.5,,," + logins + "\n";
}

std::string header_line(const std::vector<std::string>& header) {
  std::string s;
  for (std::size_t i = 0; i < header.size(); ++i) s += (i ? "," : "") + header[i];
  return s + "\n";
}

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::Io;
}

TEST(Seeds, DerivationIsStableAndSeparatesStreams) {
  EXPECT_EQ(derive_seed(7, "split"), derive_seed(7, "split"));
  EXPECT_NE(derive_seed(7, "split"), derive_seed(8, "split"));
  EXPECT_NE(derive_seed(7, "split"), derive_seed(7, "oversample"));
  EXPECT_NE(derive_seed(7, "grid.fit", 0), derive_seed(7, "grid.fit", 1));
  // FNV-1a reference values.
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Seeds, SampleWithoutReplacementIsDistinct) {
  Rng rng(11);
  auto s = rng.sample_without_replacement(50, 50);
  EXPECT_EQ(std::set<std::size_t>(s.begin(), s.end()).size(), 50u);
  Rng a(3), b(3);
  EXPECT_EQ(a.sample_without_replacement(1000, 10), b.sample_without_replacement(1000, 10));
}

TEST(ParseLur, ReadsOneRow) {
  auto rows = parse_lur_text(header_line(lur_header()) + lur_line("S1", "A", "Fall2019", "School of Business", "Student", "42"));
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].number_of_logins_to_the_system, 42);
  EXPECT_EQ(rows[0].content_completed, 3);
  EXPECT_FALSE(rows[0].checklist_completed.has_value());
  EXPECT_DOUBLE_EQ(*rows[0].total_time_spent_in_content, 12.5);
  EXPECT_EQ(rows[0].term.kind, Term::Kind::Fall2019);
}

TEST(ParseLur, HeaderOnlyIsEmpty) {
  EXPECT_TRUE(parse_lur_text(header_line(lur_header())).empty());
}

TEST(ParseLur, MissingStudentIdNamesRow) {
  try {
    parse_lur_text(header_line(lur_header()) + lur_line("", "A", "Fall2019", "School of Business", "Student", "1"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedRow);
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
  }
}

TEST(ParseLur, MissingColumn) {
  EXPECT_EQ(code_of([] { parse_lur_text("Org_Defined_Id,Section_Id\nS1,A\n"); }), ErrorCode::MissingColumn);
}

TEST(ParseGr, ItemMapping) {
  auto g = parse_gr_text(header_line(gr_header()) + "S1,A,Final Calculated Grade,85\nS1,A,Quiz 3,70\nS1,A,Final Adjusted Grade,\n");
  ASSERT_EQ(g.size(), 3u);
  EXPECT_EQ(g[0].item.kind, GradeItem::Kind::FinalCalculated);
  EXPECT_DOUBLE_EQ(*g[0].grade_value, 85.0);
  EXPECT_EQ(g[1].item.kind, GradeItem::Kind::Other);
  EXPECT_EQ(g[1].item.label, "Quiz 3");
  EXPECT_EQ(g[2].item.kind, GradeItem::Kind::FinalAdjusted);
  EXPECT_FALSE(g[2].grade_value.has_value());
}

TEST(ParseGr, OutOfRange) {
  EXPECT_EQ(code_of([] { parse_gr_text(header_line(gr_header()) + "S1,A,Final Calculated Grade,120\n"); }),
            ErrorCode::OutOfRangeGrade);
}

TEST(Terms, ParseVariants) {
  EXPECT_EQ(Term::parse("Fall 2019").kind, Term::Kind::Fall2019);
  EXPECT_EQ(Term::parse("FALL_2020").kind, Term::Kind::Fall2020);
  EXPECT_EQ(Term::parse("spring2020").kind, Term::Kind::Spring2020);
  EXPECT_EQ(Term::parse("Summer 2020").kind, Term::Kind::Summer);
  EXPECT_EQ(Term::parse("Winter").kind, Term::Kind::Other);
}

LearnerUsageRecord usage(const std::string& id, const std::string& section, const std::string& school = "School of Business",
                         Term::Kind term = Term::Kind::Fall2019, Role role = Role::Student) {
  LearnerUsageRecord r;
  r.student_id = id;
  r.section_id = section;
  r.school = school;
  r.term.kind = term;
  r.role = role;
  r.content_completed = 1;
  r.number_of_assignment_submissions = 2;
  r.total_time_spent_in_content = 3.0;
  r.number_of_logins_to_the_system = 4;
  return r;
}

GradeRecord grade(const std::string& id, const std::string& section, GradeItem::Kind kind, std::optional<double> v) {
  GradeRecord g;
  g.student_id = id;
  g.section_id = section;
  g.item.kind = kind;
  g.grade_value = v;
  return g;
}

TEST(Join, AttachesGrades) {
  auto t = join_reports({usage("S1", "A")}, {grade("S1", "A", GradeItem::Kind::FinalCalculated, 85.0)});
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0].final_calculated(), 85.0);
  EXPECT_EQ(t.orphan_grade_rows, 0u);
}

TEST(Join, MissingGradeStaysMissing) {
  auto t = join_reports({usage("S1", "A")}, {});
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_FALSE(t.rows[0].final_calculated().has_value());
}

TEST(Join, OrphansAreCounted) {
  auto t = join_reports({usage("S1", "A")}, {grade("S9", "A", GradeItem::Kind::FinalCalculated, 50.0)});
  EXPECT_EQ(t.orphan_grade_rows, 1u);
}

TEST(Join, DuplicateUsageKey) {
  EXPECT_EQ(code_of([] { join_reports({usage("S1", "A"), usage("S1", "A")}, {}); }), ErrorCode::DuplicateUsageRow);
}

TEST(Filter, ExcludesAndRetains) {
  CohortTable t = join_reports({usage("S1", "A", "Career Center"), usage("S2", "B", "School of Business", Term::Kind::Summer),
                                usage("S3", "C"), usage("I1", "C", "School of Business", Term::Kind::Fall2019, Role::Instructor),
                                usage("S4", "D", "  center for teaching of EXCELLENCE ")},
                               {});
  FilterCounts counts;
  CohortTable f = filter_courses(t, &counts);
  ASSERT_EQ(f.rows.size(), 1u);
  EXPECT_EQ(f.rows[0].usage.student_id, "S3");
  EXPECT_EQ(counts.excluded_school, 2u);
  EXPECT_EQ(counts.excluded_summer, 1u);
  EXPECT_EQ(counts.excluded_role, 1u);
}

TEST(Filter, IdempotentAndCleanOnSynthetic) {
  SyntheticConfig c;
  c.n_students = 300;
  c.seed = 5;
  CohortTable once = filter_courses(generate_synthetic(c).cohort);
  CohortTable twice = filter_courses(once);
  EXPECT_EQ(once.rows, twice.rows);
  for (const auto& row : once.rows) {
    EXPECT_EQ(row.usage.role, Role::Student);
    EXPECT_NE(row.usage.term.kind, Term::Kind::Summer);
    EXPECT_FALSE(is_excluded_school(row.usage.school));
  }
}

TEST(RoundTrip, FormatThenParseIsIdentity) {
  SyntheticConfig c;
  c.n_students = 200;
  c.seed = 9;
  const CohortTable t = generate_synthetic(c).cohort;
  std::vector<LearnerUsageRecord> usage_rows;
  std::vector<GradeRecord> grade_rows;
  for (const auto& row : t.rows) {
    usage_rows.push_back(row.usage);
    grade_rows.insert(grade_rows.end(), row.grades.begin(), row.grades.end());
  }
  const CohortTable back = join_reports(parse_lur_text(format_lur(usage_rows)), parse_gr_text(format_gr(grade_rows)));
  EXPECT_EQ(back.rows, t.rows);
}

TEST(Synthetic, SeedReproducibility) {
  SyntheticConfig c;
  c.n_students = 400;
  c.seed = 7;
  auto a = generate_synthetic(c), b = generate_synthetic(c);
  EXPECT_EQ(a.cohort.rows, b.cohort.rows);
  c.seed = 8;
  auto d = generate_synthetic(c);
  EXPECT_NE(a.cohort.rows, d.cohort.rows);
}

TEST(Synthetic, SingleComponentWeights) {
  SyntheticConfig c;
  c.n_students = 200;
  c.cluster_weights = {1.0, 0.0, 0.0, 0.0};
  for (const auto& s : generate_synthetic(c).truth.students) EXPECT_EQ(s.cluster, 1);
}

TEST(Synthetic, PrevalenceNearTarget) {
  SyntheticConfig c;  // seed 0, n = 5000
  const CohortTable cohort = filter_courses(generate_synthetic(c).cohort);
  auto [complete, dropped] = retain_complete_rows(cohort, select_features(cohort));
  const LabelResult labels = label(complete, normalize_per_section(complete));
  std::size_t pos = 0;
  for (const auto& i : labels.instances) pos += i.at_risk;
  const double prevalence = 100.0 * static_cast<double>(pos) / static_cast<double>(labels.instances.size());
  EXPECT_NEAR(prevalence, 18.5, 5.0);
}

TEST(Synthetic, InvalidConfig) {
  SyntheticConfig c;
  c.n_students = 0;
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::InvalidConfig);
}

}  // namespace
}  // namespace lmsrisk
