#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lmsrisk {

struct Term {
  enum class Kind { Fall2019, Spring2020, Fall2020, Summer, Other };
  Kind kind = Kind::Other;
  std::string label;  // original text, kept for Other

  /// "Fall 2019", "fall2019", "FALL_2019" -> Fall2019; anything starting with
  /// "summer" -> Summer; otherwise Other(text).
  static Term parse(std::string_view text);
  std::string to_string() const;

  bool operator==(const Term& other) const {
    return kind == other.kind && (kind != Kind::Other || label == other.label);
  }
};

enum class Role { Student, TA, Instructor };

std::optional<Role> parse_role(std::string_view text);
std::string_view to_string(Role role);

struct LearnerUsageRecord {
  std::string student_id;
  std::string section_id;
  Term term;
  std::string school;
  Role role = Role::Student;
  std::optional<std::int64_t> content_completed;
  std::optional<std::int64_t> content_required;
  std::optional<std::int64_t> checklist_completed;
  std::optional<std::int64_t> quiz_completed;
  std::optional<std::int64_t> total_quiz_attempts;
  std::optional<std::int64_t> discussion_post_created;
  std::optional<std::int64_t> discussion_post_replies;
  std::optional<std::int64_t> discussion_post_read;
  std::optional<std::string> last_discussion_post_date;
  std::optional<std::int64_t> number_of_assignment_submissions;
  std::optional<std::string> last_assignment_submission_date;
  std::optional<double> total_time_spent_in_content;  // minutes
  std::optional<std::string> last_visited_date;
  std::optional<std::string> last_system_login;
  std::optional<std::int64_t> number_of_logins_to_the_system;

  bool operator==(const LearnerUsageRecord&) const = default;
};

struct GradeItem {
  enum class Kind { FinalCalculated, FinalAdjusted, Other };
  Kind kind = Kind::Other;
  std::string label;

  static GradeItem parse(std::string_view text);
  std::string to_string() const;

  bool operator==(const GradeItem& other) const {
    return kind == other.kind && (kind != Kind::Other || label == other.label);
  }
};

struct GradeRecord {
  std::string student_id;
  std::string section_id;
  GradeItem item;
  std::optional<double> grade_value;  // percentage in [0, 100]

  bool operator==(const GradeRecord&) const = default;
};

/// Column names of the two export files.
namespace columns {
inline constexpr std::string_view kStudentId = "Org_Defined_Id";
inline constexpr std::string_view kSectionId = "Section_Id";
inline constexpr std::string_view kTerm = "Semester";
inline constexpr std::string_view kSchool = "School";
inline constexpr std::string_view kRole = "Role_Name";
inline constexpr std::string_view kGradeItem = "Grade_Item_Name";
inline constexpr std::string_view kGradeValue = "Grade_Value";
}  // namespace columns

/// Numeric usage fields that can be modeling features, in export order.
/// Each entry names the export column and reads the value as a double.
struct UsageField {
  std::string_view column;
  std::string_view feature_name;
  std::optional<double> (*get)(const LearnerUsageRecord&);
};
const std::vector<UsageField>& numeric_usage_fields();

const std::vector<std::string>& lur_header();
const std::vector<std::string>& gr_header();

std::vector<LearnerUsageRecord> parse_lur(const std::filesystem::path& path);
std::vector<LearnerUsageRecord> parse_lur_text(std::string_view text);
std::vector<GradeRecord> parse_gr(const std::filesystem::path& path);
std::vector<GradeRecord> parse_gr_text(std::string_view text);

std::string format_lur(const std::vector<LearnerUsageRecord>& records);
std::string format_gr(const std::vector<GradeRecord>& records);

struct Provenance {
  bool synthetic = false;
  std::uint64_t seed = 0;
};

/// A usage row with the grade rows sharing its (student, section) key.
struct CohortRow {
  LearnerUsageRecord usage;
  std::vector<GradeRecord> grades;

  std::optional<double> final_calculated() const;
  std::optional<double> final_adjusted() const;

  bool operator==(const CohortRow&) const = default;
};

struct CohortTable {
  std::vector<CohortRow> rows;
  Provenance provenance;
  std::size_t orphan_grade_rows = 0;
};

CohortTable join_reports(std::vector<LearnerUsageRecord> usage, const std::vector<GradeRecord>& grades);

struct FilterCounts {
  std::size_t excluded_school = 0;
  std::size_t excluded_summer = 0;
  std::size_t excluded_role = 0;
};

bool is_excluded_school(std::string_view school);

/// Drops Career Center / Center for Teaching of Excellence sections, Summer
/// sections and every non-student row.
CohortTable filter_courses(const CohortTable& cohort, FilterCounts* counts = nullptr);

/// Writes the cohort back out as a usage export and a grades export.
void write_cohort(const CohortTable& cohort, const std::filesystem::path& lur_path,
                  const std::filesystem::path& gr_path);

}  // namespace lmsrisk
