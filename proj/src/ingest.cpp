#include "lmsrisk/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <unordered_map>

#include "lmsrisk/csv.hpp"
#include "lmsrisk/error.hpp"

namespace lmsrisk {
namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

/// Lower-cased with whitespace, '_' and '-' removed.
std::string squash(std::string_view s) {
  std::string out;
  for (unsigned char c : s) {
    if (std::isspace(c) || c == '_' || c == '-') continue;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

std::optional<double> parse_real(std::string_view cell) {
  std::string t = trim(cell);
  if (t.empty()) return std::nullopt;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::optional<std::int64_t> parse_count(std::string_view cell) {
  auto v = parse_real(cell);
  if (!v || *v < 0.0 || std::floor(*v) != *v || *v > 9.0e15) return std::nullopt;
  return static_cast<std::int64_t>(*v);
}

std::optional<double> parse_minutes(std::string_view cell) {
  auto v = parse_real(cell);
  if (!v || *v < 0.0) return std::nullopt;
  return v;
}

std::optional<std::string> parse_text(std::string_view cell) {
  std::string t = trim(cell);
  if (t.empty()) return std::nullopt;
  return t;
}

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <typename T>
std::optional<double> as_real(const std::optional<T>& v) {
  if (!v) return std::nullopt;
  return static_cast<double>(*v);
}

[[noreturn]] void malformed(std::size_t row, const std::string& what) {
  throw Error(ErrorCode::MalformedRow, "row " + std::to_string(row) + ": " + what);
}

/// Resolves column positions; required names must be present.
struct ColumnMap {
  std::map<std::string, int, std::less<>> index;

  ColumnMap(const csv::Table& table, const std::vector<std::string>& known,
            const std::vector<std::string_view>& required) {
    for (const auto& name : known) index[name] = table.column(name);
    for (auto name : required) {
      if (table.column(name) < 0) {
        throw Error(ErrorCode::MissingColumn, "required column '" + std::string(name) + "' not in header");
      }
    }
  }

  std::string_view cell(const csv::Row& row, std::string_view name) const {
    auto it = index.find(name);
    if (it == index.end() || it->second < 0) return {};
    return row.fields[static_cast<std::size_t>(it->second)];
  }
};

}  // namespace

Term Term::parse(std::string_view text) {
  std::string key = squash(text);
  Term t;
  t.label = trim(text);
  if (key == "fall2019") t.kind = Kind::Fall2019;
  else if (key == "spring2020") t.kind = Kind::Spring2020;
  else if (key == "fall2020") t.kind = Kind::Fall2020;
  else if (key.starts_with("summer")) t.kind = Kind::Summer;
  else t.kind = Kind::Other;
  return t;
}

std::string Term::to_string() const {
  switch (kind) {
    case Kind::Fall2019: return "Fall2019";
    case Kind::Spring2020: return "Spring2020";
    case Kind::Fall2020: return "Fall2020";
    case Kind::Summer: return label.empty() ? "Summer" : label;
    case Kind::Other: return label;
  }
  return label;
}

std::optional<Role> parse_role(std::string_view text) {
  std::string key = squash(text);
  if (key == "student") return Role::Student;
  if (key == "ta" || key == "teachingassistant") return Role::TA;
  if (key == "instructor") return Role::Instructor;
  return std::nullopt;
}

std::string_view to_string(Role role) {
  switch (role) {
    case Role::Student: return "Student";
    case Role::TA: return "TA";
    case Role::Instructor: return "Instructor";
  }
  return "Student";
}

GradeItem GradeItem::parse(std::string_view text) {
  GradeItem g;
  g.label = trim(text);
  std::string key = lower(g.label);
  if (key == "final calculated grade") g.kind = Kind::FinalCalculated;
  else if (key == "final adjusted grade") g.kind = Kind::FinalAdjusted;
  return g;
}

std::string GradeItem::to_string() const {
  switch (kind) {
    case Kind::FinalCalculated: return "Final Calculated Grade";
    case Kind::FinalAdjusted: return "Final Adjusted Grade";
    case Kind::Other: return label;
  }
  return label;
}

const std::vector<UsageField>& numeric_usage_fields() {
  static const std::vector<UsageField> fields = {
      {"Content_Completed", "content_completed", [](const LearnerUsageRecord& r) { return as_real(r.content_completed); }},
      {"Content_Required", "content_required", [](const LearnerUsageRecord& r) { return as_real(r.content_required); }},
      {"Checklist_Completed", "checklist_completed", [](const LearnerUsageRecord& r) { return as_real(r.checklist_completed); }},
      {"Quiz_Completed", "quiz_completed", [](const LearnerUsageRecord& r) { return as_real(r.quiz_completed); }},
      {"Total_Quiz_Attempts", "total_quiz_attempts", [](const LearnerUsageRecord& r) { return as_real(r.total_quiz_attempts); }},
      {"Discussion_Post_Created", "discussion_post_created", [](const LearnerUsageRecord& r) { return as_real(r.discussion_post_created); }},
      {"Discussion_Post_Replies", "discussion_post_replies", [](const LearnerUsageRecord& r) { return as_real(r.discussion_post_replies); }},
      {"Discussion_Post_Read", "discussion_post_read", [](const LearnerUsageRecord& r) { return as_real(r.discussion_post_read); }},
      {"Number_Of_Assignment_Submissions", "number_of_assignment_submissions", [](const LearnerUsageRecord& r) { return as_real(r.number_of_assignment_submissions); }},
      {"Total_Time_Spent_In_Content", "total_time_spent_in_content", [](const LearnerUsageRecord& r) { return r.total_time_spent_in_content; }},
      {"Number_Of_Logins_To_The_System", "number_of_logins_to_the_system", [](const LearnerUsageRecord& r) { return as_real(r.number_of_logins_to_the_system); }},
  };
  return fields;
}

const std::vector<std::string>& lur_header() {
  static const std::vector<std::string> header = {
      std::string(columns::kStudentId), std::string(columns::kSectionId), std::string(columns::kTerm),
      std::string(columns::kSchool), std::string(columns::kRole),
      "Content_Completed", "Content_Required", "Checklist_Completed", "Quiz_Completed", "Total_Quiz_Attempts",
      "Discussion_Post_Created", "Discussion_Post_Replies", "Discussion_Post_Read", "Last_Discussion_Post_Date",
      "Number_Of_Assignment_Submissions", "Last_Assignment_Submission_Date", "Total_Time_Spent_In_Content",
      "Last_Visited_Date", "Last_System_Login", "Number_Of_Logins_To_The_System",
  };
  return header;
}

const std::vector<std::string>& gr_header() {
  static const std::vector<std::string> header = {
      std::string(columns::kStudentId), std::string(columns::kSectionId), std::string(columns::kGradeItem),
      std::string(columns::kGradeValue),
  };
  return header;
}

std::vector<LearnerUsageRecord> parse_lur_text(std::string_view text) {
  csv::Table table = csv::parse(text);
  ColumnMap cols(table, lur_header(),
                 {columns::kStudentId, columns::kSectionId, columns::kTerm, columns::kSchool, columns::kRole});

  std::vector<LearnerUsageRecord> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    if (row.fields.size() != table.header.size()) {
      malformed(row.number, "expected " + std::to_string(table.header.size()) + " fields, found " +
                                std::to_string(row.fields.size()));
    }
    LearnerUsageRecord r;
    r.student_id = trim(cols.cell(row, columns::kStudentId));
    r.section_id = trim(cols.cell(row, columns::kSectionId));
    if (r.student_id.empty()) malformed(row.number, "missing student id");
    if (r.section_id.empty()) malformed(row.number, "missing section id");
    r.term = Term::parse(cols.cell(row, columns::kTerm));
    r.school = trim(cols.cell(row, columns::kSchool));
    auto role = parse_role(cols.cell(row, columns::kRole));
    if (!role) malformed(row.number, "unknown role '" + trim(cols.cell(row, columns::kRole)) + "'");
    r.role = *role;

    r.content_completed = parse_count(cols.cell(row, "Content_Completed"));
    r.content_required = parse_count(cols.cell(row, "Content_Required"));
    r.checklist_completed = parse_count(cols.cell(row, "Checklist_Completed"));
    r.quiz_completed = parse_count(cols.cell(row, "Quiz_Completed"));
    r.total_quiz_attempts = parse_count(cols.cell(row, "Total_Quiz_Attempts"));
    r.discussion_post_created = parse_count(cols.cell(row, "Discussion_Post_Created"));
    r.discussion_post_replies = parse_count(cols.cell(row, "Discussion_Post_Replies"));
    r.discussion_post_read = parse_count(cols.cell(row, "Discussion_Post_Read"));
    r.last_discussion_post_date = parse_text(cols.cell(row, "Last_Discussion_Post_Date"));
    r.number_of_assignment_submissions = parse_count(cols.cell(row, "Number_Of_Assignment_Submissions"));
    r.last_assignment_submission_date = parse_text(cols.cell(row, "Last_Assignment_Submission_Date"));
    r.total_time_spent_in_content = parse_minutes(cols.cell(row, "Total_Time_Spent_In_Content"));
    r.last_visited_date = parse_text(cols.cell(row, "Last_Visited_Date"));
    r.last_system_login = parse_text(cols.cell(row, "Last_System_Login"));
    r.number_of_logins_to_the_system = parse_count(cols.cell(row, "Number_Of_Logins_To_The_System"));
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<LearnerUsageRecord> parse_lur(const std::filesystem::path& path) {
  return parse_lur_text(csv::read_text(path));
}

std::vector<GradeRecord> parse_gr_text(std::string_view text) {
  csv::Table table = csv::parse(text);
  ColumnMap cols(table, gr_header(),
                 {columns::kStudentId, columns::kSectionId, columns::kGradeItem, columns::kGradeValue});

  std::vector<GradeRecord> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    if (row.fields.size() != table.header.size()) {
      malformed(row.number, "expected " + std::to_string(table.header.size()) + " fields, found " +
                                std::to_string(row.fields.size()));
    }
    GradeRecord g;
    g.student_id = trim(cols.cell(row, columns::kStudentId));
    g.section_id = trim(cols.cell(row, columns::kSectionId));
    if (g.student_id.empty()) malformed(row.number, "missing student id");
    if (g.section_id.empty()) malformed(row.number, "missing section id");
    g.item = GradeItem::parse(cols.cell(row, columns::kGradeItem));
    g.grade_value = parse_real(cols.cell(row, columns::kGradeValue));
    if (g.grade_value && (*g.grade_value < 0.0 || *g.grade_value > 100.0)) {
      throw Error(ErrorCode::OutOfRangeGrade,
                  "row " + std::to_string(row.number) + ": grade " + format_real(*g.grade_value) + " outside [0, 100]");
    }
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<GradeRecord> parse_gr(const std::filesystem::path& path) {
  return parse_gr_text(csv::read_text(path));
}

std::string format_lur(const std::vector<LearnerUsageRecord>& records) {
  auto count = [](const std::optional<std::int64_t>& v) { return v ? std::to_string(*v) : std::string(); };
  auto text = [](const std::optional<std::string>& v) { return v ? *v : std::string(); };
  std::string out = csv::format_row(lur_header());
  for (const auto& r : records) {
    out += csv::format_row({
        r.student_id, r.section_id, r.term.to_string(), r.school, std::string(to_string(r.role)),
        count(r.content_completed), count(r.content_required), count(r.checklist_completed),
        count(r.quiz_completed), count(r.total_quiz_attempts), count(r.discussion_post_created),
        count(r.discussion_post_replies), count(r.discussion_post_read), text(r.last_discussion_post_date),
        count(r.number_of_assignment_submissions), text(r.last_assignment_submission_date),
        r.total_time_spent_in_content ? format_real(*r.total_time_spent_in_content) : std::string(),
        text(r.last_visited_date), text(r.last_system_login), count(r.number_of_logins_to_the_system),
    });
  }
  return out;
}

std::string format_gr(const std::vector<GradeRecord>& records) {
  std::string out = csv::format_row(gr_header());
  for (const auto& g : records) {
    out += csv::format_row({g.student_id, g.section_id, g.item.to_string(),
                            g.grade_value ? format_real(*g.grade_value) : std::string()});
  }
  return out;
}

namespace {
std::optional<double> first_grade(const std::vector<GradeRecord>& grades, GradeItem::Kind kind) {
  for (const auto& g : grades) {
    if (g.item.kind == kind && g.grade_value) return g.grade_value;
  }
  return std::nullopt;
}
}  // namespace

std::optional<double> CohortRow::final_calculated() const {
  return first_grade(grades, GradeItem::Kind::FinalCalculated);
}

std::optional<double> CohortRow::final_adjusted() const {
  return first_grade(grades, GradeItem::Kind::FinalAdjusted);
}

CohortTable join_reports(std::vector<LearnerUsageRecord> usage, const std::vector<GradeRecord>& grades) {
  CohortTable table;
  std::unordered_map<std::string, std::size_t> by_key;
  by_key.reserve(usage.size());
  auto key_of = [](const std::string& student, const std::string& section) {
    std::string key = student;
    key.push_back('\x1f');
    key += section;
    return key;
  };
  table.rows.reserve(usage.size());
  for (auto& u : usage) {
    auto [it, inserted] = by_key.emplace(key_of(u.student_id, u.section_id), table.rows.size());
    if (!inserted) {
      throw Error(ErrorCode::DuplicateUsageRow,
                  "student '" + u.student_id + "' appears twice in section '" + u.section_id + "'");
    }
    table.rows.push_back(CohortRow{std::move(u), {}});
  }
  for (const auto& g : grades) {
    auto it = by_key.find(key_of(g.student_id, g.section_id));
    if (it == by_key.end()) {
      ++table.orphan_grade_rows;
      continue;
    }
    table.rows[it->second].grades.push_back(g);
  }
  return table;
}

bool is_excluded_school(std::string_view school) {
  std::string key = lower(trim(school));
  return key == "career center" || key == "center for teaching of excellence";
}

CohortTable filter_courses(const CohortTable& cohort, FilterCounts* counts) {
  FilterCounts local;
  CohortTable out;
  out.provenance = cohort.provenance;
  out.orphan_grade_rows = cohort.orphan_grade_rows;
  for (const auto& row : cohort.rows) {
    if (is_excluded_school(row.usage.school)) {
      ++local.excluded_school;
    } else if (row.usage.term.kind == Term::Kind::Summer) {
      ++local.excluded_summer;
    } else if (row.usage.role != Role::Student) {
      ++local.excluded_role;
    } else {
      out.rows.push_back(row);
    }
  }
  if (counts) *counts = local;
  return out;
}

void write_cohort(const CohortTable& cohort, const std::filesystem::path& lur_path,
                  const std::filesystem::path& gr_path) {
  std::vector<LearnerUsageRecord> usage;
  std::vector<GradeRecord> grades;
  usage.reserve(cohort.rows.size());
  for (const auto& row : cohort.rows) {
    usage.push_back(row.usage);
    grades.insert(grades.end(), row.grades.begin(), row.grades.end());
  }
  csv::write_text(lur_path, format_lur(usage));
  csv::write_text(gr_path, format_gr(grades));
}

}  // namespace lmsrisk
