#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace lmsrisk::csv {

/// One parsed record plus the 1-based line it started on (the header is row 1).
struct Row {
  std::size_t number = 0;
  std::vector<std::string> fields;
};

struct Table {
  std::vector<std::string> header;
  std::vector<Row> rows;

  /// Column position by exact name, or -1.
  int column(std::string_view name) const;
};

/// RFC 4180 parsing: comma delimiter, double-quote quoting with "" escapes,
/// quoted fields may span lines, CRLF or LF record ends, optional UTF-8 BOM.
Table parse(std::string_view text);

Table read_file(const std::filesystem::path& path);

/// Quotes a field only when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);

std::string format_row(const std::vector<std::string>& fields);

void write_file(const std::filesystem::path& path, const std::vector<std::string>& header,
                const std::vector<std::vector<std::string>>& rows);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace lmsrisk::csv
