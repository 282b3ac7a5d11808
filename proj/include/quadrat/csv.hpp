#pragma once

// Small delimited-text helpers shared by the file formats.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace quadrat::csv {

struct Row {
  std::size_t line = 0;  // 1-based line number in the source file
  std::vector<std::string> fields;
};

struct Table {
  std::string source;  // file name used in diagnostics
  std::vector<std::string> header;
  std::vector<Row> rows;

  /// Column index of `name`; throws InputError when absent.
  std::size_t column(std::string_view name) const;
};

/// Splits one record. Double-quoted fields may contain the delimiter; `""` is an escaped quote.
std::vector<std::string> split_record(std::string_view line, char delim = ',');

/// Parses text with a header line. Blank lines are skipped; ragged rows are rejected.
Table parse(std::string_view text, std::string source, char delim = ',');
Table read_file(const std::filesystem::path& path, char delim = ',');

/// Quotes a field if it contains the delimiter, a quote, or a newline.
std::string escape(std::string_view field, char delim = ',');

std::int64_t to_int(std::string_view field, const Table& table, const Row& row);
double to_double(std::string_view field, const Table& table, const Row& row);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

std::string read_text(const std::filesystem::path& path);
/// Writes bytes verbatim (no newline translation); parent directories are created.
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace quadrat::csv
