#include "quadrat/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "quadrat/errors.hpp"

namespace quadrat::csv {

namespace {

std::string where(const Table& table, const Row& row) {
  return table.source + ":" + std::to_string(row.line);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw InputError(source + ": missing column '" + std::string(name) + "'");
}

std::vector<std::string> split_record(std::string_view line, char delim) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  if (quoted) throw InputError("unterminated quoted field");
  out.push_back(std::move(field));
  return out;
}

Table parse(std::string_view text, std::string source, char delim) {
  Table table;
  table.source = std::move(source);
  std::size_t line_no = 0;
  bool have_header = false;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (trim(line).empty()) {
      if (end == text.size()) break;
      continue;
    }
    std::vector<std::string> fields;
    try {
      fields = split_record(line, delim);
    } catch (const InputError& e) {
      throw InputError(table.source + ":" + std::to_string(line_no) + ": " + e.what());
    }
    for (auto& f : fields) f = std::string(trim(f));
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
    } else {
      if (fields.size() != table.header.size()) {
        throw InputError(table.source + ":" + std::to_string(line_no) + ": expected " +
                         std::to_string(table.header.size()) + " fields, got " +
                         std::to_string(fields.size()));
      }
      table.rows.push_back(Row{line_no, std::move(fields)});
    }
    if (end == text.size()) break;
  }
  if (!have_header) throw InputError(table.source + ": empty file (no header)");
  return table;
}

Table read_file(const std::filesystem::path& path, char delim) {
  return parse(read_text(path), path.string(), delim);
}

std::string escape(std::string_view field, char delim) {
  if (field.find_first_of(std::string{delim, '"', '\n', '\r'}) == std::string_view::npos) {
    return std::string(field);
  }
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::int64_t to_int(std::string_view field, const Table& table, const Row& row) {
  std::int64_t value = 0;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || field.empty()) {
    throw InputError(where(table, row) + ": not an integer: '" + std::string(field) + "'");
  }
  return value;
}

double to_double(std::string_view field, const Table& table, const Row& row) {
  double value = 0;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  if (!field.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || field.empty()) {
    throw InputError(where(table, row) + ": not a number: '" + std::string(field) + "'");
  }
  return value;
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) throw InvariantError("format_double: conversion failed");
  return std::string(buf, ptr);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw InputError("write failed for " + path.string());
}

}  // namespace quadrat::csv
