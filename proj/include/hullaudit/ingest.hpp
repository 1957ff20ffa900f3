#pragma once

// Delimited-text ingestion: column schemas, typed tables, schema inference.
//
// Tables are stored column-major. Numeric columns hold parsed doubles,
// all other kinds keep the raw cell text. Missing cells are tracked with a
// per-column flag vector; the value slot of a missing cell is unspecified.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hullaudit/detail/util.hpp"
#include "hullaudit/errors.hpp"

namespace hullaudit {

enum class ColumnKind { numeric, categorical, ignored, target };

inline std::string to_string(ColumnKind k) {
  switch (k) {
    case ColumnKind::numeric: return "numeric";
    case ColumnKind::categorical: return "categorical";
    case ColumnKind::ignored: return "ignored";
    case ColumnKind::target: return "target";
  }
  return "numeric";
}

inline ColumnKind column_kind_from_string(const std::string& s) {
  if (s == "numeric") return ColumnKind::numeric;
  if (s == "categorical") return ColumnKind::categorical;
  if (s == "ignored") return ColumnKind::ignored;
  if (s == "target") return ColumnKind::target;
  throw SchemaMismatch("unknown column kind '" + s + "'");
}

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  // Categorical only. When non-empty it pins the category set and order;
  // otherwise categories are taken from the data in first-appearance order.
  std::vector<std::string> declared_categories;

  bool operator==(const ColumnSpec&) const = default;
};

struct Schema {
  std::vector<ColumnSpec> columns;
  std::vector<std::string> missing_markers = {"", "?", "NA"};

  const ColumnSpec* find(std::string_view name) const {
    for (const auto& c : columns)
      if (c.name == name) return &c;
    return nullptr;
  }

  bool is_missing_marker(std::string_view cell) const {
    return std::find(missing_markers.begin(), missing_markers.end(), cell) !=
           missing_markers.end();
  }

  // Column names must be unique and at most one column may be the target.
  void validate() const {
    std::size_t targets = 0;
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i].name.empty())
        throw SchemaMismatch("column " + std::to_string(i + 1) + " has an empty name");
      for (std::size_t j = i + 1; j < columns.size(); ++j)
        if (columns[i].name == columns[j].name)
          throw SchemaMismatch("duplicate column name '" + columns[i].name + "'");
      if (columns[i].kind == ColumnKind::target) ++targets;
    }
    if (targets > 1) throw SchemaMismatch("schema declares more than one target column");
  }
};

struct RawTable {
  struct Column {
    std::vector<double> numeric;       // numeric kind only
    std::vector<std::string> labels;   // all other kinds
    std::vector<std::uint8_t> missing; // one flag per row
  };

  std::vector<ColumnSpec> columns;
  std::vector<Column> data;
  std::size_t row_count = 0;

  // Parse metadata; not part of the table content.
  std::size_t dropped_row_count = 0;
  std::vector<std::string> warnings;

  bool is_missing(std::size_t row, std::size_t col) const {
    return data[col].missing[row] != 0;
  }
  double numeric_at(std::size_t row, std::size_t col) const {
    return data[col].numeric[row];
  }
  const std::string& label_at(std::size_t row, std::size_t col) const {
    return data[col].labels[row];
  }

  std::optional<std::size_t> column_index(std::string_view name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i].name == name) return i;
    return std::nullopt;
  }
};

// Content equality. Parse metadata (warnings, dropped-row count) is excluded;
// value slots of missing cells are not compared.
inline bool operator==(const RawTable& a, const RawTable& b) {
  if (a.columns != b.columns || a.row_count != b.row_count) return false;
  for (std::size_t c = 0; c < a.columns.size(); ++c) {
    const auto& ca = a.data[c];
    const auto& cb = b.data[c];
    if (ca.missing != cb.missing) return false;
    const bool numeric = a.columns[c].kind == ColumnKind::numeric;
    for (std::size_t r = 0; r < a.row_count; ++r) {
      if (ca.missing[r]) continue;
      if (numeric) {
        if (ca.numeric[r] != cb.numeric[r]) return false;
      } else {
        if (ca.labels[r] != cb.labels[r]) return false;
      }
    }
  }
  return true;
}

struct LoadOptions {
  char delimiter = ',';
  enum class Header { autodetect, required, none };
  Header header = Header::autodetect;
  // Drop rows that have a missing value in any non-ignored column. The hull
  // is defined over complete vectors only; imputation is out of scope.
  bool drop_incomplete = true;
  // Lines starting with this prefix are skipped entirely ("" disables).
  std::string comment_prefix;
};

struct SchemaInference {
  Schema schema;
  std::vector<std::string> warnings;
};

namespace detail {

struct Cell {
  std::string text;
  bool quoted = false;
};

inline void trim(std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t')) --e;
  s = s.substr(b, e - b);
}

// Split one line into cells. Double-quoted cells may contain the delimiter
// and embedded quotes written as "". Quoted cells are never treated as
// missing markers, which lets a writer round-trip labels that would
// otherwise read back as missing.
inline std::vector<Cell> split_line(const std::string& line, char delim,
                                    std::size_t line_no) {
  std::vector<Cell> cells;
  std::size_t i = 0;
  const std::size_t n = line.size();
  while (true) {
    Cell cell;
    while (i < n && line[i] == ' ') ++i;
    if (i < n && line[i] == '"') {
      cell.quoted = true;
      ++i;
      while (true) {
        if (i >= n)
          throw ParseError("unterminated quoted cell", line_no, cells.size() + 1);
        if (line[i] == '"') {
          if (i + 1 < n && line[i + 1] == '"') {
            cell.text += '"';
            i += 2;
          } else {
            ++i;
            break;
          }
        } else {
          cell.text += line[i++];
        }
      }
      while (i < n && line[i] == ' ') ++i;
      if (i < n && line[i] != delim)
        throw ParseError("unexpected text after closing quote", line_no,
                         cells.size() + 1);
    } else {
      while (i < n && line[i] != delim) cell.text += line[i++];
      trim(cell.text);
    }
    cells.push_back(std::move(cell));
    if (i >= n) break;
    ++i;  // skip delimiter
    if (i == n) {  // trailing delimiter yields a final empty cell
      cells.push_back(Cell{});
      break;
    }
  }
  return cells;
}

inline std::optional<double> parse_number(const std::string& text) {
  if (text.empty()) return std::nullopt;
  const char* begin = text.data();
  const char* end = begin + text.size();
  if (*begin == '+') ++begin;  // from_chars rejects an explicit plus
  double value = 0.0;
  auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc{} || res.ptr != end) return std::nullopt;
  if (!std::isfinite(value)) return std::nullopt;
  return value;
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

inline bool is_comment(const std::string& line, const std::string& prefix) {
  return !prefix.empty() && line.rfind(prefix, 0) == 0;
}

}  // namespace detail

// Parse delimiter-separated text against a schema. The first retained line is
// consumed as a header when it matches the schema names exactly (or when the
// header option requires one). Cells are typed per column kind; missing
// markers are preserved as missing; incomplete rows are dropped when
// opts.drop_incomplete is set, with a counted warning.
inline RawTable parse_table(const std::vector<std::string>& lines, const Schema& schema,
                            const LoadOptions& opts = {}) {
  schema.validate();
  if (schema.columns.empty()) throw SchemaMismatch("schema has no columns");
  const std::size_t ncols = schema.columns.size();

  RawTable table;
  table.columns = schema.columns;
  table.data.resize(ncols);
  for (std::size_t c = 0; c < ncols; ++c) {
    if (schema.columns[c].kind == ColumnKind::numeric)
      table.data[c].numeric.reserve(lines.size());
    else
      table.data[c].labels.reserve(lines.size());
    table.data[c].missing.reserve(lines.size());
  }

  bool saw_header = false;
  bool first_content_line = true;
  std::size_t incomplete = 0;

  for (std::size_t li = 0; li < lines.size(); ++li) {
    const std::string& line = lines[li];
    const std::size_t line_no = li + 1;
    if (line.empty() || detail::is_comment(line, opts.comment_prefix)) continue;

    auto cells = detail::split_line(line, opts.delimiter, line_no);

    if (first_content_line) {
      first_content_line = false;
      bool matches_names = cells.size() == ncols;
      if (matches_names)
        for (std::size_t c = 0; c < ncols; ++c)
          if (cells[c].text != schema.columns[c].name) {
            matches_names = false;
            break;
          }
      if (opts.header == LoadOptions::Header::required && !matches_names)
        throw SchemaMismatch("header row does not match schema on line " +
                             std::to_string(line_no));
      if (opts.header != LoadOptions::Header::none && matches_names) {
        saw_header = true;
        continue;
      }
      // No name match: the line must be data. If it cannot be a data row
      // because text appears in a numeric column, report the disagreement
      // as a schema problem rather than a cell-level parse failure.
      if (opts.header == LoadOptions::Header::autodetect && cells.size() == ncols) {
        for (std::size_t c = 0; c < ncols; ++c) {
          if (schema.columns[c].kind != ColumnKind::numeric) continue;
          const auto& cell = cells[c];
          const bool missing = !cell.quoted && schema.is_missing_marker(cell.text);
          if (!missing && !detail::parse_number(cell.text))
            throw SchemaMismatch("first line is neither the schema header nor a "
                                 "data row (column '" +
                                 schema.columns[c].name + "', line " +
                                 std::to_string(line_no) + ")");
        }
      }
    }

    if (cells.size() != ncols)
      throw ParseError("expected " + std::to_string(ncols) + " cells, found " +
                           std::to_string(cells.size()),
                       line_no, cells.size());

    // Type the row into a staging slot, then commit or drop.
    bool row_missing_required = false;
    std::vector<double> nums(ncols, 0.0);
    std::vector<std::string> labs(ncols);
    std::vector<std::uint8_t> miss(ncols, 0);
    for (std::size_t c = 0; c < ncols; ++c) {
      auto& cell = cells[c];
      const ColumnSpec& spec = schema.columns[c];
      const bool missing = !cell.quoted && schema.is_missing_marker(cell.text);
      if (missing) {
        miss[c] = 1;
        if (spec.kind != ColumnKind::ignored) row_missing_required = true;
        if (spec.kind == ColumnKind::numeric)
          nums[c] = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      if (spec.kind == ColumnKind::numeric) {
        auto v = detail::parse_number(cell.text);
        if (!v)
          throw ParseError("cell '" + cell.text + "' in numeric column '" +
                               spec.name + "' is not a finite number",
                           line_no, c + 1);
        nums[c] = *v;
      } else {
        labs[c] = std::move(cell.text);
      }
    }

    if (opts.drop_incomplete && row_missing_required) {
      ++incomplete;
      continue;
    }

    for (std::size_t c = 0; c < ncols; ++c) {
      if (schema.columns[c].kind == ColumnKind::numeric)
        table.data[c].numeric.push_back(nums[c]);
      else
        table.data[c].labels.push_back(std::move(labs[c]));
      table.data[c].missing.push_back(miss[c]);
    }
    ++table.row_count;
  }

  table.dropped_row_count = incomplete;
  if (incomplete > 0)
    table.warnings.push_back("dropped " + std::to_string(incomplete) +
                             " row(s) with missing values in non-ignored columns");
  if (table.row_count == 0) {
    if (incomplete > 0)
      throw EmptyTable("all " + std::to_string(incomplete) +
                       " data rows were incomplete");
    throw EmptyTable(saw_header ? "file has a header but no data rows"
                                : "file has no data rows");
  }
  return table;
}

inline RawTable load_table(const std::string& path, const Schema& schema,
                           const LoadOptions& opts = {}) {
  return parse_table(detail::read_lines(path), schema, opts);
}

inline RawTable load_table_text(std::string_view text, const Schema& schema,
                                const LoadOptions& opts = {}) {
  std::vector<std::string> lines;
  std::string line;
  std::istringstream in{std::string(text)};
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return parse_table(lines, schema, opts);
}

// Classify each column of a headered file: numeric when every non-missing
// cell parses as a finite number, categorical otherwise. The target kind is
// never assigned here. Columns with no non-missing cells come back
// categorical with no categories and a warning.
inline SchemaInference infer_schema(const std::string& path, const LoadOptions& opts = {}) {
  auto lines = detail::read_lines(path);

  SchemaInference out;
  Schema probe;  // only missing markers matter before columns are known

  std::size_t header_line = 0;
  std::vector<detail::Cell> header;
  for (std::size_t li = 0; li < lines.size(); ++li) {
    if (lines[li].empty() || detail::is_comment(lines[li], opts.comment_prefix)) continue;
    header = detail::split_line(lines[li], opts.delimiter, li + 1);
    header_line = li + 1;
    break;
  }
  if (header.empty()) throw EmptyTable("file has no content lines");

  const std::size_t ncols = header.size();
  std::vector<std::uint8_t> numeric_ok(ncols, 1);
  std::vector<std::uint8_t> any_value(ncols, 0);
  std::size_t data_rows = 0;

  for (std::size_t li = header_line; li < lines.size(); ++li) {
    const std::string& line = lines[li];
    if (line.empty() || detail::is_comment(line, opts.comment_prefix)) continue;
    auto cells = detail::split_line(line, opts.delimiter, li + 1);
    if (cells.size() != ncols)
      throw ParseError("expected " + std::to_string(ncols) + " cells, found " +
                           std::to_string(cells.size()),
                       li + 1, cells.size());
    ++data_rows;
    for (std::size_t c = 0; c < ncols; ++c) {
      const auto& cell = cells[c];
      if (!cell.quoted && probe.is_missing_marker(cell.text)) continue;
      any_value[c] = 1;
      if (!detail::parse_number(cell.text)) numeric_ok[c] = 0;
    }
  }
  if (data_rows == 0) throw EmptyTable("file has a header but no data rows");

  for (std::size_t c = 0; c < ncols; ++c) {
    ColumnSpec spec;
    spec.name = header[c].text;
    if (!any_value[c]) {
      spec.kind = ColumnKind::categorical;
      out.warnings.push_back("column '" + spec.name + "' has no non-missing values");
    } else {
      spec.kind = numeric_ok[c] ? ColumnKind::numeric : ColumnKind::categorical;
    }
    out.schema.columns.push_back(std::move(spec));
  }
  out.schema.missing_markers = probe.missing_markers;
  out.schema.validate();
  return out;
}

// Schema files: JSON with columns[].{name,kind,categories} and missing_markers.
inline Schema schema_from_json(const nlohmann::json& j) {
  Schema schema;
  if (!j.contains("columns") || !j["columns"].is_array())
    throw SchemaMismatch("schema file lacks a 'columns' array");
  for (const auto& jc : j["columns"]) {
    ColumnSpec spec;
    spec.name = jc.at("name").get<std::string>();
    spec.kind = column_kind_from_string(jc.value("kind", std::string("numeric")));
    if (jc.contains("categories"))
      spec.declared_categories = jc["categories"].get<std::vector<std::string>>();
    schema.columns.push_back(std::move(spec));
  }
  if (j.contains("missing_markers"))
    schema.missing_markers = j["missing_markers"].get<std::vector<std::string>>();
  schema.validate();
  return schema;
}

inline Schema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaMismatch("schema file '" + path + "' is not valid JSON: " + e.what());
  }
  return schema_from_json(j);
}

inline void save_schema(const Schema& schema, const std::string& path) {
  nlohmann::ordered_json j;
  j["columns"] = nlohmann::ordered_json::array();
  for (const auto& c : schema.columns) {
    nlohmann::ordered_json jc;
    jc["name"] = c.name;
    jc["kind"] = to_string(c.kind);
    if (!c.declared_categories.empty()) jc["categories"] = c.declared_categories;
    j["columns"].push_back(std::move(jc));
  }
  j["missing_markers"] = schema.missing_markers;
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

namespace detail {

inline bool needs_quoting(const std::string& text, char delim, const Schema& schema) {
  if (schema.is_missing_marker(text)) return true;  // keep the label a label
  if (text.find(delim) != std::string::npos) return true;
  if (text.find('"') != std::string::npos) return true;
  if (!text.empty() && (text.front() == ' ' || text.back() == ' ')) return true;
  return false;
}

inline std::string quote_cell(const std::string& text) {
  std::string out = "\"";
  for (char ch : text) {
    if (ch == '"')
      out += "\"\"";
    else
      out += ch;
  }
  out += '"';
  return out;
}

}  // namespace detail

// Write a table with a header row. Numbers use the shortest form that parses
// back to the identical double, so save/load round-trips exactly.
inline void save_table(const RawTable& table, const std::string& path,
                       char delimiter = ',') {
  Schema schema;
  schema.columns = table.columns;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (c) out << delimiter;
    out << table.columns[c].name;
  }
  out << '\n';
  // A blank line is skipped on read, so a one-column table with a missing
  // cell must not serialize that cell as the empty marker.
  std::string missing_marker;
  for (const auto& m : schema.missing_markers)
    if (!m.empty()) {
      missing_marker = m;
      break;
    }
  for (std::size_t r = 0; r < table.row_count; ++r) {
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      if (c) out << delimiter;
      if (table.is_missing(r, c)) {
        out << missing_marker;
      } else if (table.columns[c].kind == ColumnKind::numeric) {
        out << detail::format_double(table.numeric_at(r, c));
      } else {
        const std::string& label = table.label_at(r, c);
        out << (detail::needs_quoting(label, delimiter, schema)
                    ? detail::quote_cell(label)
                    : label);
      }
    }
    out << '\n';
  }
}

// New table holding the given rows, in the given order.
inline RawTable select_rows(const RawTable& table, const std::vector<std::size_t>& rows) {
  RawTable out;
  out.columns = table.columns;
  out.data.resize(table.data.size());
  out.row_count = rows.size();
  for (std::size_t c = 0; c < table.data.size(); ++c) {
    const auto& src = table.data[c];
    auto& dst = out.data[c];
    dst.missing.reserve(rows.size());
    const bool numeric = table.columns[c].kind == ColumnKind::numeric;
    if (numeric)
      dst.numeric.reserve(rows.size());
    else
      dst.labels.reserve(rows.size());
    for (std::size_t r : rows) {
      dst.missing.push_back(src.missing[r]);
      if (numeric)
        dst.numeric.push_back(src.numeric[r]);
      else
        dst.labels.push_back(src.labels[r]);
    }
  }
  return out;
}

// Content fingerprint covering schema and cells.
inline std::uint64_t fingerprint(const RawTable& table) {
  detail::Fnv1a h;
  for (const auto& c : table.columns) {
    h.str(c.name);
    h.str(to_string(c.kind));
    for (const auto& cat : c.declared_categories) h.str(cat);
  }
  h.u64(table.row_count);
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    const bool numeric = table.columns[c].kind == ColumnKind::numeric;
    for (std::size_t r = 0; r < table.row_count; ++r) {
      if (table.is_missing(r, c)) {
        h.sep();
        continue;
      }
      if (numeric)
        h.f64(table.numeric_at(r, c));
      else
        h.str(table.label_at(r, c));
    }
  }
  return h.state;
}

}  // namespace hullaudit
