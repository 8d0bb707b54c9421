#include "yieldcast/csv.hpp"

#include "yieldcast/util.hpp"

namespace yieldcast {

std::size_t CsvTable::column(const std::string& name,
                             const std::string& path) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw Error("missing column '" + name + "' in " + path);
}

namespace {

std::vector<std::string> parse_line(const std::string& text, std::size_t& pos,
                                    const std::string& path,
                                    std::size_t line_no) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (; pos < text.size(); ++pos) {
    const char c = text[pos];
    if (quoted) {
      if (c == '"') {
        if (pos + 1 < text.size() && text[pos + 1] == '"') {
          field.push_back('"');
          ++pos;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && field.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && pos + 1 < text.size() && text[pos + 1] == '\n') ++pos;
      ++pos;
      fields.push_back(std::move(field));
      return fields;
    } else {
      field.push_back(c);
    }
  }
  if (quoted) {
    throw Error("unterminated quote at line " + std::to_string(line_no) +
                " of " + path);
  }
  fields.push_back(std::move(field));
  return fields;
}

}  // namespace

CsvTable parse_csv(const std::string& text, const std::string& path) {
  CsvTable table;
  std::size_t pos = 0;
  std::size_t line_no = 1;
  if (pos < text.size()) {
    table.header = parse_line(text, pos, path, line_no);
  }
  while (pos < text.size()) {
    ++line_no;
    auto fields = parse_line(text, pos, path, line_no);
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    table.rows.push_back(std::move(fields));
  }
  return table;
}

CsvTable read_csv(const std::string& path) {
  return parse_csv(read_file(path), path);
}

namespace {

void append_field(std::string& out, const std::string& field) {
  const bool needs_quotes =
      field.find_first_of(",\"\n\r") != std::string::npos;
  if (!needs_quotes) {
    out += field;
    return;
  }
  out.push_back('"');
  for (const char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
}

void append_row(std::string& out, const std::vector<std::string>& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i > 0) out.push_back(',');
    append_field(out, row[i]);
  }
  out.push_back('\n');
}

}  // namespace

std::string to_csv(const std::vector<std::string>& header,
                   const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  append_row(out, header);
  for (const auto& row : rows) append_row(out, row);
  return out;
}

}  // namespace yieldcast
