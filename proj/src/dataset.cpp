#include <charconv>
#include <fstream>
#include <iterator>
#include <set>

#include "pivot/harness.hpp"

namespace pivot {
namespace {

using nlohmann::json;

Label parse_label(std::string_view s, std::size_t line) {
  Label v;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw DatasetError(line, "label is not an integer: '" + std::string(s) + "'");
  }
  return v;
}

void check_entry(const DatasetEntry& e, std::size_t line, std::set<std::string>& ids) {
  if (e.label < 0) throw DatasetError(line, "label must be >= 0");
  if (!ids.insert(e.id).second) throw DatasetError(line, "duplicate id '" + e.id + "'");
}

std::vector<DatasetEntry> load_jsonl(std::istream& in) {
  std::vector<DatasetEntry> out;
  std::set<std::string> ids;
  std::string line;
  std::size_t index = 0;
  for (; std::getline(in, line); ++index) {
    const std::size_t lineno = index + 1;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DatasetError(lineno, std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw DatasetError(lineno, "expected a JSON object");
    if (!j.contains("text") || !j["text"].is_string()) {
      throw DatasetError(lineno, "missing string field 'text'");
    }
    if (!j.contains("label") || !j["label"].is_number_integer()) {
      throw DatasetError(lineno, "missing integer field 'label'");
    }
    DatasetEntry e;
    e.text = j["text"].get<std::string>();
    e.label = j["label"].get<Label>();
    if (auto it = j.find("id"); it != j.end() && !it->is_null()) {
      if (it->is_string()) {
        e.id = it->get<std::string>();
      } else if (it->is_number_integer()) {
        e.id = it->dump();
      } else {
        throw DatasetError(lineno, "field 'id' must be a string or integer");
      }
    } else {
      e.id = std::to_string(index);
    }
    check_entry(e, lineno, ids);
    out.push_back(std::move(e));
  }
  return out;
}

struct CsvRow {
  std::vector<std::string> fields;
  std::size_t line = 0;
};

// RFC 4180: quoted fields may hold commas, newlines and doubled quotes.
std::vector<CsvRow> parse_csv(const std::string& s) {
  std::vector<CsvRow> rows;
  CsvRow row;
  std::string field;
  std::size_t line = 1;
  row.line = line;
  bool quoted = false;
  bool any = false;
  auto end_row = [&] {
    row.fields.push_back(std::move(field));
    field.clear();
    const bool blank = row.fields.size() == 1 && row.fields[0].empty();
    if (!blank) rows.push_back(std::move(row));
    row = CsvRow{};
    any = false;
  };
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < s.size() && s[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (!any) {
      row.line = line;
      any = true;
    }
    if (c == '"' && field.empty()) {
      quoted = true;
    } else if (c == ',') {
      row.fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      end_row();
      ++line;
    } else if (c != '\r') {
      field += c;
    }
  }
  if (quoted) throw DatasetError(row.line, "unterminated quoted field");
  if (any || !field.empty() || !row.fields.empty()) end_row();
  return rows;
}

std::vector<DatasetEntry> load_csv(std::istream& in) {
  const std::string content{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  const auto rows = parse_csv(content);
  if (rows.empty()) throw DatasetError(1, "missing CSV header");
  const auto& header = rows[0].fields;
  int text_col = -1, label_col = -1, id_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "text") text_col = static_cast<int>(c);
    if (header[c] == "label") label_col = static_cast<int>(c);
    if (header[c] == "id") id_col = static_cast<int>(c);
  }
  if (text_col < 0) throw DatasetError(rows[0].line, "CSV header lacks a 'text' column");
  if (label_col < 0) throw DatasetError(rows[0].line, "CSV header lacks a 'label' column");

  std::vector<DatasetEntry> out;
  std::set<std::string> ids;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.fields.size() != header.size()) {
      throw DatasetError(row.line, "expected " + std::to_string(header.size()) + " fields, got " +
                                       std::to_string(row.fields.size()));
    }
    DatasetEntry e;
    e.text = row.fields[text_col];
    e.label = parse_label(row.fields[label_col], row.line);
    e.id = (id_col >= 0 && !row.fields[id_col].empty()) ? row.fields[id_col]
                                                         : std::to_string(r - 1);
    check_entry(e, row.line, ids);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace

DatasetError::DatasetError(std::size_t line, const std::string& what)
    : std::runtime_error("dataset line " + std::to_string(line) + ": " + what), line_(line) {}

DatasetFormat parse_dataset_format(const std::string& name) {
  if (name == "jsonl") return DatasetFormat::jsonl;
  if (name == "csv") return DatasetFormat::csv;
  throw std::invalid_argument("unknown dataset format '" + name + "' (expected jsonl or csv)");
}

std::vector<DatasetEntry> load_dataset(std::istream& in, DatasetFormat format) {
  return format == DatasetFormat::jsonl ? load_jsonl(in) : load_csv(in);
}

std::vector<DatasetEntry> load_dataset_file(const std::string& path, DatasetFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);
  return load_dataset(in, format);
}

}  // namespace pivot
