#include "stabletree/core/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "stabletree/error.hpp"
#include "stabletree/random.hpp"

namespace stabletree::core {

using nlohmann::json;

json schema_to_json(const Schema& schema) {
  json cols = json::array();
  for (const auto& c : schema.columns()) {
    json col{{"name", c.name}, {"kind", c.is_ordinal() ? "ordinal" : "continuous"}};
    if (c.is_ordinal()) {
      col["levels"] = c.level_count;
      if (!c.level_labels.empty()) col["level_labels"] = c.level_labels;
    }
    cols.push_back(std::move(col));
  }
  return json{{"columns", std::move(cols)},
              {"classes", schema.class_labels()},
              {"label_column", schema.label_column()}};
}

Schema schema_from_json(const json& j) {
  try {
    std::vector<ColumnSpec> columns;
    for (const auto& col : j.at("columns")) {
      const auto name = col.at("name").get<std::string>();
      const auto kind = col.value("kind", std::string("continuous"));
      if (kind == "continuous") {
        columns.push_back(ColumnSpec::continuous(name));
      } else if (kind == "ordinal") {
        columns.push_back(ColumnSpec::ordinal(
            name, col.at("levels").get<int>(),
            col.value("level_labels", std::vector<std::string>{})));
      } else {
        throw SchemaError("column '" + name + "' has unknown kind '" + kind + "'");
      }
    }
    return Schema(std::move(columns), j.at("classes").get<std::vector<std::string>>(),
                  j.value("label_column", std::string("label")));
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed schema: ") + e.what());
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

Schema read_schema(const std::filesystem::path& path) {
  const auto text = read_text_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
  try {
    return schema_from_json(j);
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

void write_schema(const Schema& schema, const std::filesystem::path& path) {
  write_text_file(path, schema_to_json(schema).dump(2) + "\n");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cell += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else if (ch != '\r') {
      cell += ch;
    }
  }
  cells.push_back(std::move(cell));
  return cells;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

std::string where(const std::string& source, std::size_t line, std::size_t column) {
  return source + ":" + std::to_string(line) + ":" + std::to_string(column) + ": ";
}

}  // namespace

Dataset read_csv(std::istream& in, const Schema& schema, LabelPolicy labels,
                 const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(source + ": empty file, expected a header row");
  auto header = split_csv_line(line);
  for (auto& h : header) h = trim(h);

  std::vector<std::optional<std::size_t>> target(header.size());
  std::optional<std::size_t> label_pos;
  std::vector<bool> seen(schema.column_count(), false);
  for (std::size_t p = 0; p < header.size(); ++p) {
    if (header[p] == schema.label_column()) {
      label_pos = p;
      continue;
    }
    const auto c = schema.find_column(header[p]);
    if (!c) throw SchemaError(where(source, 1, p + 1) + "column '" + header[p] + "' is not in the schema");
    if (seen[*c]) throw SchemaError(where(source, 1, p + 1) + "duplicate column '" + header[p] + "'");
    seen[*c] = true;
    target[p] = *c;
  }
  std::string missing;
  for (std::size_t c = 0; c < seen.size(); ++c)
    if (!seen[c]) missing += (missing.empty() ? "" : ", ") + schema.column(c).name;
  if (!missing.empty()) throw SchemaError(source + ": missing schema columns: " + missing);
  if (labels == LabelPolicy::Required && !label_pos)
    throw SchemaError(source + ": missing label column '" + schema.label_column() + "'");
  const bool keep_labels = label_pos && labels != LabelPolicy::Ignore;

  Matrix rows(0, schema.column_count());
  std::vector<int> label_values;
  std::vector<double> row(schema.column_count());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw DataError(where(source, line_no, 1) + "expected " + std::to_string(header.size()) +
                      " cells, found " + std::to_string(cells.size()));
    for (std::size_t p = 0; p < cells.size(); ++p) {
      const std::string cell = trim(cells[p]);
      if (label_pos && p == *label_pos) {
        if (!keep_labels) continue;
        const auto& names = schema.class_labels();
        auto it = std::find(names.begin(), names.end(), cell);
        int value = -1;
        if (it != names.end()) {
          value = static_cast<int>(it - names.begin());
        } else {
          auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
          if (ec != std::errc() || ptr != cell.data() + cell.size() || value < 0 ||
              static_cast<std::size_t>(value) >= names.size())
            throw DataError(where(source, line_no, p + 1) + "unknown class label '" + cell + "'");
        }
        label_values.push_back(value);
        continue;
      }
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size())
        throw DataError(where(source, line_no, p + 1) + "cannot parse '" + cell + "' as a number");
      row[*target[p]] = v;
    }
    try {
      schema.check_row(row);
    } catch (const SchemaError& e) {
      throw DataError(where(source, line_no, 1) + e.what());
    }
    rows.append_row(row);
  }
  std::optional<std::vector<int>> lab;
  if (keep_labels) lab = std::move(label_values);
  return Dataset(schema, std::move(rows), std::move(lab));
}

Dataset read_csv(const std::filesystem::path& path, const Schema& schema, LabelPolicy labels) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return read_csv(in, schema, labels, path.string());
}

void write_csv(std::ostream& out, const Dataset& data) {
  const auto& schema = data.schema;
  for (std::size_t c = 0; c < schema.column_count(); ++c) out << (c ? "," : "") << schema.column(c).name;
  if (data.labels) out << "," << schema.label_column();
  out << "\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto r = data.rows.row(i);
    for (std::size_t c = 0; c < r.size(); ++c) out << (c ? "," : "") << r[c];
    if (data.labels) out << "," << schema.class_labels()[(*data.labels)[i]];
    out << "\n";
  }
}

void write_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  write_csv(out, data);
}

std::uint64_t file_digest(const std::filesystem::path& path) {
  return fnv1a64(read_text_file(path));
}

}  // namespace stabletree::core
