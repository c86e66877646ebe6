#include "ixfdr/dataset.hpp"

#include "ixfdr/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ixfdr {

std::string_view to_string(Task task) {
  return task == Task::kBinary ? "binary" : "regression";
}

Task parse_task(std::string_view name) {
  if (name == "regression") return Task::kRegression;
  if (name == "binary") return Task::kBinary;
  throw ConfigError("unknown task '" + std::string(name) + "' (expected regression|binary)");
}

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  s = s.substr(b, e - b);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return std::string(s);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      cells.push_back(trim(std::string_view(line).substr(start)));
      break;
    }
    cells.push_back(trim(std::string_view(line).substr(start, comma - start)));
    start = comma + 1;
  }
  return cells;
}

std::optional<double> parse_number(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value)) return std::nullopt;
  return value;
}

}  // namespace

Table read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("'" + path.string() + "' is empty");
  Table table;
  table.columns = split_line(line);
  for (const auto& name : table.columns) {
    if (name.empty()) throw DataError("'" + path.string() + "': empty column name in header");
  }

  std::vector<double> cells;
  std::vector<std::size_t> missing_rows;
  std::size_t rows = 0;
  std::size_t row_number = 1;
  while (std::getline(in, line)) {
    ++row_number;
    if (trim(line).empty()) continue;
    const auto fields = split_line(line);
    if (fields.size() != table.columns.size()) {
      throw DataError("'" + path.string() + "' row " + std::to_string(row_number) + ": expected " +
                      std::to_string(table.columns.size()) + " fields, got " +
                      std::to_string(fields.size()));
    }
    bool row_missing = false;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const std::string& f = fields[c];
      if (f.empty() || f == "NA" || f == "na" || f == "NaN" || f == "nan") {
        row_missing = true;
        cells.push_back(0.0);
        continue;
      }
      const auto v = parse_number(f);
      if (!v) {
        throw DataError("'" + path.string() + "' row " + std::to_string(row_number) +
                        ", column '" + table.columns[c] + "': non-numeric cell '" + f + "'");
      }
      cells.push_back(*v);
    }
    if (row_missing) missing_rows.push_back(row_number);
    ++rows;
  }
  if (!missing_rows.empty()) {
    std::ostringstream msg;
    msg << "'" << path.string() << "': missing values in rows";
    for (std::size_t i = 0; i < missing_rows.size() && i < 20; ++i) msg << ' ' << missing_rows[i];
    if (missing_rows.size() > 20) msg << " ... (" << missing_rows.size() << " rows)";
    throw DataError(msg.str());
  }
  table.values.resize(static_cast<Eigen::Index>(rows),
                      static_cast<Eigen::Index>(table.columns.size()));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          cells[r * table.columns.size() + c];
    }
  }
  return table;
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& columns,
               const Matrix& values) {
  if (static_cast<std::size_t>(values.cols()) != columns.size()) {
    throw ContractViolation("write_csv: column count does not match header");
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
  out << '\n';
  char buf[32];
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      const auto res = std::to_chars(buf, buf + sizeof buf, values(r, c));
      if (c) out << ',';
      out.write(buf, res.ptr - buf);
    }
    out << '\n';
  }
}

Dataset ingest_csv(const std::filesystem::path& path, const std::string& response_column,
                   Task task, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
    throw ConfigError("train_fraction must lie in (0, 1]");
  }
  Table table = read_csv(path);
  std::size_t response = table.columns.size();
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (table.columns[c] == response_column) response = c;
  }
  if (response == table.columns.size()) {
    std::string available;
    for (const auto& c : table.columns) available += (available.empty() ? "" : ", ") + c;
    throw DataError("response column '" + response_column + "' not found; available columns: " +
                    available);
  }
  if (table.columns.size() < 2) throw DataError("'" + path.string() + "' has no feature columns");

  Dataset data;
  data.task = task;
  data.response_name = response_column;
  const auto n = table.values.rows();
  const auto p = static_cast<Eigen::Index>(table.columns.size() - 1);
  data.x.resize(n, p);
  data.y = table.values.col(static_cast<Eigen::Index>(response));
  Eigen::Index k = 0;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (c == response) continue;
    data.x.col(k++) = table.values.col(static_cast<Eigen::Index>(c));
    data.feature_names.push_back(table.columns[c]);
  }
  if (task == Task::kBinary) {
    for (Eigen::Index r = 0; r < n; ++r) {
      if (data.y(r) != 0.0 && data.y(r) != 1.0) {
        throw DataError("binary response must be 0 or 1; row " + std::to_string(r + 2) +
                        " has value " + std::to_string(data.y(r)));
      }
    }
  }
  data.n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n)));
  return data;
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data) {
  std::vector<std::string> columns = data.feature_names;
  if (columns.empty()) columns = default_feature_names(data.p());
  columns.push_back(data.response_name);
  Matrix values(data.x.rows(), data.x.cols() + 1);
  values << data.x, data.y;
  write_csv(path, columns, values);
}

std::vector<std::string> default_feature_names(std::size_t p) {
  std::vector<std::string> names;
  names.reserve(p);
  for (std::size_t j = 0; j < p; ++j) names.push_back("x" + std::to_string(j + 1));
  return names;
}

std::vector<std::string> augmented_names(const std::vector<std::string>& feature_names) {
  std::vector<std::string> names = feature_names;
  for (const auto& name : feature_names) names.push_back(name + "_ko");
  return names;
}

}  // namespace ixfdr
