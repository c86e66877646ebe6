#pragma once

#include "ixfdr/types.hpp"

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace ixfdr {

struct Dataset {
  Matrix x;  // n x p
  Vector y;  // n
  Task task = Task::kRegression;
  std::vector<std::string> feature_names;
  std::string response_name = "y";
  // Rows [0, n_train) form the training split; the remainder is held out.
  std::size_t n_train = 0;
  // Known interacting pairs (0-based feature indices), when available.
  std::optional<std::set<Pair>> truth;

  std::size_t n() const { return static_cast<std::size_t>(x.rows()); }
  std::size_t p() const { return static_cast<std::size_t>(x.cols()); }
};

// A header-named numeric table.
struct Table {
  std::vector<std::string> columns;
  Matrix values;
};

// Parses a comma-separated file with a header row. Every cell must be a
// finite number; empty, NA and NaN cells are rejected with their row numbers
// (1-based, counting the header as row 1).
Table read_csv(const std::filesystem::path& path);

// Writes with 17 significant digits so doubles round-trip exactly.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& columns,
               const Matrix& values);

// Loads an external dataset: every column other than `response_column` is a
// feature. Binary responses must be 0 or 1.
Dataset ingest_csv(const std::filesystem::path& path, const std::string& response_column,
                   Task task, double train_fraction = 0.5);

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);

std::vector<std::string> default_feature_names(std::size_t p);
// Column names for an augmented matrix: x1..xp, x1_ko..xp_ko.
std::vector<std::string> augmented_names(const std::vector<std::string>& feature_names);

}  // namespace ixfdr
