#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "survee/survival_data.hpp"

namespace survee {

/// Column bindings for loading a one-row-per-person CSV file.
///
/// `time_resolution` controls discretization of the time column; the grid
/// length is the maximum discretized time unless `num_intervals` is set.
struct CsvSchema {
  std::string id_column;
  std::string time_column;
  std::string event_column;
  std::vector<std::string> covariate_columns;
  std::string weight_column;      // empty: no unit weights
  double time_resolution = 1.0;
  int num_intervals = 0;          // 0: infer from data
};

/// Parses one CSV record, honoring RFC 4180 quoting. Returns false at EOF.
bool read_csv_record(std::istream& in, std::vector<std::string>& fields);

/// Loads and validates a dataset. Throws SchemaError when a named column is
/// missing and ValidationError (with the 1-based data row) on bad values.
SurvivalDataset load_csv(const std::string& path, const CsvSchema& schema);
SurvivalDataset load_csv(std::istream& in, const CsvSchema& schema,
                         const std::string& source_name = "<stream>");

}  // namespace survee
