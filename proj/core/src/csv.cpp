#include "survee/csv.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>
#include <unordered_map>

#include "survee/errors.hpp"

namespace survee {
namespace {

double parse_number(const std::string& field, const std::string& column, long row) {
  try {
    std::size_t pos = 0;
    double v = std::stod(field, &pos);
    while (pos < field.size() && std::isspace(static_cast<unsigned char>(field[pos]))) ++pos;
    if (pos != field.size()) throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("row " + std::to_string(row) + ": cannot parse '" + field +
                          "' in column '" + column + "' as a number");
  }
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name,
                         const std::string& role) {
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == name) return j;
  throw SchemaError("missing " + role + " column '" + name + "'");
}

}  // namespace

bool read_csv_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  std::string field;
  bool quoted = false;
  bool any = false;
  int c;
  while ((c = in.get()) != EOF) {
    any = true;
    char ch = static_cast<char>(c);
    if (quoted) {
      if (ch == '"') {
        if (in.peek() == '"') {
          field.push_back('"');
          in.get();
        } else {
          quoted = false;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (ch == '\n') {
      break;
    } else if (ch == '\r') {
      if (in.peek() == '\n') in.get();
      break;
    } else {
      field.push_back(ch);
    }
  }
  if (!any) return false;
  fields.push_back(std::move(field));
  return true;
}

SurvivalDataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  return load_csv(in, schema, path);
}

SurvivalDataset load_csv(std::istream& in, const CsvSchema& schema,
                         const std::string& source_name) {
  std::vector<std::string> header;
  if (!read_csv_record(in, header))
    throw ValidationError(source_name + ": no records");

  const std::size_t time_idx = column_index(header, schema.time_column, "time");
  const std::size_t event_idx = column_index(header, schema.event_column, "event");
  std::size_t id_idx = header.size();
  if (!schema.id_column.empty()) id_idx = column_index(header, schema.id_column, "id");
  std::size_t weight_idx = header.size();
  if (!schema.weight_column.empty())
    weight_idx = column_index(header, schema.weight_column, "weight");
  std::vector<std::size_t> cov_idx;
  for (const auto& name : schema.covariate_columns)
    cov_idx.push_back(column_index(header, name, "covariate"));

  std::vector<std::string> ids;
  std::vector<double> raw_times;
  std::vector<int> events;
  std::vector<double> weights;
  std::vector<double> covs;

  std::vector<std::string> fields;
  long row = 0;
  while (read_csv_record(in, fields)) {
    ++row;
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (fields.size() != header.size())
      throw ValidationError("row " + std::to_string(row) + ": expected " +
                            std::to_string(header.size()) + " fields, got " +
                            std::to_string(fields.size()));
    for (std::size_t j : cov_idx)
      if (fields[j].empty())
        throw ValidationError("row " + std::to_string(row) + ": missing value in column '" +
                              header[j] + "'");

    double t = parse_number(fields[time_idx], schema.time_column, row);
    if (!(t > 0))
      throw ValidationError("row " + std::to_string(row) + ": time must be positive, got " +
                            fields[time_idx]);
    double ev = parse_number(fields[event_idx], schema.event_column, row);
    if (ev != 0.0 && ev != 1.0)
      throw ValidationError("row " + std::to_string(row) + ": event must be 0 or 1, got " +
                            fields[event_idx]);
    raw_times.push_back(t);
    events.push_back(static_cast<int>(ev));
    ids.push_back(id_idx < header.size() ? fields[id_idx] : std::to_string(row));
    if (weight_idx < header.size())
      weights.push_back(parse_number(fields[weight_idx], schema.weight_column, row));
    for (std::size_t j : cov_idx) covs.push_back(parse_number(fields[j], header[j], row));
  }
  if (raw_times.empty()) throw ValidationError(source_name + ": no records");

  const Eigen::Index n = static_cast<Eigen::Index>(raw_times.size());
  const Eigen::Index p = static_cast<Eigen::Index>(cov_idx.size());

  SurvivalDataset data;
  data.ids = std::move(ids);
  data.grid.resolution = schema.time_resolution;
  data.grid.num_intervals = 1;  // placeholder until times are mapped
  data.observed_time.resize(n);
  int max_time = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    data.observed_time[i] = data.grid.discretize(raw_times[static_cast<std::size_t>(i)]);
    max_time = std::max(max_time, data.observed_time[i]);
  }
  data.grid.num_intervals = schema.num_intervals > 0 ? schema.num_intervals : max_time;
  data.event.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) data.event[i] = events[static_cast<std::size_t>(i)];
  data.covariates.resize(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j)
      data.covariates(i, j) = covs[static_cast<std::size_t>(i * p + j)];
  if (!weights.empty()) {
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) w[i] = weights[static_cast<std::size_t>(i)];
    data.unit_weights = std::move(w);
  }
  data.validate();
  return data;
}

}  // namespace survee
