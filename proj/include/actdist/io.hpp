#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "actdist/distribution.hpp"

namespace actdist::io {

/// Comma-separated table with a mandatory header row. Parse failures throw
/// actdist::Error naming the file and line; unreadable files throw IoError.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line;  // source line of each row, 1-based

  /// Index of `name` in the header; throws if absent.
  std::size_t column(const std::string& name) const;
  bool has_column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(std::istream& in, const std::string& source);

/// Shortest decimal text that reads back to the same double.
std::string format_number(double v);

/// Long-format readings (subject_id, timestamp_min, count) joined with a
/// subjects table (subject_id, survey_weight, covariates...). Rows of one
/// subject may appear in any order; they are sorted by timestamp.
std::vector<ActivitySeries> load_cohort(const std::filesystem::path& readings,
                                        const std::filesystem::path& subjects);

void write_readings(std::ostream& out, std::span<const ActivitySeries> cohort);
/// Numeric covariates first, then labels, each in name order.
void write_subjects(std::ostream& out, std::span<const ActivitySeries> cohort);

struct QuantileTable {
  std::vector<std::string> subject_ids;
  std::vector<QuantileGrid> grids;
};

void write_quantiles(std::ostream& out, const QuantileTable& table);
QuantileTable read_quantiles(const std::filesystem::path& path);

}  // namespace actdist::io
