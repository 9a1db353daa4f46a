#include "actdist/io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include "actdist/error.hpp"

namespace actdist::io {

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

// Splits one record; double quotes may wrap a field containing commas.
std::vector<std::string> split_record(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"' && k + 1 < line.size() && line[k + 1] == '"') {
        field += '"';
        ++k;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(field));
      field.clear();
    } else {
      field += c;
    }
  }
  out.push_back(trim(field));
  return out;
}

std::string where(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line) + ": ";
}

bool parse_double(const std::string& text, double& out) {
  if (text.empty()) return false;
  const char* first = text.data();
  const char* last = first + text.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

double number_at(const CsvTable& t, std::size_t row, std::size_t col, const std::string& source,
                 const std::string& what) {
  double v = 0.0;
  if (!parse_double(t.rows[row][col], v)) {
    throw Error(where(source, t.line[row]) + "invalid " + what + " '" + t.rows[row][col] + "'");
  }
  return v;
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw Error("missing column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

bool CsvTable::has_column(const std::string& name) const {
  return std::find(header.begin(), header.end(), name) != header.end();
}

CsvTable parse_csv(std::istream& in, const std::string& source) {
  CsvTable t;
  std::string line;
  std::size_t number = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (number == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    auto fields = split_record(line);
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
      std::set<std::string> seen;
      for (const auto& h : t.header) {
        if (!seen.insert(h).second) throw Error(where(source, number) + "duplicate column '" + h + "'");
      }
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw Error(where(source, number) + "expected " + std::to_string(t.header.size()) +
                  " fields, found " + std::to_string(fields.size()));
    }
    t.rows.push_back(std::move(fields));
    t.line.push_back(number);
  }
  if (in.bad()) throw IoError(source + ": read failure");
  if (!have_header) throw Error(source + ": missing header row");
  return t;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_csv(in, path.string());
}

std::string format_number(double v) { return fmt::format("{}", v); }

std::vector<ActivitySeries> load_cohort(const std::filesystem::path& readings,
                                        const std::filesystem::path& subjects) {
  const CsvTable subj = read_csv(subjects);
  const std::string subj_src = subjects.string();
  const std::size_t id_col = subj.column("subject_id");
  const std::size_t w_col = subj.column("survey_weight");

  std::vector<ActivitySeries> cohort;
  std::map<std::string, std::size_t> index;
  for (std::size_t r = 0; r < subj.rows.size(); ++r) {
    ActivitySeries s;
    s.subject_id = subj.rows[r][id_col];
    if (s.subject_id.empty()) throw Error(where(subj_src, subj.line[r]) + "empty subject_id");
    s.survey_weight = number_at(subj, r, w_col, subj_src, "survey_weight");
    if (!(s.survey_weight > 0.0)) {
      throw Error(where(subj_src, subj.line[r]) + "survey_weight must be positive");
    }
    for (std::size_t c = 0; c < subj.header.size(); ++c) {
      if (c == id_col || c == w_col) continue;
      double v = 0.0;
      if (parse_double(subj.rows[r][c], v)) {
        s.covariates[subj.header[c]] = v;
      } else {
        s.labels[subj.header[c]] = subj.rows[r][c];
      }
    }
    if (!index.emplace(s.subject_id, cohort.size()).second) {
      throw Error(where(subj_src, subj.line[r]) + "duplicate subject '" + s.subject_id + "'");
    }
    cohort.push_back(std::move(s));
  }

  const CsvTable rd = read_csv(readings);
  const std::string rd_src = readings.string();
  const std::size_t rid = rd.column("subject_id");
  const std::size_t ts = rd.column("timestamp_min");
  const std::size_t cnt = rd.column("count");
  std::vector<std::vector<std::pair<double, std::size_t>>> rows(cohort.size());
  std::vector<std::vector<double>> counts(cohort.size());
  for (std::size_t r = 0; r < rd.rows.size(); ++r) {
    const auto it = index.find(rd.rows[r][rid]);
    if (it == index.end()) {
      throw Error(where(rd_src, rd.line[r]) + "subject '" + rd.rows[r][rid] +
                  "' missing from the subjects table");
    }
    const double t = number_at(rd, r, ts, rd_src, "timestamp");
    const double c = number_at(rd, r, cnt, rd_src, "count");
    if (c < 0.0) throw Error(where(rd_src, rd.line[r]) + "negative count");
    rows[it->second].emplace_back(t, rd.line[r]);
    counts[it->second].push_back(c);
  }

  for (std::size_t s = 0; s < cohort.size(); ++s) {
    if (rows[s].empty()) {
      throw Error(subj_src + ": subject '" + cohort[s].subject_id + "' has no readings");
    }
    std::vector<std::size_t> order(rows[s].size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return rows[s][a].first < rows[s][b].first;
    });
    for (std::size_t k = 0; k < order.size(); ++k) {
      const auto& [t, line] = rows[s][order[k]];
      if (k > 0 && t == cohort[s].timestamps.back()) {
        throw Error(where(rd_src, line) + "duplicate timestamp for subject '" +
                    cohort[s].subject_id + "'");
      }
      cohort[s].timestamps.push_back(t);
      cohort[s].readings.push_back(counts[s][order[k]]);
    }
  }
  return cohort;
}

void write_readings(std::ostream& out, std::span<const ActivitySeries> cohort) {
  out << "subject_id,timestamp_min,count\n";
  for (const auto& s : cohort) {
    for (std::size_t j = 0; j < s.readings.size(); ++j) {
      out << s.subject_id << ',' << format_number(s.timestamps[j]) << ','
          << format_number(s.readings[j]) << '\n';
    }
  }
}

void write_subjects(std::ostream& out, std::span<const ActivitySeries> cohort) {
  std::set<std::string> numeric;
  std::set<std::string> labels;
  for (const auto& s : cohort) {
    for (const auto& [k, v] : s.covariates) numeric.insert(k);
    for (const auto& [k, v] : s.labels) labels.insert(k);
  }
  out << "subject_id,survey_weight";
  for (const auto& k : numeric) out << ',' << k;
  for (const auto& k : labels) out << ',' << k;
  out << '\n';
  for (const auto& s : cohort) {
    out << s.subject_id << ',' << format_number(s.survey_weight);
    for (const auto& k : numeric) {
      out << ',';
      if (const auto it = s.covariates.find(k); it != s.covariates.end()) {
        out << format_number(it->second);
      }
    }
    for (const auto& k : labels) {
      out << ',';
      if (const auto it = s.labels.find(k); it != s.labels.end()) out << it->second;
    }
    out << '\n';
  }
}

void write_quantiles(std::ostream& out, const QuantileTable& table) {
  const std::size_t m = table.grids.empty() ? 0 : table.grids.front().size();
  out << "subject_id";
  for (std::size_t k = 1; k <= m; ++k) out << ",t_" << k;
  out << '\n';
  for (std::size_t i = 0; i < table.grids.size(); ++i) {
    out << table.subject_ids[i];
    for (double v : table.grids[i].values()) out << ',' << format_number(v);
    out << '\n';
  }
}

QuantileTable read_quantiles(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const std::string src = path.string();
  const std::size_t id = t.column("subject_id");
  if (t.header.size() < 3) throw Error(src + ": quantile table needs at least 2 grid columns");
  QuantileTable out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    std::vector<double> values;
    for (std::size_t c = 0; c < t.header.size(); ++c) {
      if (c != id) values.push_back(number_at(t, r, c, src, "quantile value"));
    }
    try {
      out.grids.emplace_back(std::move(values));
    } catch (const Error& e) {
      throw Error(where(src, t.line[r]) + e.what());
    }
    out.subject_ids.push_back(t.rows[r][id]);
  }
  return out;
}

}  // namespace actdist::io
