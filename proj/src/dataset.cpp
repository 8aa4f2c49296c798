#include "panelfm/dataset.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

namespace panelfm {

std::size_t LabelIndex::intern(const std::string& label) {
  auto [it, inserted] = index_.try_emplace(label, labels_.size());
  if (inserted) labels_.push_back(label);
  return it->second;
}

std::optional<std::size_t> LabelIndex::find(const std::string& label) const {
  auto it = index_.find(label);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

LabelIndex LabelIndex::from_labels(std::vector<std::string> labels) {
  LabelIndex out;
  for (auto& l : labels) {
    if (out.find(l)) throw DataError("duplicate label '" + l + "'");
    out.intern(l);
  }
  return out;
}

void LongitudinalDataset::rebuild_index() {
  index_by_individual.assign(n, {});
  index_by_timepoint.assign(m, {});
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.individual < n) index_by_individual[rec.individual].push_back(r);
    if (rec.timepoint < m) index_by_timepoint[rec.timepoint].push_back(r);
  }
}

LongitudinalDataset LongitudinalDataset::from_records(std::vector<Record> records,
                                                      LabelIndex individuals,
                                                      LabelIndex timepoints,
                                                      std::size_t p) {
  LongitudinalDataset ds;
  ds.n = individuals.size();
  ds.m = timepoints.size();
  ds.p = p;
  ds.records = std::move(records);
  ds.individual_labels = std::move(individuals);
  ds.timepoint_labels = std::move(timepoints);
  for (std::size_t k = 0; k < p; ++k) ds.feature_names.push_back("x" + std::to_string(k + 1));
  ds.rebuild_index();
  auto problems = validate(ds);
  if (!problems.empty()) throw DataError(problems.front());
  return ds;
}

std::vector<std::string> validate(const LongitudinalDataset& ds) {
  std::vector<std::string> out;
  if (ds.n < 1) out.push_back("n must be >= 1");
  if (ds.m < 1) out.push_back("m must be >= 1");
  if (ds.p < 1) out.push_back("p must be >= 1");

  std::set<std::pair<std::size_t, std::size_t>> seen;
  std::vector<std::size_t> per_individual(ds.n, 0);
  for (std::size_t r = 0; r < ds.records.size(); ++r) {
    const auto& rec = ds.records[r];
    const std::string where = "record " + std::to_string(r) + ": ";
    bool in_range = true;
    if (rec.individual >= ds.n) {
      out.push_back(where + "individual index out of range");
      in_range = false;
    }
    if (rec.timepoint >= ds.m) {
      out.push_back(where + "time index out of range");
      in_range = false;
    }
    if (static_cast<std::size_t>(rec.features.size()) != ds.p) {
      out.push_back(where + "feature length " + std::to_string(rec.features.size()) +
                    " != p = " + std::to_string(ds.p));
    } else if (!rec.features.allFinite()) {
      out.push_back(where + "non-finite feature value");
    }
    if (!std::isfinite(rec.outcome)) out.push_back(where + "non-finite outcome");
    if (in_range) {
      if (!seen.emplace(rec.individual, rec.timepoint).second)
        out.push_back(where + "duplicate (individual, time point) pair");
      ++per_individual[rec.individual];
    }
  }
  for (std::size_t i = 0; i < ds.n; ++i) {
    if (per_individual[i] == 0) out.push_back("individual " + std::to_string(i) + " has no records");
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(std::string s) {
  const char* ws = " \t\r";
  s.erase(0, s.find_first_not_of(ws));
  auto last = s.find_last_not_of(ws);
  s.erase(last == std::string::npos ? 0 : last + 1);
  return s;
}

double parse_number(const std::string& cell, const std::string& source, std::size_t line,
                    const std::string& column) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = first + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (cell.empty() || ec != std::errc() || ptr != last) {
    throw DataError(source + ": row " + std::to_string(line) + ", column '" + column +
                    "': non-numeric cell '" + cell + "'");
  }
  return value;
}

}  // namespace

RawTable read_long_csv(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(source + ": empty file");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  auto header = split_csv_line(line);
  for (auto& h : header) h = trim(h);
  const char* required[] = {"id", "time", "y"};
  for (std::size_t c = 0; c < 3; ++c) {
    if (header.size() <= c || header[c] != required[c]) {
      throw DataError(source + ": missing column '" + required[c] + "' at position " +
                      std::to_string(c + 1) + " (expected header id,time,y,x1,...,xp)");
    }
  }
  RawTable table;
  table.feature_names.assign(header.begin() + 3, header.end());
  if (table.feature_names.empty()) throw DataError(source + ": p must be >= 1 (no feature columns)");
  const std::size_t p = table.feature_names.size();

  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw DataError(source + ": row " + std::to_string(lineno) + " has " +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(header.size()));
    }
    RawRow row;
    row.line = lineno;
    row.id = trim(cells[0]);
    row.time = trim(cells[1]);
    if (row.id.empty()) throw DataError(source + ": row " + std::to_string(lineno) + ", column 'id': empty label");
    if (row.time.empty()) throw DataError(source + ": row " + std::to_string(lineno) + ", column 'time': empty label");
    row.y = parse_number(trim(cells[2]), source, lineno, "y");
    row.x.resize(static_cast<Eigen::Index>(p));
    for (std::size_t k = 0; k < p; ++k) {
      row.x[static_cast<Eigen::Index>(k)] =
          parse_number(trim(cells[3 + k]), source, lineno, table.feature_names[k]);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

RawTable read_long_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file '" + path.string() + "'");
  return read_long_csv(in, path.string());
}

LongitudinalDataset dataset_from_table(const RawTable& table) {
  LabelIndex individuals;
  LabelIndex timepoints;
  std::vector<Record> records;
  records.reserve(table.rows.size());
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& row : table.rows) {
    Record rec;
    rec.individual = individuals.intern(row.id);
    rec.timepoint = timepoints.intern(row.time);
    if (!seen.emplace(rec.individual, rec.timepoint).second) {
      throw DataError("row " + std::to_string(row.line) + ": duplicate (id, time) pair ('" +
                      row.id + "', '" + row.time + "')");
    }
    if (!std::isfinite(row.y) || !row.x.allFinite()) {
      throw DataError("row " + std::to_string(row.line) + ": non-finite value");
    }
    rec.features = row.x;
    rec.outcome = row.y;
    records.push_back(std::move(rec));
  }
  auto ds = LongitudinalDataset::from_records(std::move(records), std::move(individuals),
                                              std::move(timepoints), table.feature_names.size());
  ds.feature_names = table.feature_names;
  return ds;
}

LongitudinalDataset load_dataset(const std::filesystem::path& path) {
  return dataset_from_table(read_long_csv(path));
}

void write_long_csv(std::ostream& out, const LongitudinalDataset& ds) {
  out << "id,time,y";
  for (std::size_t k = 0; k < ds.p; ++k) {
    out << ',' << (k < ds.feature_names.size() ? ds.feature_names[k] : "x" + std::to_string(k + 1));
  }
  out << '\n';
  char buf[32];
  auto put = [&](double v) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, ptr - buf);
  };
  for (const auto& rec : ds.records) {
    out << ds.individual_labels.label(rec.individual) << ','
        << ds.timepoint_labels.label(rec.timepoint) << ',';
    put(rec.outcome);
    for (Eigen::Index k = 0; k < rec.features.size(); ++k) {
      out << ',';
      put(rec.features[k]);
    }
    out << '\n';
  }
}

void write_long_csv(const std::filesystem::path& path, const LongitudinalDataset& ds) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  write_long_csv(out, ds);
}

}  // namespace panelfm
