#include "table_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "rstdr/errors.hpp"

namespace rstdr::cli {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string where(const CsvTable& t, std::size_t row) {
  return "'" + t.path + "' data row " + std::to_string(row + 1);
}

}  // namespace

bool CsvTable::has(const std::string& name) const {
  return std::find(header.begin(), header.end(), name) != header.end();
}

int CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw SchemaError("'" + path + "' is missing column '" + name + "'");
  return static_cast<int>(it - header.begin());
}

double CsvTable::number(std::size_t row, int col) const {
  const std::string& s = rows[row][col];
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw SchemaError(where(*this, row) + ": column '" + header[col] + "' is not a number: '" + s + "'");
  }
  return v;
}

long CsvTable::integer(std::size_t row, int col) const {
  const std::string& s = rows[row][col];
  long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw SchemaError(where(*this, row) + ": column '" + header[col] + "' is not an integer: '" + s + "'");
  }
  return v;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  CsvTable t;
  t.path = path;
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("'" + path + "' is empty (header row required)");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.header = split(line);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split(line);
    if (fields.size() != t.header.size()) {
      throw SchemaError(where(t, t.rows.size()) + " has " + std::to_string(fields.size()) + " fields, header has " +
                        std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(fields));
  }
  return t;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : path_(path), file_(std::fopen(path.c_str(), "wb")) {
  if (!file_) throw IoError("cannot open '" + path + "' for writing");
  for (const auto& h : header) *this << h;
  end_row();
}

void CsvWriter::separator() {
  if (!first_) std::fputc(',', file_.get());
  first_ = false;
}

CsvWriter& CsvWriter::operator<<(double v) {
  separator();
  std::fprintf(file_.get(), "%.17g", v);
  return *this;
}

CsvWriter& CsvWriter::operator<<(int v) { return *this << static_cast<long>(v); }

CsvWriter& CsvWriter::operator<<(long v) {
  separator();
  std::fprintf(file_.get(), "%ld", v);
  return *this;
}

CsvWriter& CsvWriter::operator<<(const std::string& v) {
  separator();
  std::fputs(v.c_str(), file_.get());
  return *this;
}

void CsvWriter::end_row() {
  std::fputc('\n', file_.get());
  first_ = true;
}

void CsvWriter::close() {
  if (!file_) return;
  const bool failed = std::ferror(file_.get()) != 0;
  if (std::fclose(file_.release()) != 0 || failed) throw IoError("write failed for '" + path_ + "'");
}

std::vector<dr::MicroSample> read_micro(const CsvTable& table, int* periods) {
  const int ct = table.column("t"), csite = table.column("site"), cs1 = table.column("s1"),
            cs2 = table.column("s2"), cx = table.column("x"), cz = table.column("z_star");
  std::vector<dr::MicroSample> samples;
  std::map<std::pair<long, long>, std::size_t> index;
  int max_period = 0;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const long t = table.integer(r, ct);
    if (t < 1) throw SchemaError(where(table, r) + ": t must be >= 1");
    const long site = table.integer(r, csite);
    const spatial::Point loc{table.number(r, cs1), table.number(r, cs2)};
    const double x = table.number(r, cx);
    auto [it, inserted] = index.try_emplace({t, site}, samples.size());
    if (inserted) {
      dr::MicroSample s;
      s.period = static_cast<int>(t);
      s.site = static_cast<int>(site);
      s.location = loc;
      s.covariates = {1.0, x};
      samples.push_back(std::move(s));
    }
    dr::MicroSample& s = samples[it->second];
    if (!(s.location == loc) || s.covariates[1] != x) {
      throw SchemaError(where(table, r) + ": site " + std::to_string(site) + " in period " + std::to_string(t) +
                        " has inconsistent s1/s2/x");
    }
    s.responses.push_back(table.number(r, cz));
    max_period = std::max(max_period, static_cast<int>(t));
  }
  if (samples.empty()) throw SchemaError("'" + table.path + "' has no data rows");
  *periods = max_period;
  return samples;
}

BinnedInput read_binned(const CsvTable& table, const std::vector<double>& thresholds) {
  const int ct = table.column("t"), csite = table.column("site"), cs1 = table.column("s1"),
            cs2 = table.column("s2"), cx = table.column("x"), cn = table.column("n");
  std::vector<int> cy;
  for (int k = 1; table.has("y_" + std::to_string(k)); ++k) cy.push_back(table.column("y_" + std::to_string(k)));
  if (cy.empty()) throw SchemaError("'" + table.path + "' is missing column 'y_1'");
  if (cy.size() != thresholds.size()) {
    throw ConfigError("'" + table.path + "' has " + std::to_string(cy.size()) + " count columns but " +
                      std::to_string(thresholds.size()) + " thresholds are configured");
  }
  const int K = static_cast<int>(cy.size());
  std::vector<std::vector<Observation>> per_threshold(K);
  int max_period = 0;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    Observation o;
    const long t = table.integer(r, ct);
    if (t < 1) throw SchemaError(where(table, r) + ": t must be >= 1");
    o.period = static_cast<int>(t);
    o.site = static_cast<int>(table.integer(r, csite));
    o.location = {table.number(r, cs1), table.number(r, cs2)};
    o.covariates = {1.0, table.number(r, cx)};
    o.trials = static_cast<int>(table.integer(r, cn));
    if (o.trials < 1) throw SchemaError(where(table, r) + ": n must be >= 1");
    for (int k = 0; k < K; ++k) {
      o.successes = static_cast<int>(table.integer(r, cy[k]));
      if (o.successes < 0 || o.successes > o.trials) {
        throw SchemaError(where(table, r) + ": y_" + std::to_string(k + 1) + " outside [0, n]");
      }
      per_threshold[k].push_back(o);
    }
    max_period = std::max(max_period, o.period);
  }
  if (table.rows.empty()) throw SchemaError("'" + table.path + "' has no data rows");
  BinnedInput out;
  out.thresholds = thresholds;
  for (int k = 0; k < K; ++k) out.datasets.push_back(PanelDataset::from_observations(per_threshold[k], max_period));
  return out;
}

BinnedInput read_fit_input(const std::string& path, const std::vector<double>& thresholds) {
  const CsvTable table = read_csv(path);
  if (table.has("z_star")) {
    int periods = 0;
    const auto samples = read_micro(table, &periods);
    BinnedInput out;
    out.datasets = dr::bin_counts(samples, dr::ThresholdGrid(thresholds), periods);
    out.thresholds = thresholds;
    out.from_micro = true;
    return out;
  }
  if (!table.has("y_1") && !table.has("n")) {
    throw SchemaError("'" + path + "' is neither micro data (missing column 'z_star') nor binned counts "
                      "(missing columns 'n', 'y_1')");
  }
  return read_binned(table, thresholds);
}

}  // namespace rstdr::cli
