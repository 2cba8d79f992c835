#pragma once

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "rstdr/distribution.hpp"

namespace rstdr::cli {

/// Comma-separated table with a mandatory header row; no quoting.
struct CsvTable {
  std::string path;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  bool has(const std::string& column) const;
  /// Index of `column`; SchemaError naming the column and file if absent.
  int column(const std::string& column) const;
  double number(std::size_t row, int column) const;
  long integer(std::size_t row, int column) const;
};

CsvTable read_csv(const std::string& path);

/// Writes fields with 17 significant digits for doubles.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);

  CsvWriter& operator<<(double v);
  CsvWriter& operator<<(int v);
  CsvWriter& operator<<(long v);
  CsvWriter& operator<<(const std::string& v);
  void end_row();
  /// Flushes and reports write errors as IoError.
  void close();

 private:
  void separator();

  struct Closer {
    void operator()(std::FILE* f) const {
      if (f) std::fclose(f);
    }
  };
  std::string path_;
  std::unique_ptr<std::FILE, Closer> file_;
  bool first_ = true;
};

/// Input of the fit command, binned to one PanelDataset per threshold.
struct BinnedInput {
  std::vector<PanelDataset> datasets;
  std::vector<double> thresholds;
  bool from_micro = false;
};

/// micro.csv: t,site,s1,s2,x,z_star with one row per response.
std::vector<dr::MicroSample> read_micro(const CsvTable& table, int* periods);
/// binned.csv: t,site,s1,s2,x,n,y_1..y_K; `thresholds` must have K entries.
BinnedInput read_binned(const CsvTable& table, const std::vector<double>& thresholds);
/// Detects the layout from the header (z_star: micro, y_1: binned).
BinnedInput read_fit_input(const std::string& path, const std::vector<double>& thresholds);

}  // namespace rstdr::cli
