#pragma once

#include <map>
#include <string>
#include <vector>

namespace fort {

// One aligned forecasting sample: realization y_t, point forecast x_t for
// y_t, scalar state z_t known when the forecast was issued, time index t.
struct ForecastDataset {
  std::vector<double> t;
  std::vector<double> y;
  std::vector<double> x;
  std::vector<double> z;
  // Extra named columns carried through for custom instruments.
  std::map<std::string, std::vector<double>> extra;

  long T() const { return static_cast<long>(y.size()); }

  // Enforces equal lengths, T >= 2, finiteness, strictly increasing t.
  void validate() const;

  // Keep rows [from, T); used when instrument lags consume leading rows.
  ForecastDataset tail(long from) const;
};

// Maps dataset roles to CSV column names. Roles: "t", "y", "x", "z".
// Columns not mapped to a role are retained as extra columns.
using ColumnMap = std::map<std::string, std::string>;

// Reads a comma-separated UTF-8 file with a header row. Every mapped column
// must exist; cells must parse as decimal numbers. Errors name the row and
// column. If no "t" mapping is given, t = 1..T is synthesized; if no "z"
// mapping is given, z = lagged y (z_t = y_{t-1}) is NOT synthesized here
// (see derive_state) and z is left empty for the caller to fill.
ForecastDataset load_csv(const std::string& path, const ColumnMap& columns);

// Writes t,y,x,z plus extra columns at 17 significant digits so reloading
// round-trips doubles bit-exactly.
void save_csv(const ForecastDataset& ds, const std::string& path);

// State choices used by the applications: the lagged realization or the
// time index itself. Lagging drops the first row of the dataset.
ForecastDataset with_state_lagged_y(const ForecastDataset& ds);
ForecastDataset with_state_time(const ForecastDataset& ds);

// Shared float formatting: 17 significant digits, round-trip safe.
std::string format_double(double v);

}  // namespace fort
