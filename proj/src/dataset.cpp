#include "fort/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fort {

namespace {

void check_series(const std::vector<double>& v, long T, const char* name) {
  if (static_cast<long>(v.size()) != T) {
    throw std::invalid_argument(std::string("dataset: column '") + name +
                                "' has length " + std::to_string(v.size()) +
                                ", expected " + std::to_string(T));
  }
  for (size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw std::invalid_argument(std::string("dataset: column '") + name +
                                  "' has a non-finite value at row " +
                                  std::to_string(i + 1));
    }
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string strip(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

void ForecastDataset::validate() const {
  long n = T();
  if (n < 2) throw std::invalid_argument("dataset: needs at least 2 rows");
  check_series(y, n, "y");
  check_series(x, n, "x");
  check_series(z, n, "z");
  check_series(t, n, "t");
  for (long i = 1; i < n; ++i) {
    if (!(t[i] > t[i - 1])) {
      throw std::invalid_argument(
          "dataset: time index must be strictly increasing (violated at row " +
          std::to_string(i + 1) + ")");
    }
  }
  for (const auto& [name, col] : extra) check_series(col, n, name.c_str());
}

ForecastDataset ForecastDataset::tail(long from) const {
  if (from < 0 || from > T()) {
    throw std::invalid_argument("dataset: tail index out of range");
  }
  ForecastDataset out;
  auto cut = [from](const std::vector<double>& v) {
    return std::vector<double>(v.begin() + from, v.end());
  };
  out.t = cut(t);
  out.y = cut(y);
  out.x = cut(x);
  out.z = cut(z);
  for (const auto& [name, col] : extra) out.extra[name] = cut(col);
  return out;
}

ForecastDataset load_csv(const std::string& path, const ColumnMap& columns) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open file: " + path);

  std::string header;
  if (!std::getline(in, header)) {
    throw std::invalid_argument("empty file (missing header): " + path);
  }
  std::vector<std::string> names = split_csv_line(header);
  for (auto& n : names) n = strip(n);

  auto column_index = [&](const std::string& name) -> long {
    for (size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return static_cast<long>(i);
    }
    return -1;
  };

  std::map<std::string, long> role_to_idx;
  for (const auto& [role, colname] : columns) {
    long idx = column_index(colname);
    if (idx < 0) {
      throw std::invalid_argument("column '" + colname + "' (role '" + role +
                                  "') not found in " + path);
    }
    role_to_idx[role] = idx;
  }
  if (!role_to_idx.count("y") || !role_to_idx.count("x")) {
    throw std::invalid_argument("column map must assign roles 'y' and 'x'");
  }

  std::vector<std::vector<double>> table(names.size());
  std::string line;
  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (strip(line).empty()) continue;
    std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != names.size()) {
      throw std::invalid_argument(
          path + ": row " + std::to_string(row) + " has " +
          std::to_string(cells.size()) + " cells, header has " +
          std::to_string(names.size()));
    }
    for (size_t c = 0; c < cells.size(); ++c) {
      std::string s = strip(cells[c]);
      char* end = nullptr;
      double v = std::strtod(s.c_str(), &end);
      if (s.empty() || end != s.c_str() + s.size()) {
        throw std::invalid_argument(path + ": non-numeric cell at row " +
                                    std::to_string(row) + ", column '" +
                                    names[c] + "'");
      }
      table[c].push_back(v);
    }
  }

  ForecastDataset ds;
  ds.y = table[static_cast<size_t>(role_to_idx.at("y"))];
  ds.x = table[static_cast<size_t>(role_to_idx.at("x"))];
  long T = static_cast<long>(ds.y.size());
  if (role_to_idx.count("t")) {
    ds.t = table[static_cast<size_t>(role_to_idx.at("t"))];
  } else {
    ds.t.resize(static_cast<size_t>(T));
    for (long i = 0; i < T; ++i) ds.t[static_cast<size_t>(i)] = double(i + 1);
  }
  if (role_to_idx.count("z")) {
    ds.z = table[static_cast<size_t>(role_to_idx.at("z"))];
  } else {
    // No state mapped: default to the time index, the choice that every
    // model variant accepts. Callers wanting z = y_{t-1} use
    // with_state_lagged_y.
    ds.z = ds.t;
  }
  for (size_t c = 0; c < names.size(); ++c) {
    bool is_role = false;
    for (const auto& [role, idx] : role_to_idx) {
      if (idx == static_cast<long>(c)) is_role = true;
    }
    if (!is_role) ds.extra[names[c]] = table[c];
  }
  ds.validate();
  return ds;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void save_csv(const ForecastDataset& ds, const std::string& path) {
  ds.validate();
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write file: " + path);
  out << "t,y,x,z";
  for (const auto& [name, col] : ds.extra) out << "," << name;
  out << "\n";
  for (long i = 0; i < ds.T(); ++i) {
    auto s = static_cast<size_t>(i);
    out << format_double(ds.t[s]) << "," << format_double(ds.y[s]) << ","
        << format_double(ds.x[s]) << "," << format_double(ds.z[s]);
    for (const auto& [name, col] : ds.extra) out << "," << format_double(col[s]);
    out << "\n";
  }
}

ForecastDataset with_state_lagged_y(const ForecastDataset& ds) {
  ds.validate();
  ForecastDataset out = ds.tail(1);
  for (long i = 0; i < out.T(); ++i) {
    out.z[static_cast<size_t>(i)] = ds.y[static_cast<size_t>(i)];
  }
  return out;
}

ForecastDataset with_state_time(const ForecastDataset& ds) {
  ds.validate();
  ForecastDataset out = ds;
  out.z = out.t;
  return out;
}

}  // namespace fort
