#pragma once

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "acfl/dataset.hpp"
#include "acfl/errors.hpp"
#include "acfl/numerics.hpp"

namespace acfl::csv {

/// Shortest decimal that parses back to the same double ('.' decimal point,
/// no grouping, locale independent).
inline std::string format(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string format(std::size_t v) { return std::to_string(v); }

inline double parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ParameterError("csv: not a number: '" + std::string(s) + "'");
  }
  return v;
}

inline std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.emplace_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t k = 0; k < header.size(); ++k)
      if (header[k] == name) return k;
    throw ParameterError("csv: no column '" + std::string(name) + "'");
  }
};

inline Table read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  Table t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (first) {
      t.header = split_line(line);
      first = false;
      continue;
    }
    if (line.empty()) continue;
    t.rows.push_back(split_line(line));
  }
  return t;
}

/// Buffered writer with LF line endings; throws IoError if the file cannot be
/// created or the final flush fails.
class Writer {
 public:
  Writer(const std::filesystem::path& path, const std::vector<std::string>& header)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError("cannot write " + path.string());
    row(header);
  }

  template <typename... Cells>
  void cells(const Cells&... c) {
    std::string line;
    bool first = true;
    ((line += (first ? "" : ","), line += to_cell(c), first = false), ...);
    line += '\n';
    out_ << line;
  }

  void row(const std::vector<std::string>& values) {
    std::string line;
    for (std::size_t k = 0; k < values.size(); ++k) {
      if (k) line += ',';
      line += values[k];
    }
    line += '\n';
    out_ << line;
  }

  void close() {
    out_.flush();
    if (!out_) throw IoError("write failed: " + path_.string());
    out_.close();
  }

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  static std::string to_cell(const std::string& s) { return s; }
  static std::string to_cell(const char* s) { return s; }
  static std::string to_cell(double v) { return format(v); }
  static std::string to_cell(std::size_t v) { return format(v); }

  std::filesystem::path path_;
  std::ofstream out_;
};

inline void write_matrix(const std::filesystem::path& path, const Matrix& m) {
  std::vector<std::string> header;
  for (std::size_t c = 0; c < m.cols(); ++c) header.push_back("c_" + std::to_string(c + 1));
  Writer w(path, header);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    std::vector<std::string> row;
    for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(format(m(r, c)));
    w.row(row);
  }
  w.close();
}

inline Matrix read_matrix(const std::filesystem::path& path) {
  const Table t = read(path);
  if (t.rows.empty()) throw ParameterError("csv: empty matrix file " + path.string());
  std::vector<double> data;
  for (const auto& row : t.rows) {
    if (row.size() != t.header.size()) throw ParameterError("csv: ragged row in " + path.string());
    for (const auto& cell : row) data.push_back(parse_double(cell));
  }
  return Matrix(t.rows.size(), t.header.size(), std::move(data));
}

/// One file per device, `device_0000.csv`, ..., with header x_1..x_d,y_1..y_o.
/// W_true, when known, goes to `w_true.csv`.
inline std::vector<std::filesystem::path> save_dataset(const FederatedDataset& ds,
                                                       const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  std::vector<std::string> header;
  for (std::size_t c = 0; c < ds.features(); ++c) header.push_back("x_" + std::to_string(c + 1));
  for (std::size_t c = 0; c < ds.outputs(); ++c) header.push_back("y_" + std::to_string(c + 1));

  std::vector<std::filesystem::path> paths;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "device_%04zu.csv", i);
    const auto& dev = ds.device(i);
    Writer w(dir / name, header);
    for (std::size_t r = 0; r < dev.samples(); ++r) {
      std::vector<std::string> row;
      for (std::size_t c = 0; c < dev.features(); ++c) row.push_back(format(dev.x()(r, c)));
      for (std::size_t c = 0; c < dev.outputs(); ++c) row.push_back(format(dev.y()(r, c)));
      w.row(row);
    }
    w.close();
    paths.push_back(w.path());
  }
  if (ds.w_true()) {
    write_matrix(dir / "w_true.csv", *ds.w_true());
    paths.push_back(dir / "w_true.csv");
  }
  return paths;
}

inline FederatedDataset load_dataset(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("device_", 0) == 0 && entry.path().extension() == ".csv") {
      files.push_back(entry.path());
    }
  }
  if (ec) throw IoError("cannot list " + dir.string() + ": " + ec.message());
  if (files.empty()) throw IoError("no device_*.csv files in " + dir.string());
  std::sort(files.begin(), files.end());

  std::vector<DeviceData> devices;
  for (const auto& f : files) {
    const Table t = read(f);
    std::size_t d = 0;
    std::size_t o = 0;
    for (const auto& h : t.header) {
      if (h.rfind("x_", 0) == 0) ++d;
      else if (h.rfind("y_", 0) == 0) ++o;
      else throw ParameterError("csv: unexpected column '" + h + "' in " + f.string());
    }
    if (d == 0 || o == 0 || t.rows.empty()) throw ParameterError("csv: malformed " + f.string());
    std::vector<double> xs;
    std::vector<double> ys;
    for (const auto& row : t.rows) {
      if (row.size() != d + o) throw ParameterError("csv: ragged row in " + f.string());
      for (std::size_t c = 0; c < d; ++c) xs.push_back(parse_double(row[c]));
      for (std::size_t c = 0; c < o; ++c) ys.push_back(parse_double(row[d + c]));
    }
    devices.emplace_back(Matrix(t.rows.size(), d, std::move(xs)),
                         Matrix(t.rows.size(), o, std::move(ys)));
  }
  std::optional<Matrix> w_true;
  if (std::filesystem::exists(dir / "w_true.csv")) w_true = read_matrix(dir / "w_true.csv");
  return FederatedDataset(std::move(devices), std::move(w_true));
}

}  // namespace acfl::csv
