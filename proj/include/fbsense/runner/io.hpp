#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "fbsense/error.hpp"
#include "fbsense/record.hpp"

namespace fbsense::runner {

namespace fs = std::filesystem;

using fbsense::IoError;

inline constexpr char kRecordMagic[8] = {'F', 'B', 'S', 'R', 'E', 'C', '0', '1'};

namespace detail {

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Binary layout: 8-byte magic, u32 LE header length, JSON header
/// (dt, n, seed, scenario_id, scenario_hash), then n little-endian f64.
inline void write_record(const fs::path& path, const MeasurementRecord& rec, const std::string& scenario_hash) {
  rec.validate();
  nlohmann::json h = {{"format", "f64le"},
                      {"dt", rec.grid.dt},
                      {"n", rec.grid.n_samples},
                      {"seed", rec.seed},
                      {"scenario_id", rec.scenario_id},
                      {"scenario_hash", scenario_hash}};
  const std::string header = h.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kRecordMagic, sizeof kRecordMagic);
  const std::uint32_t len = detail::to_little(static_cast<std::uint32_t>(header.size()));
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  std::vector<double> payload(rec.samples.size());
  for (std::size_t k = 0; k < payload.size(); ++k) payload[k] = detail::to_little(rec.samples[k]);
  out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size() * sizeof(double)));
  if (!out) throw IoError("short write to " + path.string());
}

struct LoadedRecord {
  MeasurementRecord record;
  std::string scenario_hash;
};

inline LoadedRecord read_record(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open record " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kRecordMagic, sizeof magic) != 0)
    throw IoError(path.string() + " is not a record file (bad magic)");
  std::uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  len = detail::to_little(len);
  if (!in || len > (1u << 20)) throw IoError(path.string() + ": corrupt header length");
  std::string header(len, '\0');
  in.read(header.data(), len);
  if (!in) throw IoError(path.string() + ": truncated header");
  LoadedRecord out;
  try {
    const auto h = nlohmann::json::parse(header);
    out.record.grid.dt = h.at("dt").get<double>();
    out.record.grid.n_samples = h.at("n").get<std::size_t>();
    out.record.seed = h.at("seed").get<std::uint64_t>();
    out.record.scenario_id = h.at("scenario_id").get<std::string>();
    out.scenario_hash = h.at("scenario_hash").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": bad header: " + e.what());
  }
  out.record.samples.resize(out.record.grid.n_samples);
  in.read(reinterpret_cast<char*>(out.record.samples.data()),
          static_cast<std::streamsize>(out.record.samples.size() * sizeof(double)));
  if (!in) throw IoError(path.string() + ": truncated payload");
  for (double& v : out.record.samples) v = detail::to_little(v);
  return out;
}

/// Tidy table: named columns, each row one observation.
class Table {
 public:
  using Cell = std::variant<double, std::string>;

  explicit Table(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  void add(std::vector<Cell> row) {
    if (row.size() != columns_.size()) throw ValidationError("table row width differs from header");
    rows_.push_back(std::move(row));
  }

  const std::vector<std::string>& columns() const { return columns_; }
  const std::vector<std::vector<Cell>>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i)
      if (columns_[i] == name) return i;
    throw ValidationError("table has no column '" + name + "'");
  }

  double number(std::size_t row, const std::string& name) const {
    const Cell& c = rows_.at(row).at(column(name));
    if (const auto* d = std::get_if<double>(&c)) return *d;
    return std::stod(std::get<std::string>(c));
  }

  std::string text(std::size_t row, const std::string& name) const {
    const Cell& c = rows_.at(row).at(column(name));
    if (const auto* s = std::get_if<std::string>(&c)) return *s;
    return detail::format_double(std::get<double>(c));
  }

  std::string to_csv() const {
    std::string out;
    for (std::size_t i = 0; i < columns_.size(); ++i) out += (i ? "," : "") + columns_[i];
    out += '\n';
    for (const auto& row : rows_) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out += ',';
        if (const auto* d = std::get_if<double>(&row[i])) {
          out += detail::format_double(*d);
        } else {
          out += std::get<std::string>(row[i]);
        }
      }
      out += '\n';
    }
    return out;
  }

  void write(const fs::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << to_csv();
    if (!out) throw IoError("short write to " + path.string());
  }

  /// Reads a file produced by `write`; cells that parse fully as numbers
  /// become doubles.
  static Table read(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw IoError(path.string() + " is empty");
    Table t(split(line));
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<Cell> row;
      for (auto& s : split(line)) {
        char* end = nullptr;
        const double d = std::strtod(s.c_str(), &end);
        if (!s.empty() && end == s.c_str() + s.size()) {
          row.emplace_back(d);
        } else {
          row.emplace_back(std::move(s));
        }
      }
      if (row.size() != t.columns_.size()) throw IoError(path.string() + ": ragged row");
      t.rows_.push_back(std::move(row));
    }
    return t;
  }

 private:
  static std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
  }

  std::vector<std::string> columns_;
  std::vector<std::vector<Cell>> rows_;
};

inline Table record_table(const MeasurementRecord& rec) {
  Table t({"k", "t_s", "x_m"});
  for (std::size_t k = 0; k < rec.samples.size(); ++k)
    t.add({static_cast<double>(k), rec.grid.time(k), rec.samples[k]});
  return t;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace fbsense::runner
