#pragma once

// Device model of a Versal-style AI Engine array: grid geometry, per-tile
// memory banks, PL interface budget and the neighbor memory-sharing topology.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "aiemap/error.hpp"

namespace aiemap {

enum class DataType { int8, fp32 };

struct DataTypeSpec {
  DataType type;
  int input_bytes;   // bytes per A/B element
  int output_bytes;  // bytes per accumulator element
  int peak_macs;     // MACs per cycle per core

  std::string_view name() const { return type == DataType::int8 ? "int8" : "fp32"; }

  friend bool operator==(const DataTypeSpec&, const DataTypeSpec&) = default;
};

// int8 accumulates in int32.
inline constexpr DataTypeSpec kInt8{DataType::int8, 1, 4, 128};
inline constexpr DataTypeSpec kFp32{DataType::fp32, 4, 4, 8};

inline DataTypeSpec dtype_spec(DataType t) { return t == DataType::int8 ? kInt8 : kFp32; }

inline DataTypeSpec parse_dtype(std::string_view s) {
  if (s == "int8") return kInt8;
  if (s == "fp32") return kFp32;
  throw ConfigError("unknown dtype '" + std::string(s) + "' (expected int8|fp32)");
}

struct TileCoord {
  int row = 0;  // row 0 is adjacent to the interface row
  int col = 0;

  friend auto operator<=>(const TileCoord&, const TileCoord&) = default;
};

struct Device {
  std::string name = "vc1902";
  int rows = 8;
  int cols = 50;
  int banks_per_tile = 8;
  int bank_bytes = 4096;
  int reserved_banks_per_core = 1;
  int plio_in = 78;
  int plio_out = 117;
  int interface_tiles = 39;
  double bw_io = 4.0;  // bytes/cycle for PLIO and stream switches
  double aie_clock_hz = 1.25e9;
  int plio_bits = 128;
  std::vector<int> interface_columns;  // columns carrying AIE-PL tiles

  int cores() const { return rows * cols; }
  int total_banks() const { return cores() * banks_per_tile; }
  int plio_total() const { return plio_in + plio_out; }
  bool contains(TileCoord t) const { return t.row >= 0 && t.row < rows && t.col >= 0 && t.col < cols; }
  int index(TileCoord t) const { return t.row * cols + t.col; }
  TileCoord coord(int index) const { return {index / cols, index % cols}; }

  // Throws ConfigError on an inconsistent description.
  void validate() const {
    auto need = [](bool ok, const char* what) {
      if (!ok) throw ConfigError(std::string("invalid device: ") + what);
    };
    need(rows > 0 && cols > 0, "rows and cols must be positive");
    need(banks_per_tile > 0 && bank_bytes > 0, "memory banks must be positive");
    need(reserved_banks_per_core >= 0 && reserved_banks_per_core < banks_per_tile,
         "reserved_banks_per_core must leave at least one bank");
    need(plio_in >= 0 && plio_out >= 0, "PLIO counts must be non-negative");
    need(interface_tiles >= 0 && interface_tiles <= cols, "interface_tiles must fit in the column count");
    need(bw_io > 0.0, "bw_io must be positive");
    need(aie_clock_hz > 0.0, "aie_clock_hz must be positive");
    need(static_cast<int>(interface_columns.size()) == interface_tiles,
         "interface_columns must list exactly interface_tiles entries");
    for (int c : interface_columns) need(c >= 0 && c < cols, "interface column out of range");
  }
};

inline std::vector<int> default_interface_columns(int count) {
  std::vector<int> cols(static_cast<std::size_t>(count));
  std::iota(cols.begin(), cols.end(), 0);
  return cols;
}

inline Device vc1902() {
  Device d;
  d.interface_columns = default_interface_columns(d.interface_tiles);
  return d;
}

inline void require_in_grid(const Device& d, TileCoord t) {
  if (!d.contains(t))
    throw DomainError("tile (" + std::to_string(t.row) + "," + std::to_string(t.col) + ") outside " +
                      std::to_string(d.rows) + "x" + std::to_string(d.cols) + " array");
}

// Memory modules a core reads and writes without DMA: its own, north, south,
// and one lateral neighbor (west on even rows, east on odd rows). Neighbors off
// the grid are dropped. Order: own, north, south, lateral.
inline std::vector<TileCoord> accessible_modules(const Device& d, TileCoord core) {
  require_in_grid(d, core);
  std::vector<TileCoord> out;
  out.reserve(4);
  out.push_back(core);
  const TileCoord lateral{core.row, core.row % 2 == 0 ? core.col - 1 : core.col + 1};
  for (TileCoord n : {TileCoord{core.row + 1, core.col}, TileCoord{core.row - 1, core.col}, lateral})
    if (d.contains(n)) out.push_back(n);
  return out;
}

inline bool module_accessible(const Device& d, TileCoord core, TileCoord module) {
  const auto acc = accessible_modules(d, core);
  return std::find(acc.begin(), acc.end(), module) != acc.end();
}

// Modules reachable by both cores, in `a`'s preference order.
inline std::vector<TileCoord> shared_modules(const Device& d, TileCoord a, TileCoord b) {
  const auto acc_b = accessible_modules(d, b);
  std::vector<TileCoord> out;
  for (TileCoord m : accessible_modules(d, a))
    if (std::find(acc_b.begin(), acc_b.end(), m) != acc_b.end()) out.push_back(m);
  return out;
}

inline bool can_share(const Device& d, TileCoord a, TileCoord b) { return !shared_modules(d, a, b).empty(); }

// ---------------------------------------------------------------------------
// JSON

inline void to_json(nlohmann::json& j, const TileCoord& t) { j = nlohmann::json::array({t.row, t.col}); }
inline void from_json(const nlohmann::json& j, TileCoord& t) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("tile coordinate must be [row, col]");
  t.row = j[0].get<int>();
  t.col = j[1].get<int>();
}

inline nlohmann::json device_to_json(const Device& d) {
  return {{"name", d.name},
          {"rows", d.rows},
          {"cols", d.cols},
          {"banks_per_tile", d.banks_per_tile},
          {"bank_bytes", d.bank_bytes},
          {"reserved_banks_per_core", d.reserved_banks_per_core},
          {"plio_in", d.plio_in},
          {"plio_out", d.plio_out},
          {"interface_tiles", d.interface_tiles},
          {"bw_io", d.bw_io},
          {"aie_clock_hz", d.aie_clock_hz},
          {"plio_bits", d.plio_bits},
          {"interface_columns", d.interface_columns}};
}

// Every field is required except `name` and `interface_columns` (defaults to
// the first `interface_tiles` columns).
inline Device device_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.empty()) throw ConfigError("device description is empty");
  Device d;
  try {
    d.name = j.value("name", std::string("custom"));
    d.rows = j.at("rows").get<int>();
    d.cols = j.at("cols").get<int>();
    d.banks_per_tile = j.at("banks_per_tile").get<int>();
    d.bank_bytes = j.at("bank_bytes").get<int>();
    d.reserved_banks_per_core = j.at("reserved_banks_per_core").get<int>();
    d.plio_in = j.at("plio_in").get<int>();
    d.plio_out = j.at("plio_out").get<int>();
    d.interface_tiles = j.at("interface_tiles").get<int>();
    d.bw_io = j.at("bw_io").get<double>();
    d.aie_clock_hz = j.at("aie_clock_hz").get<double>();
    d.plio_bits = j.at("plio_bits").get<int>();
    if (j.contains("interface_columns"))
      d.interface_columns = j.at("interface_columns").get<std::vector<int>>();
    else
      d.interface_columns = default_interface_columns(d.interface_tiles);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("device description: ") + e.what());
  }
  d.validate();
  return d;
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

// Accepts a file path or the preset name "vc1902".
inline Device load_device(const std::string& path_or_preset) {
  if (path_or_preset == "vc1902") return vc1902();
  return device_from_json(read_json_file(path_or_preset));
}

}  // namespace aiemap
