#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "acdf/grid.hpp"

namespace acdf {

// Binary raster container shared by every command:
//   "ACDF" | u16 LE version | u32 LE header length | UTF-8 JSON header
//   | f32 LE payload ordered [t][y][x][c]
// The JSON header holds the grid spec, ISO-8601 UTC times, channel names and
// dtype "f32". Static rasters (terrain) carry an empty time list and a
// single [y][x][c] slice.
inline constexpr std::uint16_t kGridFormatVersion = 1;

struct Raster {
  GridSpec spec;
  std::vector<TimePoint> times;
  std::vector<std::string> channels;
  std::vector<float> payload;
};

std::string encode_raster(const Raster& raster);
Raster decode_raster(const std::string& bytes);

std::string encode_wind_field(const WindField& field);
WindField decode_wind_field(const std::string& bytes);
std::string encode_terrain(const TerrainGrid& terrain);
TerrainGrid decode_terrain(const std::string& bytes);

void write_wind_field(const std::filesystem::path& path, const WindField& field);
WindField read_wind_field(const std::filesystem::path& path);
void write_terrain(const std::filesystem::path& path, const TerrainGrid& terrain);
TerrainGrid read_terrain(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace acdf
