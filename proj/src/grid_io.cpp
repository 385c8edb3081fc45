#include "acdf/grid_io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "acdf/errors.hpp"
#include "json.hpp"

namespace acdf {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'A', 'C', 'D', 'F'};

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::string& in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

json spec_to_json(const GridSpec& s) {
  return json{{"lon_min", s.lon_min}, {"lon_max", s.lon_max}, {"lat_min", s.lat_min},
              {"lat_max", s.lat_max}, {"cell_size", s.cell_size}, {"nx", s.nx}, {"ny", s.ny}};
}

GridSpec spec_from_json(const json& j) {
  GridSpec s;
  s.lon_min = j.at("lon_min").get<double>();
  s.lon_max = j.at("lon_max").get<double>();
  s.lat_min = j.at("lat_min").get<double>();
  s.lat_max = j.at("lat_max").get<double>();
  s.cell_size = j.at("cell_size").get<double>();
  s.nx = j.at("nx").get<int>();
  s.ny = j.at("ny").get<int>();
  s.validate();
  return s;
}

}  // namespace

std::string encode_raster(const Raster& r) {
  json header;
  header["grid"] = spec_to_json(r.spec);
  json times = json::array();
  for (TimePoint t : r.times) times.push_back(format_utc(t));
  header["times"] = times;
  header["channels"] = r.channels;
  header["dtype"] = "f32";
  const std::string text = header.dump();

  const std::size_t slices = r.times.empty() ? 1 : r.times.size();
  if (r.payload.size() != slices * r.spec.node_count() * r.channels.size()) {
    throw ShapeError("raster payload does not match its header");
  }
  std::string out(kMagic, 4);
  put_u16(out, kGridFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  out.reserve(out.size() + r.payload.size() * 4);
  for (float f : r.payload) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
  }
  return out;
}

Raster decode_raster(const std::string& bytes) {
  if (bytes.size() < 10 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("not an ACDF grid file (bad magic)");
  }
  const std::uint16_t version = static_cast<std::uint16_t>(
      static_cast<unsigned char>(bytes[4]) | (static_cast<unsigned char>(bytes[5]) << 8));
  if (version != kGridFormatVersion) {
    throw FormatError("unsupported ACDF grid format version " + std::to_string(version));
  }
  const std::uint32_t header_len = get_u32(bytes, 6);
  if (bytes.size() < 10 + static_cast<std::size_t>(header_len)) throw FormatError("truncated grid header");
  Raster r;
  try {
    const json header = json::parse(bytes.substr(10, header_len));
    if (header.at("dtype").get<std::string>() != "f32") throw FormatError("unsupported dtype");
    r.spec = spec_from_json(header.at("grid"));
    for (const auto& t : header.at("times")) r.times.push_back(parse_utc(t.get<std::string>()));
    r.channels = header.at("channels").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed grid header: ") + e.what());
  }
  const std::size_t slices = r.times.empty() ? 1 : r.times.size();
  const std::size_t count = slices * r.spec.node_count() * r.channels.size();
  const std::size_t offset = 10 + header_len;
  if (bytes.size() != offset + count * 4) {
    throw FormatError("grid payload size " + std::to_string(bytes.size() - offset) +
                      " bytes, expected " + std::to_string(count * 4));
  }
  r.payload.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint32_t bits = get_u32(bytes, offset + i * 4);
    std::memcpy(&r.payload[i], &bits, 4);
  }
  return r;
}

std::string encode_wind_field(const WindField& field) {
  Raster r;
  r.spec = field.spec;
  r.times = field.times;
  r.channels = {"u", "v"};
  r.payload.assign(field.data.begin(), field.data.end());
  return encode_raster(r);
}

WindField decode_wind_field(const std::string& bytes) {
  Raster r = decode_raster(bytes);
  if (r.channels != std::vector<std::string>{"u", "v"} || r.times.empty()) {
    throw FormatError("grid file does not hold a (u, v) wind field");
  }
  WindField f(r.spec, r.times);
  f.data.assign(r.payload.begin(), r.payload.end());
  return f;
}

std::string encode_terrain(const TerrainGrid& terrain) {
  Raster r;
  r.spec = terrain.spec;
  r.channels = {"elevation", "roughness_class"};
  r.payload.reserve(terrain.spec.node_count() * 2);
  for (std::size_t i = 0; i < terrain.spec.node_count(); ++i) {
    r.payload.push_back(static_cast<float>(terrain.elevation[i]));
    r.payload.push_back(static_cast<float>(terrain.roughness_class[i]));
  }
  return encode_raster(r);
}

TerrainGrid decode_terrain(const std::string& bytes) {
  Raster r = decode_raster(bytes);
  if (r.channels != std::vector<std::string>{"elevation", "roughness_class"} || !r.times.empty()) {
    throw FormatError("grid file does not hold a terrain raster");
  }
  TerrainGrid t(r.spec);
  for (std::size_t i = 0; i < r.spec.node_count(); ++i) {
    t.elevation[i] = r.payload[2 * i];
    t.roughness_class[i] = static_cast<std::uint8_t>(r.payload[2 * i + 1]);
  }
  t.validate();
  return t;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

void write_wind_field(const std::filesystem::path& path, const WindField& field) {
  write_file(path, encode_wind_field(field));
}

WindField read_wind_field(const std::filesystem::path& path) {
  return decode_wind_field(read_file(path));
}

void write_terrain(const std::filesystem::path& path, const TerrainGrid& terrain) {
  write_file(path, encode_terrain(terrain));
}

TerrainGrid read_terrain(const std::filesystem::path& path) { return decode_terrain(read_file(path)); }

}  // namespace acdf
