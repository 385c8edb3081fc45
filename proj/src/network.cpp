#include "acdf/network.hpp"

#include <cmath>
#include <numbers>
#include <set>

#include "acdf/errors.hpp"
#include "acdf/grid.hpp"

namespace acdf {

using nlohmann::json;

double bearing_deg(double lat_a, double lon_a, double lat_b, double lon_b) {
  const double mid = 0.5 * (lat_a + lat_b) * std::numbers::pi / 180.0;
  const double east = (lon_b - lon_a) * std::cos(mid);
  const double north = lat_b - lat_a;
  double deg = std::atan2(east, north) * 180.0 / std::numbers::pi;
  if (deg < 0.0) deg += 360.0;
  if (deg >= 360.0) deg -= 360.0;
  return deg;
}

void add_line(Network& network, const std::string& line_id, const std::vector<LatLon>& points) {
  if (points.size() < 2) throw InvalidArgumentError("line " + line_id + " needs at least two towers");
  Line line;
  line.id = line_id;
  for (std::size_t k = 0; k < points.size(); ++k) {
    Tower t;
    char buf[32];
    std::snprintf(buf, sizeof buf, "-T%03zu", k + 1);
    t.id = line_id + buf;
    t.lat = points[k].lat;
    t.lon = points[k].lon;
    t.line_id = line_id;
    t.span_azimuth = k + 1 < points.size()
                         ? bearing_deg(points[k].lat, points[k].lon, points[k + 1].lat, points[k + 1].lon)
                         : network.towers.back().span_azimuth;
    line.towers.push_back(network.towers.size());
    network.towers.push_back(std::move(t));
  }
  network.lines.push_back(std::move(line));
}

void Network::validate() const {
  std::set<std::string> tower_ids, line_ids;
  for (const Tower& t : towers) {
    if (!tower_ids.insert(t.id).second) throw InvalidArgumentError("duplicate tower id " + t.id);
    if (!(t.span_azimuth >= 0.0 && t.span_azimuth < 360.0)) {
      throw InvalidArgumentError("tower " + t.id + " azimuth outside [0, 360)");
    }
    if (!std::isfinite(t.lat) || !std::isfinite(t.lon)) {
      throw InvalidArgumentError("tower " + t.id + " has non-finite coordinates");
    }
  }
  for (const Line& l : lines) {
    if (!line_ids.insert(l.id).second) throw InvalidArgumentError("duplicate line id " + l.id);
    if (l.towers.size() < 2) throw InvalidArgumentError("line " + l.id + " has fewer than two towers");
    for (std::size_t idx : l.towers) {
      if (idx >= towers.size() || towers[idx].line_id != l.id) {
        throw InvalidArgumentError("line " + l.id + " references a tower it does not own");
      }
    }
  }
}

json network_to_json(const Network& network) {
  json lines = json::array();
  for (const Line& l : network.lines) {
    json towers = json::array();
    for (std::size_t idx : l.towers) {
      const Tower& t = network.towers[idx];
      towers.push_back(json{{"id", t.id}, {"lat", t.lat}, {"lon", t.lon}, {"span_azimuth", t.span_azimuth}});
    }
    lines.push_back(json{{"id", l.id}, {"towers", towers}});
  }
  return json{{"lines", lines}};
}

Network network_from_json(const json& j) {
  Network n;
  try {
    for (const auto& jl : j.at("lines")) {
      Line line;
      line.id = jl.at("id").get<std::string>();
      for (const auto& jt : jl.at("towers")) {
        Tower t;
        t.id = jt.at("id").get<std::string>();
        t.lat = jt.at("lat").get<double>();
        t.lon = jt.at("lon").get<double>();
        t.span_azimuth = jt.at("span_azimuth").get<double>();
        t.line_id = line.id;
        line.towers.push_back(n.towers.size());
        n.towers.push_back(std::move(t));
      }
      n.lines.push_back(std::move(line));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed network JSON: ") + e.what());
  }
  n.validate();
  return n;
}

}  // namespace acdf
