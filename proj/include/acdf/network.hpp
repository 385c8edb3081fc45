#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace acdf {

struct Tower {
  std::string id;
  double lat = 0.0;
  double lon = 0.0;
  std::string line_id;
  double span_azimuth = 0.0;  // degrees clockwise from north, [0, 360)
};

struct Line {
  std::string id;
  std::vector<std::size_t> towers;  // indices into Network::towers, in order
};

/// Towers grouped into lines. Each line is a series system of its towers.
struct Network {
  std::vector<Tower> towers;
  std::vector<Line> lines;

  /// Unique ids, azimuths in [0, 360), at least two towers per line and
  /// consistent tower/line back-references.
  void validate() const;
};

/// Planar bearing from point a to point b, degrees clockwise from north.
double bearing_deg(double lat_a, double lon_a, double lat_b, double lon_b);

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
};

/// Appends a line through the given points to the network. Span azimuth of
/// tower k points at tower k+1; the last tower repeats the previous span.
void add_line(Network& network, const std::string& line_id, const std::vector<LatLon>& points);

nlohmann::json network_to_json(const Network& network);
Network network_from_json(const nlohmann::json& j);

}  // namespace acdf
