// Copyright 2026 The RMFS Planner Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef RMFS_INSTANCE_HPP_
#define RMFS_INSTANCE_HPP_

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace rmfs {

// Node ids are 0-based. Ids [0, robots) are homes (home of robot l is node
// l), followed by racks, picking stations and storage locations, in that
// order.
using NodeId = int;
using RobotId = int;

enum class NodeType : std::uint8_t {
  kHome = 0,
  kRack = 1,
  kStation = 2,
  kStorage = 3,
};

std::string_view to_string(NodeType type);

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline double manhattan(Point a, Point b) {
  const double dx = a.x > b.x ? a.x - b.x : b.x - a.x;
  const double dy = a.y > b.y ? a.y - b.y : b.y - a.y;
  return dx + dy;
}

struct Bounds {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;

  double extent_x() const { return max_x - min_x; }
  double extent_y() const { return max_y - min_y; }
  bool contains(Point p) const {
    return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y;
  }

  friend bool operator==(const Bounds&, const Bounds&) = default;
};

struct Counts {
  int robots = 0;
  int racks = 0;
  int stations = 0;
  int storages = 0;

  int total() const { return robots + racks + stations + storages; }

  friend bool operator==(const Counts&, const Counts&) = default;
};

// Immutable problem description. The constructor validates every structural
// invariant and throws Error(kInvalidConfig) on violation.
class Instance {
 public:
  Instance(std::vector<Point> positions, Counts counts,
           std::vector<NodeId> station_of_rack, Bounds bounds,
           double seconds_per_meter = 1.0);

  const Counts& counts() const { return counts_; }
  int num_nodes() const { return static_cast<int>(positions_.size()); }
  int num_robots() const { return counts_.robots; }
  const std::vector<Point>& positions() const { return positions_; }
  Point position(NodeId node) const { return positions_[node]; }
  const Bounds& bounds() const { return bounds_; }
  double seconds_per_meter() const { return seconds_per_meter_; }

  NodeId home_of(RobotId robot) const { return robot; }
  NodeId first_rack() const { return counts_.robots; }
  NodeId first_station() const { return counts_.robots + counts_.racks; }
  NodeId first_storage() const { return first_station() + counts_.stations; }
  NodeType initial_type(NodeId node) const;

  // f(rack): the picking station a rack must be delivered to.
  NodeId station_of(NodeId rack) const {
    return station_of_rack_[rack - first_rack()];
  }
  const std::vector<NodeId>& station_of_rack() const { return station_of_rack_; }

  // Travel time of one leg: Manhattan distance scaled by seconds per meter.
  double travel_time(NodeId from, NodeId to) const {
    return seconds_per_meter_ * manhattan(positions_[from], positions_[to]);
  }

  // Reproducibility metadata; not part of the problem itself.
  std::uint64_t seed = 0;
  std::string preset;

  friend bool operator==(const Instance& a, const Instance& b) {
    return a.positions_ == b.positions_ && a.counts_ == b.counts_ &&
           a.station_of_rack_ == b.station_of_rack_ && a.bounds_ == b.bounds_ &&
           a.seconds_per_meter_ == b.seconds_per_meter_;
  }

 private:
  std::vector<Point> positions_;
  Counts counts_;
  std::vector<NodeId> station_of_rack_;
  Bounds bounds_;
  double seconds_per_meter_;
};

// Returns the list of violated instance invariants; empty when valid.
std::vector<std::string> check_instance(const Instance& inst);

struct IntRange {
  int lo = 1;
  int hi = 1;

  friend bool operator==(const IntRange&, const IntRange&) = default;
};

// Random-scale warehouse map. The map is divided into zones by `aisles`
// vertical aisles and `cross_aisles` horizontal ones, giving
// (aisles + 1) x (cross_aisles + 1) storage zones of kSlotsPerZone slots.
struct MapConfig {
  std::string id;
  int aisles = 1;
  int cross_aisles = 1;
  int max_robots = 1;
  int max_rack_plus_storage = 1;
  int max_stations = 1;

  static constexpr int kSlotsPerZone = 10;

  int zones() const { return (aisles + 1) * (cross_aisles + 1); }
  void validate() const;

  friend bool operator==(const MapConfig&, const MapConfig&) = default;
};

// Instance scale distribution. A fixed-scale configuration has degenerate
// ranges. `map_id` names a MapConfig preset; empty selects the fixed
// 20 m x 20 m grid used by the fixed-scale families.
struct ScaleConfig {
  std::string id;
  IntRange robots;
  IntRange racks;
  IntRange storages;
  IntRange stations;
  int batch_size = 64;
  std::string map_id;

  void validate() const;

  friend bool operator==(const ScaleConfig&, const ScaleConfig&) = default;
};

// Candidate cells for each node role.
struct MapLayout {
  Bounds bounds;
  int zones = 0;
  std::vector<Point> slots;          // rack / storage cells
  std::vector<Point> home_sites;     // margin rows, then the outer aisles
  std::vector<Point> station_sites;  // in placement order along the margin

  friend bool operator==(const MapLayout&, const MapLayout&) = default;
};

// Zone geometry: 5 x 2 slot blocks separated by one-cell aisles, with a
// one-cell margin band around the map for homes (bottom, then top) and
// stations (left, then right).
MapLayout build_map(const MapConfig& cfg);

// 20 m x 20 m grid at 1 m resolution used for the fixed-scale presets.
MapLayout fixed_grid_layout();

// Layout for a scale config: its named map, or the fixed grid.
MapLayout layout_for(const ScaleConfig& scale);

Instance sample_instance(const ScaleConfig& scale, const MapLayout& map,
                         std::uint64_t seed);

// Convenience: preset scale + its layout + sampling.
Instance generate_instance(const ScaleConfig& scale, std::uint64_t seed);

using Preset = std::variant<MapConfig, ScaleConfig>;

// F1..F16 and U1..U9 return a ScaleConfig, M1..M9 a MapConfig.
Preset preset(std::string_view id);
ScaleConfig scale_preset(std::string_view id);
MapConfig map_preset(std::string_view id);
std::vector<std::string> preset_ids();

}  // namespace rmfs

#endif  // RMFS_INSTANCE_HPP_
