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

#include "rmfs/instance.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <set>
#include <utility>

#include "rmfs/error.hpp"
#include "rmfs/random.hpp"

namespace rmfs {

std::string_view to_string(NodeType type) {
  switch (type) {
    case NodeType::kHome: return "home";
    case NodeType::kRack: return "rack";
    case NodeType::kStation: return "station";
    case NodeType::kStorage: return "storage";
  }
  return "unknown";
}

Instance::Instance(std::vector<Point> positions, Counts counts,
                   std::vector<NodeId> station_of_rack, Bounds bounds,
                   double seconds_per_meter)
    : positions_(std::move(positions)),
      counts_(counts),
      station_of_rack_(std::move(station_of_rack)),
      bounds_(bounds),
      seconds_per_meter_(seconds_per_meter) {
  const auto issues = check_instance(*this);
  if (!issues.empty()) throw Error(Errc::kInvalidConfig, issues.front());
}

NodeType Instance::initial_type(NodeId node) const {
  if (node < first_rack()) return NodeType::kHome;
  if (node < first_station()) return NodeType::kRack;
  if (node < first_storage()) return NodeType::kStation;
  return NodeType::kStorage;
}

std::vector<std::string> check_instance(const Instance& inst) {
  std::vector<std::string> issues;
  const Counts& c = inst.counts();
  if (c.robots < 1) issues.push_back("at least one robot is required");
  if (c.racks < 0 || c.storages < 0 || c.stations < 0) {
    issues.push_back("negative node count");
  }
  if (c.racks > 0 && c.stations < 1) {
    issues.push_back("racks need at least one picking station");
  }
  if (inst.num_nodes() != c.total()) {
    issues.push_back("position count " + std::to_string(inst.num_nodes()) +
                     " does not match node counts " +
                     std::to_string(c.total()));
    return issues;
  }
  if (!(inst.seconds_per_meter() > 0.0) ||
      !std::isfinite(inst.seconds_per_meter())) {
    issues.push_back("seconds_per_meter must be positive and finite");
  }
  if (static_cast<int>(inst.station_of_rack().size()) != c.racks) {
    issues.push_back("station_of_rack must have one entry per rack");
  } else {
    for (NodeId s : inst.station_of_rack()) {
      if (s < inst.first_station() || s >= inst.first_storage()) {
        issues.push_back("rack mapped to non-station node " +
                         std::to_string(s));
        break;
      }
    }
  }
  for (NodeId v = 0; v < inst.num_nodes(); ++v) {
    const Point p = inst.position(v);
    if (!std::isfinite(p.x) || !std::isfinite(p.y) ||
        !inst.bounds().contains(p)) {
      issues.push_back("node " + std::to_string(v) + " lies outside the map");
      break;
    }
  }
  std::set<std::pair<double, double>> cells;
  for (NodeId v = inst.first_rack(); v < inst.first_station(); ++v) {
    cells.emplace(inst.position(v).x, inst.position(v).y);
  }
  for (NodeId v = inst.first_storage(); v < inst.num_nodes(); ++v) {
    cells.emplace(inst.position(v).x, inst.position(v).y);
  }
  if (static_cast<int>(cells.size()) != c.racks + c.storages) {
    issues.push_back("rack and storage locations must be distinct cells");
  }
  return issues;
}

void MapConfig::validate() const {
  if (aisles < 0 || cross_aisles < 0) {
    throw Error(Errc::kInvalidConfig, "map " + id + ": negative aisle count");
  }
  if (max_robots < 1 || max_rack_plus_storage < 1 || max_stations < 1) {
    throw Error(Errc::kInvalidConfig, "map " + id + ": counts must be >= 1");
  }
  if (max_rack_plus_storage > kSlotsPerZone * zones()) {
    throw Error(Errc::kInvalidConfig,
                "map " + id + ": " + std::to_string(max_rack_plus_storage) +
                    " racks+storages exceed " +
                    std::to_string(kSlotsPerZone * zones()) + " zone slots");
  }
}

void ScaleConfig::validate() const {
  for (const IntRange* r : {&robots, &racks, &storages, &stations}) {
    if (r->lo < 1 || r->hi < r->lo) {
      throw Error(Errc::kInvalidConfig,
                  "scale " + id + ": ranges need 1 <= lo <= hi");
    }
  }
  if (batch_size < 1) {
    throw Error(Errc::kInvalidConfig, "scale " + id + ": batch_size < 1");
  }
}

namespace {

constexpr int kZoneWidth = 5;
constexpr int kZoneHeight = 2;
constexpr double kFixedGridSize = 20.0;

}  // namespace

MapLayout build_map(const MapConfig& cfg) {
  cfg.validate();
  const int cols = cfg.aisles + 1;
  const int rows = cfg.cross_aisles + 1;
  // x: margin, aisle, then [zone, aisle] * cols, margin.
  const int max_x = (kZoneWidth + 1) * cols + 2;
  const int max_y = (kZoneHeight + 1) * rows + 2;

  MapLayout layout;
  layout.bounds = {0.0, 0.0, static_cast<double>(max_x),
                   static_cast<double>(max_y)};
  layout.zones = cols * rows;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int x0 = 2 + (kZoneWidth + 1) * c;
      const int y0 = 2 + (kZoneHeight + 1) * r;
      for (int j = 0; j < kZoneHeight; ++j) {
        for (int i = 0; i < kZoneWidth; ++i) {
          layout.slots.push_back({double(x0 + i), double(y0 + j)});
        }
      }
    }
  }
  for (int x = 0; x <= max_x; ++x) layout.home_sites.push_back({double(x), 0});
  for (int x = 0; x <= max_x; ++x) {
    layout.home_sites.push_back({double(x), double(max_y)});
  }
  // Overflow parking on the outer aisles, clear of the station columns.
  for (int x = 1; x < max_x; ++x) layout.home_sites.push_back({double(x), 1});
  for (int x = 1; x < max_x; ++x) {
    layout.home_sites.push_back({double(x), double(max_y - 1)});
  }
  for (int y = 1; y < max_y; ++y) layout.station_sites.push_back({0, double(y)});
  for (int y = 1; y < max_y; ++y) {
    layout.station_sites.push_back({double(max_x), double(y)});
  }
  return layout;
}

MapLayout fixed_grid_layout() {
  const int n = static_cast<int>(kFixedGridSize);
  MapLayout layout;
  layout.bounds = {0.0, 0.0, kFixedGridSize, kFixedGridSize};
  layout.zones = 0;
  for (int y = 1; y < n; ++y) {
    for (int x = 1; x < n; ++x) layout.slots.push_back({double(x), double(y)});
  }
  for (int x = 0; x <= n; ++x) layout.home_sites.push_back({double(x), 0});
  for (int y = 1; y <= n; ++y) layout.station_sites.push_back({0, double(y)});
  for (int y = 1; y <= n; ++y) {
    layout.station_sites.push_back({double(n), double(y)});
  }
  return layout;
}

MapLayout layout_for(const ScaleConfig& scale) {
  if (scale.map_id.empty()) return fixed_grid_layout();
  return build_map(map_preset(scale.map_id));
}

namespace {

// One site per evenly sized bucket of the candidate list, jittered inside
// its bucket.
std::vector<Point> spread_pick(const std::vector<Point>& sites, int n,
                               Rng& rng) {
  std::vector<Point> out;
  out.reserve(n);
  const auto total = static_cast<std::int64_t>(sites.size());
  for (int b = 0; b < n; ++b) {
    const std::int64_t lo = b * total / n;
    const std::int64_t hi = (b + 1) * total / n - 1;
    out.push_back(sites[rng.uniform_int(lo, hi)]);
  }
  return out;
}

int draw(const IntRange& r, Rng& rng) {
  return static_cast<int>(rng.uniform_int(r.lo, r.hi));
}

}  // namespace

Instance sample_instance(const ScaleConfig& scale, const MapLayout& map,
                         std::uint64_t seed) {
  scale.validate();
  Rng rng(seed);
  Counts counts;
  counts.robots = draw(scale.robots, rng);
  counts.racks = draw(scale.racks, rng);
  counts.storages = draw(scale.storages, rng);
  counts.stations = draw(scale.stations, rng);

  const auto capacity = [&](int need, std::size_t have, const char* what) {
    if (need > static_cast<int>(have)) {
      throw Error(Errc::kCapacityExceeded,
                  std::to_string(need) + " " + what + " do not fit in " +
                      std::to_string(have) + " sites");
    }
  };
  capacity(counts.robots, map.home_sites.size(), "homes");
  capacity(counts.stations, map.station_sites.size(), "stations");
  capacity(counts.racks + counts.storages, map.slots.size(),
           "racks+storages");

  const std::vector<Point> homes =
      spread_pick(map.home_sites, counts.robots, rng);
  const std::vector<Point> stations =
      spread_pick(map.station_sites, counts.stations, rng);

  // Partial Fisher-Yates over slot indices.
  std::vector<int> order(map.slots.size());
  std::iota(order.begin(), order.end(), 0);
  const int cells = counts.racks + counts.storages;
  for (int i = 0; i < cells; ++i) {
    const auto j = rng.uniform_int(i, static_cast<std::int64_t>(order.size()) - 1);
    std::swap(order[i], order[j]);
  }

  std::vector<Point> positions;
  positions.reserve(counts.total());
  positions.insert(positions.end(), homes.begin(), homes.end());
  for (int i = 0; i < counts.racks; ++i) positions.push_back(map.slots[order[i]]);
  positions.insert(positions.end(), stations.begin(), stations.end());
  for (int i = counts.racks; i < cells; ++i) {
    positions.push_back(map.slots[order[i]]);
  }

  const NodeId first_station = counts.robots + counts.racks;
  std::vector<NodeId> station_of_rack(counts.racks);
  for (auto& s : station_of_rack) {
    s = first_station + static_cast<NodeId>(rng.uniform_int(0, counts.stations - 1));
  }

  Instance inst(std::move(positions), counts, std::move(station_of_rack),
                map.bounds, 1.0);
  inst.seed = seed;
  inst.preset = scale.id;
  return inst;
}

Instance generate_instance(const ScaleConfig& scale, std::uint64_t seed) {
  return sample_instance(scale, layout_for(scale), seed);
}

namespace {

struct FixedRow {
  int robots, racks, storages, batch;
};

// Fixed-scale families: robots, racks, storages, batch size.
constexpr std::array<FixedRow, 16> kFixed = {{
    {2, 4, 4, 512},    {2, 4, 8, 512},    {2, 6, 6, 512},    {2, 6, 12, 512},
    {2, 8, 8, 256},    {2, 8, 16, 256},   {2, 10, 10, 256},  {2, 10, 20, 256},
    {5, 10, 10, 128},  {5, 10, 20, 128},  {5, 15, 15, 128},  {5, 15, 30, 128},
    {5, 20, 20, 128},  {5, 20, 40, 128},  {10, 20, 20, 64},  {10, 20, 40, 64},
}};
constexpr int kFixedStations = 2;

struct MapRow {
  int aisles, cross, robots, rack_plus_storage, stations;
};

constexpr std::array<MapRow, 9> kMaps = {{
    {2, 2, 5, 90, 4},       {5, 2, 10, 180, 4},     {7, 2, 20, 240, 6},
    {7, 5, 30, 420, 8},     {7, 7, 40, 560, 8},     {7, 10, 50, 770, 12},
    {10, 10, 60, 1100, 16}, {15, 15, 200, 2400, 40}, {20, 20, 350, 4200, 40},
}};

struct RandomRow {
  int robots, racks, storages, stations;
};

// Upper bounds of the uniform U(1, n) ranges; U<k> lives on map M<k>.
constexpr std::array<RandomRow, 9> kRandom = {{
    {3, 15, 30, 4},      {5, 25, 50, 4},       {10, 50, 100, 6},
    {15, 75, 150, 8},    {20, 100, 200, 8},    {30, 150, 300, 12},
    {50, 250, 500, 16},  {100, 500, 1000, 40}, {200, 1000, 2000, 40},
}};
constexpr int kRandomBatch = 64;

std::optional<int> parse_index(std::string_view id, char family, int max) {
  if (id.size() < 2 || id[0] != family) return std::nullopt;
  int value = 0;
  for (char ch : id.substr(1)) {
    if (ch < '0' || ch > '9') return std::nullopt;
    value = value * 10 + (ch - '0');
    if (value > max) return std::nullopt;
  }
  if (value < 1 || (id.size() > 2 && id[1] == '0')) return std::nullopt;
  return value;
}

}  // namespace

Preset preset(std::string_view id) {
  if (auto f = parse_index(id, 'F', 16)) {
    const FixedRow& row = kFixed[*f - 1];
    ScaleConfig s;
    s.id = std::string(id);
    s.robots = {row.robots, row.robots};
    s.racks = {row.racks, row.racks};
    s.storages = {row.storages, row.storages};
    s.stations = {kFixedStations, kFixedStations};
    s.batch_size = row.batch;
    return s;
  }
  if (auto m = parse_index(id, 'M', 9)) {
    const MapRow& row = kMaps[*m - 1];
    return MapConfig{std::string(id), row.aisles, row.cross, row.robots,
                     row.rack_plus_storage, row.stations};
  }
  if (auto u = parse_index(id, 'U', 9)) {
    const RandomRow& row = kRandom[*u - 1];
    ScaleConfig s;
    s.id = std::string(id);
    s.robots = {1, row.robots};
    s.racks = {1, row.racks};
    s.storages = {1, row.storages};
    s.stations = {1, row.stations};
    s.batch_size = kRandomBatch;
    s.map_id = "M" + std::to_string(*u);
    return s;
  }
  throw Error(Errc::kUnknownPreset, "unknown preset '" + std::string(id) + "'");
}

ScaleConfig scale_preset(std::string_view id) {
  Preset p = preset(id);
  if (auto* s = std::get_if<ScaleConfig>(&p)) return *s;
  throw Error(Errc::kUnknownPreset, std::string(id) + " is a map preset");
}

MapConfig map_preset(std::string_view id) {
  Preset p = preset(id);
  if (auto* m = std::get_if<MapConfig>(&p)) return *m;
  throw Error(Errc::kUnknownPreset, std::string(id) + " is not a map preset");
}

std::vector<std::string> preset_ids() {
  std::vector<std::string> ids;
  for (int i = 1; i <= 16; ++i) ids.push_back("F" + std::to_string(i));
  for (int i = 1; i <= 9; ++i) ids.push_back("M" + std::to_string(i));
  for (int i = 1; i <= 9; ++i) ids.push_back("U" + std::to_string(i));
  return ids;
}

}  // namespace rmfs
