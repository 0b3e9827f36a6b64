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

#include "rmfs/instance_io.hpp"

#include <algorithm>
#include <fstream>
#include <string>

#include "rmfs/error.hpp"

namespace rmfs {

namespace fs = std::filesystem;
using nlohmann::json;

json instance_to_json(const Instance& inst) {
  json nodes = json::array();
  for (NodeId v = 0; v < inst.num_nodes(); ++v) {
    const Point p = inst.position(v);
    nodes.push_back({{"id", v},
                     {"x", p.x},
                     {"y", p.y},
                     {"type", static_cast<int>(inst.initial_type(v))}});
  }
  json f = json::object();
  for (int i = 0; i < inst.counts().racks; ++i) {
    const NodeId rack = inst.first_rack() + i;
    f[std::to_string(rack)] = inst.station_of(rack);
  }
  const Counts& c = inst.counts();
  const Bounds& b = inst.bounds();
  return {{"nodes", nodes},
          {"station_of_rack", f},
          {"nu_r", inst.seconds_per_meter()},
          {"counts",
           {{"robots", c.robots},
            {"racks", c.racks},
            {"stations", c.stations},
            {"storages", c.storages}}},
          {"bounds", {b.min_x, b.min_y, b.max_x, b.max_y}},
          {"seed", inst.seed},
          {"preset", inst.preset}};
}

Instance instance_from_json(const json& doc) {
  try {
    Counts c;
    const json& jc = doc.at("counts");
    c.robots = jc.at("robots").get<int>();
    c.racks = jc.at("racks").get<int>();
    c.stations = jc.at("stations").get<int>();
    c.storages = jc.at("storages").get<int>();

    const json& nodes = doc.at("nodes");
    if (!nodes.is_array() || static_cast<int>(nodes.size()) != c.total()) {
      throw Error(Errc::kParse, "node list does not match counts");
    }
    std::vector<Point> positions(nodes.size());
    std::vector<bool> seen(nodes.size(), false);
    for (const json& n : nodes) {
      const int id = n.at("id").get<int>();
      if (id < 0 || id >= c.total() || seen[id]) {
        throw Error(Errc::kParse, "bad or duplicate node id " +
                                      std::to_string(id));
      }
      seen[id] = true;
      positions[id] = {n.at("x").get<double>(), n.at("y").get<double>()};
      if (n.contains("type")) {
        const int declared = n.at("type").get<int>();
        const int first_rack = c.robots;
        const int first_station = first_rack + c.racks;
        const int first_storage = first_station + c.stations;
        const int expected = id < first_rack      ? 0
                             : id < first_station ? 1
                             : id < first_storage ? 2
                                                  : 3;
        if (declared != expected) {
          throw Error(Errc::kParse, "node " + std::to_string(id) +
                                        " has type " +
                                        std::to_string(declared) +
                                        ", expected " +
                                        std::to_string(expected));
        }
      }
    }

    std::vector<NodeId> f(c.racks, -1);
    for (const auto& [key, value] : doc.at("station_of_rack").items()) {
      const int rack = std::stoi(key) - c.robots;
      if (rack < 0 || rack >= c.racks) {
        throw Error(Errc::kParse, "station_of_rack key " + key +
                                      " is not a rack");
      }
      f[rack] = value.get<NodeId>();
    }

    Bounds b;
    if (doc.contains("bounds")) {
      const json& jb = doc.at("bounds");
      b = {jb.at(0).get<double>(), jb.at(1).get<double>(),
           jb.at(2).get<double>(), jb.at(3).get<double>()};
    } else {
      b = {positions.front().x, positions.front().y, positions.front().x,
           positions.front().y};
      for (const Point& p : positions) {
        b.min_x = std::min(b.min_x, p.x);
        b.min_y = std::min(b.min_y, p.y);
        b.max_x = std::max(b.max_x, p.x);
        b.max_y = std::max(b.max_y, p.y);
      }
    }

    Instance inst(std::move(positions), c, std::move(f), b,
                  doc.value("nu_r", 1.0));
    inst.seed = doc.value("seed", std::uint64_t{0});
    inst.preset = doc.value("preset", std::string());
    return inst;
  } catch (const json::exception& e) {
    throw Error(Errc::kParse, e.what());
  } catch (const std::invalid_argument& e) {
    throw Error(Errc::kParse, e.what());
  }
}

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIo, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::kParse, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& doc) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(Errc::kIo, "cannot write " + path.string());
  out << doc.dump(1) << '\n';
}

}  // namespace

void write_instance(const fs::path& path, const Instance& inst) {
  write_json(path, instance_to_json(inst));
}

Instance read_instance(const fs::path& path) {
  try {
    return instance_from_json(read_json(path));
  } catch (const Error& e) {
    if (e.code() == Errc::kIo) throw;
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_manifest(const fs::path& path, const std::vector<fs::path>& files) {
  json list = json::array();
  for (const fs::path& f : files) list.push_back(f.generic_string());
  write_json(path, {{"instances", list}});
}

std::vector<fs::path> read_manifest(const fs::path& path) {
  const json doc = read_json(path);
  if (!doc.contains("instances") || !doc["instances"].is_array()) {
    throw Error(Errc::kParse, path.string() + ": not a manifest");
  }
  std::vector<fs::path> files;
  for (const json& entry : doc["instances"]) {
    fs::path p = entry.get<std::string>();
    if (p.is_relative()) p = path.parent_path() / p;
    files.push_back(p);
  }
  return files;
}

std::vector<Instance> load_instances(const fs::path& path) {
  const json doc = read_json(path);
  if (doc.contains("instances")) {
    std::vector<Instance> out;
    for (const fs::path& p : read_manifest(path)) {
      out.push_back(read_instance(p));
    }
    return out;
  }
  return {instance_from_json(doc)};
}

}  // namespace rmfs
