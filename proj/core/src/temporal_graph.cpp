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

#include "rmfs/temporal_graph.hpp"

#include <istream>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "rmfs/error.hpp"

namespace rmfs {

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::kRackAssigned: return "RackAssigned";
    case EventKind::kStorageAssigned: return "StorageAssigned";
    case EventKind::kRackVacated: return "RackVacated";
  }
  return "Unknown";
}

EventKind event_kind_from_string(std::string_view name) {
  for (EventKind k : {EventKind::kRackAssigned, EventKind::kStorageAssigned,
                      EventKind::kRackVacated}) {
    if (to_string(k) == name) return k;
  }
  throw Error(Errc::kParse, "unknown event kind '" + std::string(name) + "'");
}

GlobalGraph::GlobalGraph(const Instance& inst) {
  features_.reserve(inst.num_nodes());
  for (NodeId v = 0; v < inst.num_nodes(); ++v) {
    const Point p = inst.position(v);
    features_.push_back({p.x, p.y, true, inst.initial_type(v)});
  }
  racks_available_ = inst.counts().racks;
  storages_available_ = inst.counts().storages;
}

void GlobalGraph::apply(const GlobalEvent& ev) {
  auto fail = [&](const std::string& why) {
    throw Error(Errc::kIllegalEvent, std::string(to_string(ev.kind)) + "(" +
                                         std::to_string(ev.node) + "): " + why);
  };
  if (ev.node < 0 || ev.node >= num_nodes()) fail("no such node");
  if (ev.clock < clock_) fail("clock would run backwards");
  NodeFeature& f = features_[ev.node];
  switch (ev.kind) {
    case EventKind::kRackAssigned:
      if (f.type != NodeType::kRack || !f.exists) fail("rack not available");
      f.exists = false;
      --racks_available_;
      break;
    case EventKind::kStorageAssigned:
      if (f.type != NodeType::kStorage || !f.exists) {
        fail("storage not available");
      }
      f.exists = false;
      --storages_available_;
      break;
    case EventKind::kRackVacated:
      if (f.type != NodeType::kRack || f.exists) fail("rack not assigned");
      f.type = NodeType::kStorage;
      f.exists = true;
      ++storages_available_;
      break;
  }
  clock_ = ev.clock;
  ++events_;
}

GlobalGraph apply_global_event(GlobalGraph g, const GlobalEvent& ev) {
  g.apply(ev);
  return g;
}

int compute_arc_mask(const Instance& inst, const std::vector<NodeFeature>& f,
                     const RobotHistory& hist, ArcMask& mask) {
  const int n = static_cast<int>(f.size());
  mask.assign(n, 0);
  if (hist.closed()) return 0;
  const HistoryEntry& last = hist.back();
  switch (last.role) {
    case NodeType::kRack: {
      const NodeId s = inst.station_of(last.node);
      mask[s] = 1;
      return 1;
    }
    case NodeType::kStation: {
      int count = 0;
      for (NodeId v = inst.first_rack(); v < n; ++v) {
        if (f[v].exists && f[v].type == NodeType::kStorage) {
          mask[v] = 1;
          ++count;
        }
      }
      return count;
    }
    case NodeType::kStorage:
    case NodeType::kHome: {
      int count = 0;
      for (NodeId v = inst.first_rack(); v < inst.first_station(); ++v) {
        if (f[v].exists && f[v].type == NodeType::kRack) {
          mask[v] = 1;
          ++count;
        }
      }
      if (count == 0) {
        mask[hist.home()] = 1;
        count = 1;
      }
      return count;
    }
  }
  return 0;
}

ArcMask valid_arc_mask(const Instance& inst, const std::vector<NodeFeature>& f,
                       const RobotHistory& hist) {
  ArcMask mask;
  if (compute_arc_mask(inst, f, hist, mask) == 0) {
    throw Error(Errc::kNoValidNode,
                "robot at node " + std::to_string(hist.back().node) +
                    " has no valid successor");
  }
  return mask;
}

bool arc_is_valid(const Instance& inst, const std::vector<NodeFeature>& f,
                  const RobotHistory& hist, NodeId next) {
  if (hist.size() == 0 || hist.closed()) return false;
  if (next < 0 || next >= static_cast<NodeId>(f.size())) return false;
  const HistoryEntry& last = hist.back();
  bool racks_left = false;
  for (NodeId v = inst.first_rack(); v < inst.first_station(); ++v) {
    racks_left = racks_left || (f[v].exists && f[v].type == NodeType::kRack);
  }
  const bool after_storage =
      last.role == NodeType::kStorage || last.role == NodeType::kHome;
  // Terminal constraint: the robot's own home once no rack is left.
  if (after_storage && !racks_left) return next == hist.home();
  // Node existence.
  if (!f[next].exists) return false;
  // Cycle constraint.
  if (f[next].type != Cycle::next(last.role)) return false;
  // A picked rack goes to its own station.
  if (last.role == NodeType::kRack && next != inst.station_of(last.node)) {
    return false;
  }
  return true;
}

RobotGraphShot snapshot(const Instance& inst, const GlobalGraph& g,
                        RobotId robot, const RobotHistory& hist) {
  RobotGraphShot shot;
  shot.robot = robot;
  shot.features = g.features();
  shot.snapshot_time = g.clock();
  compute_arc_mask(inst, shot.features, hist, shot.mask);
  return shot;
}

void write_event_log(std::ostream& out, const std::vector<GlobalEvent>& log) {
  for (const GlobalEvent& ev : log) {
    const nlohmann::json line = {{"clock", ev.clock},
                                 {"kind", to_string(ev.kind)},
                                 {"node", ev.node}};
    out << line.dump() << '\n';
  }
}

std::vector<GlobalEvent> read_event_log(std::istream& in) {
  std::vector<GlobalEvent> log;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto doc = nlohmann::json::parse(line);
      log.push_back({event_kind_from_string(doc.at("kind").get<std::string>()),
                     doc.at("node").get<NodeId>(),
                     doc.at("clock").get<double>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::kParse, std::string("event log: ") + e.what());
    }
  }
  return log;
}

GlobalGraph replay_events(const Instance& inst,
                          const std::vector<GlobalEvent>& log) {
  GlobalGraph g(inst);
  for (const GlobalEvent& ev : log) g.apply(ev);
  return g;
}

}  // namespace rmfs
