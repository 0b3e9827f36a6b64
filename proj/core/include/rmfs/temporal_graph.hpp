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

#ifndef RMFS_TEMPORAL_GRAPH_HPP_
#define RMFS_TEMPORAL_GRAPH_HPP_

#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "rmfs/instance.hpp"

namespace rmfs {

struct NodeFeature {
  double x = 0.0;
  double y = 0.0;
  bool exists = true;
  NodeType type = NodeType::kHome;

  friend bool operator==(const NodeFeature&, const NodeFeature&) = default;
};

enum class EventKind : std::uint8_t {
  kRackAssigned,
  kStorageAssigned,
  kRackVacated,
};

std::string_view to_string(EventKind kind);
EventKind event_kind_from_string(std::string_view name);

struct GlobalEvent {
  EventKind kind = EventKind::kRackAssigned;
  NodeId node = 0;
  double clock = 0.0;

  friend bool operator==(const GlobalEvent&, const GlobalEvent&) = default;
};

class GlobalGraph {
 public:
  GlobalGraph() = default;
  explicit GlobalGraph(const Instance& inst);

  const std::vector<NodeFeature>& features() const { return features_; }
  const NodeFeature& feature(NodeId node) const { return features_[node]; }
  int num_nodes() const { return static_cast<int>(features_.size()); }
  double clock() const { return clock_; }
  std::int64_t event_counter() const { return events_; }

  // Racks still at their origin cell and not yet claimed by any robot.
  int racks_available() const { return racks_available_; }
  // Storage-typed cells (including vacated rack cells) that are unclaimed.
  int storages_available() const { return storages_available_; }

  // Throws Error(kIllegalEvent) when the node is not in the state the event
  // requires or the clock would run backwards.
  void apply(const GlobalEvent& ev);

  friend bool operator==(const GlobalGraph&, const GlobalGraph&) = default;

 private:
  std::vector<NodeFeature> features_;
  double clock_ = 0.0;
  std::int64_t events_ = 0;
  int racks_available_ = 0;
  int storages_available_ = 0;
};

GlobalGraph apply_global_event(GlobalGraph g, const GlobalEvent& ev);

// The fixed visiting order rack -> station -> storage -> rack. A home is
// always followed by a rack.
struct Cycle {
  static constexpr int kLength = 3;
  static NodeType next(NodeType type) {
    if (type == NodeType::kHome) return NodeType::kRack;
    return static_cast<NodeType>(static_cast<int>(type) % kLength + 1);
  }
};

// A visited node together with the role it played when selected. Roles are
// kept because a rack cell turns into a storage cell once vacated.
struct HistoryEntry {
  NodeId node = 0;
  NodeType role = NodeType::kHome;

  friend bool operator==(const HistoryEntry&, const HistoryEntry&) = default;
};

class RobotHistory {
 public:
  RobotHistory() = default;
  explicit RobotHistory(NodeId home) : entries_{{home, NodeType::kHome}} {}

  const std::vector<HistoryEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  const HistoryEntry& back() const { return entries_.back(); }
  NodeId home() const { return entries_.front().node; }
  bool closed() const {
    return entries_.size() > 1 && entries_.back().role == NodeType::kHome;
  }
  void push(NodeId node, NodeType role) { entries_.push_back({node, role}); }

  friend bool operator==(const RobotHistory&, const RobotHistory&) = default;

 private:
  std::vector<HistoryEntry> entries_;
};

using ArcMask = std::vector<std::uint8_t>;

// Fills `mask` (resized to the node count) and returns the number of valid
// nodes. A closed history has no valid successor.
int compute_arc_mask(const Instance& inst, const std::vector<NodeFeature>& f,
                     const RobotHistory& hist, ArcMask& mask);

// Same rule, but an all-false mask raises Error(kNoValidNode).
ArcMask valid_arc_mask(const Instance& inst, const std::vector<NodeFeature>& f,
                       const RobotHistory& hist);

// True when `next` is a legal successor of the history under `f`. Checks
// each constraint independently of compute_arc_mask.
bool arc_is_valid(const Instance& inst, const std::vector<NodeFeature>& f,
                  const RobotHistory& hist, NodeId next);

struct RobotGraphShot {
  RobotId robot = 0;
  std::vector<NodeFeature> features;
  double snapshot_time = 0.0;
  ArcMask mask;

  friend bool operator==(const RobotGraphShot&, const RobotGraphShot&) = default;
};

RobotGraphShot snapshot(const Instance& inst, const GlobalGraph& g,
                        RobotId robot, const RobotHistory& hist);

void write_event_log(std::ostream& out, const std::vector<GlobalEvent>& log);
std::vector<GlobalEvent> read_event_log(std::istream& in);

// Rebuilds the global graph from scratch by applying a logged prefix.
GlobalGraph replay_events(const Instance& inst,
                          const std::vector<GlobalEvent>& log);

}  // namespace rmfs

#endif  // RMFS_TEMPORAL_GRAPH_HPP_
