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

#include "rmfs/error.hpp"

namespace rmfs {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::kInvalidConfig: return "InvalidConfig";
    case Errc::kCapacityExceeded: return "CapacityExceeded";
    case Errc::kUnknownPreset: return "UnknownPreset";
    case Errc::kIllegalEvent: return "IllegalEvent";
    case Errc::kNoValidNode: return "NoValidNode";
    case Errc::kIneligibleRobot: return "IneligibleRobot";
    case Errc::kInvalidNode: return "InvalidNode";
    case Errc::kNotTerminal: return "NotTerminal";
    case Errc::kEmptyMask: return "EmptyMask";
    case Errc::kNonFiniteActivation: return "NonFiniteActivation";
    case Errc::kNonFiniteLoss: return "NonFiniteLoss";
    case Errc::kTooLarge: return "TooLarge";
    case Errc::kParse: return "Parse";
    case Errc::kIo: return "Io";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what),
      code_(code) {}

}  // namespace rmfs
