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

#ifndef RMFS_ERROR_HPP_
#define RMFS_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace rmfs {

enum class Errc {
  kInvalidConfig,
  kCapacityExceeded,
  kUnknownPreset,
  kIllegalEvent,
  kNoValidNode,
  kIneligibleRobot,
  kInvalidNode,
  kNotTerminal,
  kEmptyMask,
  kNonFiniteActivation,
  kNonFiniteLoss,
  kTooLarge,
  kParse,
  kIo,
};

std::string_view to_string(Errc code);

// All recoverable failures in the library are reported through this type.
// The code identifies the contract that was violated; the message carries
// the details needed to reproduce it.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace rmfs

#endif  // RMFS_ERROR_HPP_
