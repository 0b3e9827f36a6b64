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

#ifndef RMFS_INSTANCE_IO_HPP_
#define RMFS_INSTANCE_IO_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rmfs/instance.hpp"

namespace rmfs {

nlohmann::json instance_to_json(const Instance& inst);
Instance instance_from_json(const nlohmann::json& doc);

void write_instance(const std::filesystem::path& path, const Instance& inst);
Instance read_instance(const std::filesystem::path& path);

// A manifest is a JSON document {"instances": [path, ...]}; relative paths
// resolve against the manifest's directory.
void write_manifest(const std::filesystem::path& path,
                    const std::vector<std::filesystem::path>& files);
std::vector<std::filesystem::path> read_manifest(
    const std::filesystem::path& path);

// Accepts either a single instance file or a manifest.
std::vector<Instance> load_instances(const std::filesystem::path& path);

}  // namespace rmfs

#endif  // RMFS_INSTANCE_IO_HPP_
