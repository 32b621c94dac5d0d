/*
 * Copyright 2026 The cimcall Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Weight files: a flat little-endian float32 blob plus a JSON manifest that
// lists the layer order, geometry and (offset, count) of every array.

#ifndef CIMCALL_WEIGHTS_IO_HPP
#define CIMCALL_WEIGHTS_IO_HPP

#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"

#include "cimcall/dnn.hpp"

namespace cimcall::dnn {

/// Layer geometry without weights, as stored in manifests and configs.
nlohmann::json geometry_to_json(const LayerSpec& layer);
LayerSpec layer_from_json(const nlohmann::json& j);

/// Writes `<manifest>` and the blob next to it (same stem, `.bin`).
void save_network(const NetworkGraph& graph, const std::filesystem::path& manifest);
NetworkGraph load_network(const std::filesystem::path& manifest);

void write_f32le(const std::filesystem::path& path, std::span<const float> values);
std::vector<float> read_f32le(const std::filesystem::path& path);

}  // namespace cimcall::dnn

#endif  // CIMCALL_WEIGHTS_IO_HPP
