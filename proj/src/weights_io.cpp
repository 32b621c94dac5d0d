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

#include "cimcall/weights_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <type_traits>

namespace cimcall::dnn {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "cimcall-weights";
constexpr int kVersion = 1;

}  // namespace

json geometry_to_json(const LayerSpec& layer) {
    json j;
    j["kind"] = to_string(layer.kind());
    std::visit(
        [&](const auto& g) {
            using G = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<G, Conv1DGeom>) {
                j["in_channels"] = g.in_channels;
                j["out_channels"] = g.out_channels;
                j["kernel_width"] = g.kernel_width;
                j["stride"] = g.stride;
                j["padding"] = g.padding;
                j["has_bias"] = g.has_bias;
            } else if constexpr (std::is_same_v<G, LstmGeom>) {
                j["input_size"] = g.input_size;
                j["hidden_size"] = g.hidden_size;
                j["reverse"] = g.reverse;
            } else if constexpr (std::is_same_v<G, FcGeom>) {
                j["in_features"] = g.in_features;
                j["out_features"] = g.out_features;
            } else if constexpr (std::is_same_v<G, ClampGeom>) {
                j["lo"] = g.lo;
                j["hi"] = g.hi;
            } else if constexpr (std::is_same_v<G, BatchNormGeom>) {
                j["channels"] = g.channels;
            }
        },
        layer.geometry);
    return j;
}

LayerSpec layer_from_json(const json& j) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "conv1d") {
        return make_conv(j.at("in_channels"), j.at("out_channels"), j.at("kernel_width"), j.at("stride"),
                         j.value("padding", 0), j.value("has_bias", false));
    }
    if (kind == "lstm") return make_lstm(j.at("input_size"), j.at("hidden_size"), j.value("reverse", false));
    if (kind == "fc") return make_fc(j.at("in_features"), j.at("out_features"));
    if (kind == "swish") return make_swish();
    if (kind == "clamp") return make_clamp(j.at("lo"), j.at("hi"));
    if (kind == "batchnorm") return make_batchnorm(j.at("channels"));
    throw ConfigError("unknown layer kind '" + kind + "'");
}

void write_f32le(const std::filesystem::path& path, std::span<const float> values) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    for (float v : values) {
        const std::uint32_t u = to_le32(std::bit_cast<std::uint32_t>(v));
        out.write(reinterpret_cast<const char*>(&u), sizeof u);
    }
    if (!out) throw InputError("write failed: " + path.string());
}

std::vector<float> read_f32le(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw InputError("cannot read " + path.string());
    const auto bytes = static_cast<std::size_t>(in.tellg());
    if (bytes % 4 != 0) throw InputError(path.string() + ": size is not a multiple of 4 bytes");
    in.seekg(0);
    std::vector<float> values(bytes / 4);
    for (auto& v : values) {
        std::uint32_t u = 0;
        in.read(reinterpret_cast<char*>(&u), sizeof u);
        v = std::bit_cast<float>(to_le32(u));
    }
    return values;
}

void save_network(const NetworkGraph& graph, const std::filesystem::path& manifest) {
    graph.validate();
    auto blob_path = manifest;
    blob_path.replace_extension(".bin");
    std::vector<float> blob;
    json layers = json::array();
    for (const auto& l : graph.layers) {
        json j = geometry_to_json(l);
        j["weights"] = {blob.size(), l.weights.size()};
        blob.insert(blob.end(), l.weights.begin(), l.weights.end());
        j["bias"] = {blob.size(), l.bias.size()};
        blob.insert(blob.end(), l.bias.begin(), l.bias.end());
        layers.push_back(std::move(j));
    }
    json m = {{"format", kFormat},
              {"version", kVersion},
              {"name", graph.name},
              {"input_channels", graph.input_channels},
              {"weights_file", blob_path.filename().string()},
              {"layers", layers}};
    std::ofstream out(manifest);
    if (!out) throw InputError("cannot write " + manifest.string());
    out << m.dump(2) << '\n';
    write_f32le(blob_path, blob);
}

NetworkGraph load_network(const std::filesystem::path& manifest) {
    std::ifstream in(manifest);
    if (!in) throw InputError("cannot read weight manifest " + manifest.string());
    json m;
    try {
        in >> m;
    } catch (const json::exception& e) {
        throw InputError(manifest.string() + ": " + e.what());
    }
    if (m.value("format", "") != kFormat || m.value("version", 0) != kVersion) {
        throw InputError(manifest.string() + ": not a cimcall weight manifest (v1)");
    }
    const auto blob = read_f32le(manifest.parent_path() / m.at("weights_file").get<std::string>());
    NetworkGraph g;
    g.name = m.value("name", "loaded");
    g.input_channels = m.value("input_channels", 1);
    for (const auto& jl : m.at("layers")) {
        LayerSpec l = layer_from_json(jl);
        auto fill = [&](const char* key, std::vector<float>& dst) {
            const auto off = jl.at(key).at(0).get<std::size_t>();
            const auto n = jl.at(key).at(1).get<std::size_t>();
            if (n != dst.size() || off + n > blob.size()) {
                throw InputError(manifest.string() + ": bad " + key + " extent for " + jl.at("kind").get<std::string>());
            }
            std::copy_n(blob.begin() + static_cast<std::ptrdiff_t>(off), n, dst.begin());
        };
        fill("weights", l.weights);
        fill("bias", l.bias);
        g.layers.push_back(std::move(l));
    }
    g.validate();
    return g;
}

}  // namespace cimcall::dnn
