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

#include "cimcall/mapper.hpp"

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <set>

#include "cimcall/json_util.hpp"

namespace cimcall::mapper {

using nlohmann::json;
using dnn::LayerKind;

const char* to_string(NodeKind kind) {
    switch (kind) {
        case NodeKind::CiMTile: return "tile";
        case NodeKind::DPU: return "dpu";
        case NodeKind::LADecoder: return "decoder";
        case NodeKind::SignalBuffer: return "signal_buffer";
        case NodeKind::IO: return "io";
    }
    return "?";
}

NodeKind node_kind_from_string(const std::string& s) {
    for (auto k : {NodeKind::CiMTile, NodeKind::DPU, NodeKind::LADecoder, NodeKind::SignalBuffer, NodeKind::IO}) {
        if (s == to_string(k)) return k;
    }
    throw ConfigError("unknown node kind '" + s + "'");
}

const char* to_string(RouteKind kind) {
    switch (kind) {
        case RouteKind::Activation: return "activation";
        case RouteKind::Gates: return "gates";
        case RouteKind::Output: return "output";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Architecture

ArchDescription ArchDescription::default_arch() {
    using K = NodeKind;
    ArchDescription a;
    const K layout[4][4] = {
        {K::SignalBuffer, K::IO, K::CiMTile, K::CiMTile},
        {K::CiMTile, K::DPU, K::CiMTile, K::CiMTile},
        {K::CiMTile, K::CiMTile, K::DPU, K::CiMTile},
        {K::CiMTile, K::CiMTile, K::CiMTile, K::LADecoder},
    };
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 4; ++x) a.nodes.push_back({layout[y][x], x, y});
    }
    return a;
}

void ArchDescription::validate() const {
    if (width < 1 || height < 1) throw ConfigError("arch: grid must be at least 1x1");
    if (tile_rows < 1 || tile_cols < 1) throw ConfigError("arch: tile dimensions must be positive");
    std::set<std::pair<int, int>> seen;
    for (const auto& n : nodes) {
        if (n.x < 0 || n.x >= width || n.y < 0 || n.y >= height) {
            throw ConfigError("arch: node at (" + std::to_string(n.x) + ", " + std::to_string(n.y) + ") outside the grid");
        }
        if (!seen.insert({n.x, n.y}).second) {
            throw ConfigError("arch: two nodes at (" + std::to_string(n.x) + ", " + std::to_string(n.y) + ")");
        }
    }
    if (nodes_of(NodeKind::LADecoder).size() != 1) throw ConfigError("arch: exactly one decoder node required");
    if (nodes_of(NodeKind::SignalBuffer).size() != 1) throw ConfigError("arch: exactly one signal buffer node required");
    if (nodes_of(NodeKind::DPU).empty()) throw ConfigError("arch: at least one DPU required");
}

std::vector<int> ArchDescription::nodes_of(NodeKind kind) const {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(nodes.size()); ++i) {
        if (nodes[i].kind == kind) out.push_back(i);
    }
    return out;
}

int ArchDescription::tile_node(int tile) const {
    const auto t = nodes_of(NodeKind::CiMTile);
    if (tile < 0 || tile >= static_cast<int>(t.size())) throw MappingError("tile id " + std::to_string(tile) + " out of range");
    return t[tile];
}

int ArchDescription::dpu_node(int dpu) const {
    const auto d = nodes_of(NodeKind::DPU);
    if (dpu < 0 || dpu >= static_cast<int>(d.size())) throw MappingError("dpu id " + std::to_string(dpu) + " out of range");
    return d[dpu];
}

int ArchDescription::signal_buffer() const { return nodes_of(NodeKind::SignalBuffer).at(0); }
int ArchDescription::decoder() const { return nodes_of(NodeKind::LADecoder).at(0); }

int ArchDescription::node_at(int x, int y) const {
    for (int i = 0; i < static_cast<int>(nodes.size()); ++i) {
        if (nodes[i].x == x && nodes[i].y == y) return i;
    }
    return -1;
}

int ArchDescription::distance(int a, int b) const {
    return std::abs(nodes[a].x - nodes[b].x) + std::abs(nodes[a].y - nodes[b].y);
}

json ArchDescription::to_json() const {
    json n = json::array();
    for (const auto& node : nodes) n.push_back({{"kind", to_string(node.kind)}, {"x", node.x}, {"y", node.y}});
    return {{"width", width}, {"height", height}, {"tile_rows", tile_rows}, {"tile_cols", tile_cols}, {"nodes", n}};
}

ArchDescription ArchDescription::from_json(const json& j) {
    require_known_keys(j, {"width", "height", "tile_rows", "tile_cols", "nodes"}, "arch");
    ArchDescription a;
    a.width = j.value("width", a.width);
    a.height = j.value("height", a.height);
    a.tile_rows = j.value("tile_rows", a.tile_rows);
    a.tile_cols = j.value("tile_cols", a.tile_cols);
    for (const auto& n : j.at("nodes")) {
        require_known_keys(n, {"kind", "x", "y"}, "arch.nodes[]");
        a.nodes.push_back({node_kind_from_string(n.at("kind").get<std::string>()), n.at("x"), n.at("y")});
    }
    return a;
}

bool ArchDescription::operator==(const ArchDescription& o) const {
    if (width != o.width || height != o.height || tile_rows != o.tile_rows || tile_cols != o.tile_cols) return false;
    if (nodes.size() != o.nodes.size()) return false;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].kind != o.nodes[i].kind || nodes[i].x != o.nodes[i].x || nodes[i].y != o.nodes[i].y) return false;
    }
    return true;
}

std::vector<int> xy_path(const ArchDescription& arch, int a, int b) {
    std::vector<int> path{a};
    int x = arch.nodes[a].x, y = arch.nodes[a].y;
    const int tx = arch.nodes[b].x, ty = arch.nodes[b].y;
    auto step = [&](int nx, int ny) {
        const int n = arch.node_at(nx, ny);
        if (n < 0) {
            throw MappingError("no route from node " + std::to_string(a) + " to node " + std::to_string(b) +
                               ": no router at (" + std::to_string(nx) + ", " + std::to_string(ny) + ")");
        }
        path.push_back(n);
        x = nx;
        y = ny;
    };
    while (x != tx) step(x + (tx > x ? 1 : -1), y);
    while (y != ty) step(x, y + (ty > y ? 1 : -1));
    return path;
}

// ---------------------------------------------------------------------------
// Lowering

int LayerPlacement::row_blocks() const {
    std::set<int> r;
    for (const auto& p : pieces) r.insert(p.layer_row);
    return static_cast<int>(r.size());
}

bool MappingStrategy::is_digital(const dnn::NetworkGraph& graph, int layer) const {
    if (all_digital) return true;
    if (first_conv_digital) {
        const auto compute = graph.compute_layers();
        if (!compute.empty() && compute.front() == layer && graph.layers[layer].kind() == LayerKind::Conv1D) return true;
    }
    return std::find(digital_layers.begin(), digital_layers.end(), layer) != digital_layers.end();
}

int conv_replicas(const dnn::NetworkGraph& graph, int layer) {
    int r = 1;
    for (std::size_t j = static_cast<std::size_t>(layer) + 1; j < graph.layers.size(); ++j) {
        if (graph.layers[j].kind() == LayerKind::Conv1D) r *= graph.layers[j].as<dnn::Conv1DGeom>().stride;
    }
    return r;
}

int lstm_column_source(int physical_col, int hidden) {
    const int unit = physical_col / 4;
    const int gate = physical_col % 4;
    return gate * hidden + unit;
}

std::vector<float> lowered_matrix(const dnn::NetworkGraph& graph, int layer, int* rows_out, int* cols_out) {
    const auto& l = graph.layers.at(layer);
    int rows = 0, cols = 0;
    std::vector<float> m;
    switch (l.kind()) {
        case LayerKind::Conv1D: {
            const auto& g = l.as<dnn::Conv1DGeom>();
            const int R = conv_replicas(graph, layer);
            const int window = g.kernel_width + (R - 1) * g.stride;
            rows = window * g.in_channels;
            cols = R * g.out_channels;
            m.assign(static_cast<std::size_t>(rows) * cols, 0.0f);
            for (int r = 0; r < R; ++r) {
                for (int o = 0; o < g.out_channels; ++o) {
                    for (int c = 0; c < g.in_channels; ++c) {
                        for (int k = 0; k < g.kernel_width; ++k) {
                            const int row = (r * g.stride + k) * g.in_channels + c;
                            const int col = r * g.out_channels + o;
                            m[static_cast<std::size_t>(row) * cols + col] =
                                l.weights[(static_cast<std::size_t>(o) * g.in_channels + c) * g.kernel_width + k];
                        }
                    }
                }
            }
            break;
        }
        case LayerKind::LSTM: {
            const auto& g = l.as<dnn::LstmGeom>();
            rows = g.input_size + g.hidden_size;
            cols = 4 * g.hidden_size;
            m.resize(static_cast<std::size_t>(rows) * cols);
            for (int c = 0; c < cols; ++c) {
                const int src = lstm_column_source(c, g.hidden_size);
                for (int r = 0; r < rows; ++r) {
                    m[static_cast<std::size_t>(r) * cols + c] = l.weights[static_cast<std::size_t>(src) * rows + r];
                }
            }
            break;
        }
        case LayerKind::FullyConnected: {
            const auto& g = l.as<dnn::FcGeom>();
            rows = g.in_features;
            cols = g.out_features;
            m.resize(static_cast<std::size_t>(rows) * cols);
            for (int c = 0; c < cols; ++c) {
                for (int r = 0; r < rows; ++r) m[static_cast<std::size_t>(r) * cols + c] = l.weights[static_cast<std::size_t>(c) * rows + r];
            }
            break;
        }
        default: throw MappingError("layer " + std::to_string(layer) + " is not a compute layer");
    }
    if (rows_out) *rows_out = rows;
    if (cols_out) *cols_out = cols;
    return m;
}

int input_width(const dnn::NetworkGraph& graph, int layer) {
    const auto& l = graph.layers.at(layer);
    switch (l.kind()) {
        case LayerKind::Conv1D: {
            const auto& g = l.as<dnn::Conv1DGeom>();
            return conv_replicas(graph, layer) * g.stride * g.in_channels;
        }
        case LayerKind::LSTM: return l.as<dnn::LstmGeom>().input_size;
        case LayerKind::FullyConnected: return l.as<dnn::FcGeom>().in_features;
        default: return 0;
    }
}

int output_width(const dnn::NetworkGraph& graph, int layer) {
    const auto& l = graph.layers.at(layer);
    switch (l.kind()) {
        case LayerKind::Conv1D: return conv_replicas(graph, layer) * l.as<dnn::Conv1DGeom>().out_channels;
        case LayerKind::LSTM: return l.as<dnn::LstmGeom>().hidden_size;
        case LayerKind::FullyConnected: return l.as<dnn::FcGeom>().out_features;
        default: return 0;
    }
}

// ---------------------------------------------------------------------------
// Placement

namespace {

std::string layer_name(const dnn::NetworkGraph& g, int layer) {
    return "layer " + std::to_string(layer) + " (" + dnn::to_string(g.layers[layer].kind()) + ")";
}

void lower_dims(const dnn::NetworkGraph& graph, int layer, int& rows, int& cols) {
    const auto& l = graph.layers[layer];
    if (l.kind() == LayerKind::Conv1D) {
        const auto& g = l.as<dnn::Conv1DGeom>();
        const int R = conv_replicas(graph, layer);
        rows = (g.kernel_width + (R - 1) * g.stride) * g.in_channels;
        cols = R * g.out_channels;
    } else {
        rows = l.matrix_rows();
        cols = l.matrix_cols();
    }
}

}  // namespace

const LayerPlacement& Mapping::placement(int layer) const {
    for (const auto& p : layers) {
        if (p.layer == layer) return p;
    }
    throw MappingError("layer " + std::to_string(layer) + " has no placement");
}

int Mapping::tiles_used() const {
    std::set<int> t;
    for (const auto& l : layers) {
        for (const auto& p : l.pieces) t.insert(p.tile);
    }
    return static_cast<int>(t.size());
}

Mapping map_network(const dnn::NetworkGraph& graph, const ArchDescription& arch, const MappingStrategy& strategy) {
    graph.validate();
    arch.validate();
    const auto tiles = arch.nodes_of(NodeKind::CiMTile);
    const auto dpus = arch.nodes_of(NodeKind::DPU);
    std::vector<bool> tile_taken(tiles.size(), false);
    std::vector<int> dpu_load(dpus.size(), 0);

    Mapping m;
    const auto compute = graph.compute_layers();
    int prev_node = arch.signal_buffer();
    for (std::size_t ci = 0; ci < compute.size(); ++ci) {
        const int li = compute[ci];
        const auto& layer = graph.layers[li];
        LayerPlacement p;
        p.layer = li;
        p.analog = !strategy.is_digital(graph, li);
        p.replicas = layer.kind() == LayerKind::Conv1D ? conv_replicas(graph, li) : 1;
        lower_dims(graph, li, p.rows, p.cols);
        const int next_compute = ci + 1 < compute.size() ? compute[ci + 1] : static_cast<int>(graph.layers.size());
        for (int j = li + 1; j < next_compute; ++j) p.aux_layers.push_back(j);

        // A lone FC block with nothing after it finishes on the tile's own
        // post-processing; everything else needs a DPU.
        const bool needs_dpu = !p.analog || layer.kind() != LayerKind::FullyConnected || !p.aux_layers.empty() ||
                               p.rows > arch.tile_rows || p.cols > arch.tile_cols;
        if (needs_dpu) {
            int best = -1;
            for (int d = 0; d < static_cast<int>(dpus.size()); ++d) {
                if (best < 0 || dpu_load[d] < dpu_load[best] ||
                    (dpu_load[d] == dpu_load[best] && arch.distance(prev_node, dpus[d]) < arch.distance(prev_node, dpus[best]))) {
                    best = d;
                }
            }
            p.dpu = best;
            ++dpu_load[best];
        }

        if (p.analog) {
            const int anchor = p.dpu >= 0 ? dpus[p.dpu] : -1;
            for (int r0 = 0; r0 < p.rows; r0 += arch.tile_rows) {
                for (int c0 = 0; c0 < p.cols; c0 += arch.tile_cols) {
                    int best = -1, best_cost = std::numeric_limits<int>::max();
                    for (int t = 0; t < static_cast<int>(tiles.size()); ++t) {
                        if (tile_taken[t]) continue;
                        int cost = arch.distance(prev_node, tiles[t]);
                        if (anchor >= 0) cost += arch.distance(tiles[t], anchor);
                        else cost += arch.distance(tiles[t], arch.decoder());
                        if (cost < best_cost) {
                            best = t;
                            best_cost = cost;
                        }
                    }
                    if (best < 0) {
                        throw MappingError("capacity exceeded: " + layer_name(graph, li) + " needs a " +
                                           std::to_string(p.rows) + "x" + std::to_string(p.cols) +
                                           " crossbar block but no free tile is left");
                    }
                    tile_taken[best] = true;
                    p.pieces.push_back({best, 0, 0, std::min(arch.tile_rows, p.rows - r0),
                                        std::min(arch.tile_cols, p.cols - c0), r0, c0});
                }
            }
        }
        p.output_node = p.dpu >= 0 ? dpus[p.dpu] : arch.tile_node(p.pieces.front().tile);
        prev_node = p.output_node;
        m.layers.push_back(std::move(p));
    }

    // Routes: producer -> consumer per layer, partial outputs -> DPU, and the
    // LSTM hidden state multicast back to its own tiles.
    int producer = arch.signal_buffer();
    int producer_layer = -1;
    const LayerPlacement* prev = nullptr;
    auto tile_nodes = [&](const LayerPlacement& p) {
        std::vector<int> out;
        for (const auto& piece : p.pieces) {
            const int n = arch.tile_node(piece.tile);
            if (std::find(out.begin(), out.end(), n) == out.end()) out.push_back(n);
        }
        return out;
    };
    for (const auto& p : m.layers) {
        Route in;
        in.kind = RouteKind::Activation;
        in.from_layer = producer_layer;
        in.to_layer = p.layer;
        in.src_nodes = {producer};
        in.dst_nodes = p.analog ? tile_nodes(p) : std::vector<int>{arch.dpu_node(p.dpu)};
        if (prev && graph.layers[prev->layer].kind() == LayerKind::LSTM) {
            for (int n : tile_nodes(*prev)) {
                if (std::find(in.dst_nodes.begin(), in.dst_nodes.end(), n) == in.dst_nodes.end()) in.dst_nodes.push_back(n);
            }
        }
        in.width = input_width(graph, p.layer);
        m.routes.push_back(in);
        if (p.analog && p.dpu >= 0) {
            Route g;
            g.kind = RouteKind::Gates;
            g.from_layer = p.layer;
            g.to_layer = p.layer;
            g.src_nodes = tile_nodes(p);
            g.dst_nodes = {arch.dpu_node(p.dpu)};
            g.width = p.cols * p.row_blocks();
            m.routes.push_back(g);
        }
        producer = p.output_node;
        producer_layer = p.layer;
        prev = &p;
    }
    Route out;
    out.kind = RouteKind::Output;
    out.from_layer = producer_layer;
    out.to_layer = -1;
    out.src_nodes = {producer};
    out.dst_nodes = {arch.decoder()};
    if (prev && graph.layers[prev->layer].kind() == LayerKind::LSTM) {
        for (int n : tile_nodes(*prev)) out.dst_nodes.push_back(n);
    }
    out.width = graph.output_width();
    m.routes.push_back(out);

    for (const auto& r : m.routes) {
        for (int s : r.src_nodes) {
            for (int d : r.dst_nodes) xy_path(arch, s, d);
        }
    }
    return m;
}

std::vector<std::string> validate_mapping(const Mapping& mapping, const dnn::NetworkGraph& graph,
                                          const ArchDescription& arch, const MappingStrategy& strategy) {
    std::vector<std::string> v;
    const int n_tiles = arch.n_tiles();
    std::vector<std::vector<std::uint8_t>> used(static_cast<std::size_t>(n_tiles));
    std::vector<int> owner(static_cast<std::size_t>(n_tiles), -1);

    const auto compute = graph.compute_layers();
    std::vector<int> seen(graph.layers.size(), 0);
    for (const auto& p : mapping.layers) {
        if (p.layer < 0 || p.layer >= static_cast<int>(graph.layers.size()) || !graph.layers[p.layer].is_compute()) {
            v.push_back("placement refers to non-compute layer " + std::to_string(p.layer));
            continue;
        }
        ++seen[p.layer];
        const std::string name = layer_name(graph, p.layer);
        if (p.analog != !strategy.is_digital(graph, p.layer)) {
            v.push_back(name + " is " + (p.analog ? "analog" : "digital") + " but the strategy requests the opposite");
        }
        if (!p.analog) {
            if (p.dpu < 0 || p.dpu >= arch.n_dpus()) v.push_back(name + " is digital without a valid DPU");
            if (!p.pieces.empty()) v.push_back(name + " is digital but occupies tiles");
            continue;
        }
        if (p.dpu >= arch.n_dpus()) v.push_back(name + " refers to DPU " + std::to_string(p.dpu) + " which does not exist");
        int expect_rows = 0, expect_cols = 0;
        lower_dims(graph, p.layer, expect_rows, expect_cols);
        if (p.rows != expect_rows || p.cols != expect_cols) v.push_back(name + " lowered size does not match the layer");
        long covered = 0;
        std::set<std::pair<int, int>> blocks;
        for (const auto& piece : p.pieces) {
            if (piece.tile < 0 || piece.tile >= n_tiles) {
                v.push_back(name + " uses tile " + std::to_string(piece.tile) + " which is out of bounds");
                continue;
            }
            if (piece.rows < 1 || piece.cols < 1 || piece.row_begin < 0 || piece.col_begin < 0 ||
                piece.row_begin + piece.rows > arch.tile_rows || piece.col_begin + piece.cols > arch.tile_cols) {
                v.push_back(name + " block exceeds the bounds of tile " + std::to_string(piece.tile));
                continue;
            }
            if (piece.layer_row + piece.rows > p.rows || piece.layer_col + piece.cols > p.cols) {
                v.push_back(name + " block lies outside the layer matrix");
            }
            if (!blocks.insert({piece.layer_row, piece.layer_col}).second) v.push_back(name + " maps one block twice");
            covered += static_cast<long>(piece.rows) * piece.cols;
            auto& bitmap = used[piece.tile];
            if (bitmap.empty()) bitmap.assign(static_cast<std::size_t>(arch.tile_rows) * arch.tile_cols, 0);
            bool clash = false;
            for (int r = piece.row_begin; r < piece.row_begin + piece.rows; ++r) {
                for (int c = piece.col_begin; c < piece.col_begin + piece.cols; ++c) {
                    auto& cell = bitmap[static_cast<std::size_t>(r) * arch.tile_cols + c];
                    clash |= cell != 0;
                    cell = 1;
                }
            }
            if (clash) v.push_back(name + " overlaps another layer on tile " + std::to_string(piece.tile));
        }
        if (covered != static_cast<long>(p.rows) * p.cols) v.push_back(name + " blocks do not cover its matrix");
    }
    for (int li : compute) {
        if (seen[li] == 0) v.push_back(layer_name(graph, li) + " is not placed");
        if (seen[li] > 1) v.push_back(layer_name(graph, li) + " is placed more than once");
    }

    // Every producer -> consumer edge needs a route whose nodes exist and connect.
    for (std::size_t i = 0; i <= compute.size(); ++i) {
        const int to = i < compute.size() ? compute[i] : -1;
        const int from = i == 0 ? -1 : compute[i - 1];
        const bool found = std::any_of(mapping.routes.begin(), mapping.routes.end(), [&](const Route& r) {
            return r.to_layer == to && r.from_layer == from && r.kind != RouteKind::Gates;
        });
        if (!found) v.push_back("no route from layer " + std::to_string(from) + " to layer " + std::to_string(to));
    }
    for (const auto& r : mapping.routes) {
        for (int s : r.src_nodes) {
            for (int d : r.dst_nodes) {
                if (s < 0 || d < 0 || s >= static_cast<int>(arch.nodes.size()) || d >= static_cast<int>(arch.nodes.size())) {
                    v.push_back("route refers to a node that does not exist");
                    continue;
                }
                try {
                    xy_path(arch, s, d);
                } catch (const MappingError& e) {
                    v.push_back(e.what());
                }
            }
        }
    }
    return v;
}

// ---------------------------------------------------------------------------
// Serialisation

json Mapping::to_json() const {
    json layers_j = json::array();
    for (const auto& p : layers) {
        json pieces = json::array();
        for (const auto& t : p.pieces) {
            pieces.push_back({{"tile", t.tile}, {"row_begin", t.row_begin}, {"col_begin", t.col_begin}, {"rows", t.rows},
                              {"cols", t.cols}, {"layer_row", t.layer_row}, {"layer_col", t.layer_col}});
        }
        layers_j.push_back({{"layer", p.layer}, {"analog", p.analog}, {"dpu", p.dpu}, {"replicas", p.replicas},
                            {"rows", p.rows}, {"cols", p.cols}, {"pieces", pieces}, {"aux_layers", p.aux_layers},
                            {"output_node", p.output_node}});
    }
    json routes_j = json::array();
    for (const auto& r : routes) {
        routes_j.push_back({{"kind", to_string(r.kind)}, {"from_layer", r.from_layer}, {"to_layer", r.to_layer},
                            {"src_nodes", r.src_nodes}, {"dst_nodes", r.dst_nodes}, {"width", r.width}});
    }
    return {{"format", "cimcall-mapping"}, {"version", 1}, {"layers", layers_j}, {"routes", routes_j}};
}

Mapping Mapping::from_json(const json& j) {
    if (j.value("format", "") != "cimcall-mapping" || j.value("version", 0) != 1) {
        throw ConfigError("mapping: expected format cimcall-mapping version 1");
    }
    Mapping m;
    for (const auto& lj : j.at("layers")) {
        LayerPlacement p;
        p.layer = lj.at("layer");
        p.analog = lj.at("analog");
        p.dpu = lj.at("dpu");
        p.replicas = lj.at("replicas");
        p.rows = lj.at("rows");
        p.cols = lj.at("cols");
        p.aux_layers = lj.at("aux_layers").get<std::vector<int>>();
        p.output_node = lj.at("output_node");
        for (const auto& t : lj.at("pieces")) {
            p.pieces.push_back({t.at("tile"), t.at("row_begin"), t.at("col_begin"), t.at("rows"), t.at("cols"),
                                t.at("layer_row"), t.at("layer_col")});
        }
        m.layers.push_back(std::move(p));
    }
    for (const auto& rj : j.at("routes")) {
        Route r;
        const auto kind = rj.at("kind").get<std::string>();
        if (kind == "activation") r.kind = RouteKind::Activation;
        else if (kind == "gates") r.kind = RouteKind::Gates;
        else if (kind == "output") r.kind = RouteKind::Output;
        else throw ConfigError("mapping: unknown route kind '" + kind + "'");
        r.from_layer = rj.at("from_layer");
        r.to_layer = rj.at("to_layer");
        r.src_nodes = rj.at("src_nodes").get<std::vector<int>>();
        r.dst_nodes = rj.at("dst_nodes").get<std::vector<int>>();
        r.width = rj.at("width");
        m.routes.push_back(std::move(r));
    }
    return m;
}

}  // namespace cimcall::mapper
