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

/**
 * @file mapper.hpp
 * @brief Layer-to-node placement on the 2D mesh.
 *
 * Every compute layer is lowered to a crossbar matrix with inputs on rows
 * and outputs on columns:
 *
 *   - LSTM: (I + H) rows x 4H columns, columns interleaved unit-major so
 *     physical column 4u + g holds gate g of unit u;
 *   - Conv1D: a Toeplitz block that computes R consecutive output positions
 *     in one read, (k + (R - 1) * stride) * c_in rows x R * c_out columns,
 *     where R is the stride product of the later conv layers (one VMM per
 *     frame);
 *   - FC: in rows x out columns.
 *
 * Matrices larger than a tile are cut into row and column blocks, one
 * block per tile. Row blocks produce partial sums that the layer's DPU adds.
 * Elementwise layers run on the DPU assigned to the preceding compute layer.
 */

#ifndef CIMCALL_MAPPER_HPP
#define CIMCALL_MAPPER_HPP

#include <string>
#include <vector>

#include "cimcall/dnn.hpp"
#include "json.hpp"

namespace cimcall::mapper {

enum class NodeKind { CiMTile, DPU, LADecoder, SignalBuffer, IO };

const char* to_string(NodeKind kind);
NodeKind node_kind_from_string(const std::string& s);

struct Node {
    NodeKind kind = NodeKind::CiMTile;
    int x = 0;
    int y = 0;
};

/// Mesh floorplan. Node ids are indices into `nodes`; tile and DPU ids
/// number nodes of that kind in node order. A grid position without a node
/// has no router.
struct ArchDescription {
    int width = 4;
    int height = 4;
    int tile_rows = 512;
    int tile_cols = 512;
    std::vector<Node> nodes;

    /// 4x4 grid: 11 tiles, 2 DPUs, decoder, signal buffer and IO.
    static ArchDescription default_arch();

    /// Throws ConfigError on an invalid floorplan.
    void validate() const;

    std::vector<int> nodes_of(NodeKind kind) const;
    int n_tiles() const { return static_cast<int>(nodes_of(NodeKind::CiMTile).size()); }
    int n_dpus() const { return static_cast<int>(nodes_of(NodeKind::DPU).size()); }
    int tile_node(int tile) const;
    int dpu_node(int dpu) const;
    int signal_buffer() const;
    int decoder() const;
    /// Node at a grid position or -1.
    int node_at(int x, int y) const;
    /// Manhattan distance between two nodes.
    int distance(int a, int b) const;

    nlohmann::json to_json() const;
    static ArchDescription from_json(const nlohmann::json& j);

    bool operator==(const ArchDescription& o) const;
};

/// One block of a layer's crossbar matrix on one tile.
struct TilePiece {
    int tile = 0;
    int row_begin = 0;  ///< tile coordinates
    int col_begin = 0;
    int rows = 0;
    int cols = 0;
    int layer_row = 0;  ///< block origin in the layer matrix
    int layer_col = 0;
};

struct LayerPlacement {
    int layer = 0;  ///< index into NetworkGraph::layers
    bool analog = true;
    int dpu = -1;        ///< DPU for auxiliary or digital work, -1 when none
    int replicas = 1;    ///< conv output positions per VMM
    int rows = 0;        ///< lowered matrix size
    int cols = 0;
    std::vector<TilePiece> pieces;
    std::vector<int> aux_layers;  ///< elementwise layers folded into this one
    int output_node = -1;         ///< node that emits the layer's activations

    int row_blocks() const;
};

enum class RouteKind { Activation, Gates, Output };

const char* to_string(RouteKind kind);

/// A data transfer per token: every source sends its share to every
/// destination. Several sources to one node concatenate (or, for row
/// blocks, are summed there).
struct Route {
    RouteKind kind = RouteKind::Activation;
    int from_layer = -1;  ///< -1: signal buffer
    int to_layer = -1;    ///< -1: decoder
    std::vector<int> src_nodes;
    std::vector<int> dst_nodes;
    int width = 0;  ///< elements per token over all sources
};

struct MappingStrategy {
    bool first_conv_digital = true;
    /// Further compute layers (indices into NetworkGraph::layers) kept digital.
    std::vector<int> digital_layers;
    /// Force every compute layer digital (reference runs).
    bool all_digital = false;

    bool is_digital(const dnn::NetworkGraph& graph, int layer) const;
};

struct Mapping {
    std::vector<LayerPlacement> layers;
    std::vector<Route> routes;

    const LayerPlacement& placement(int layer) const;
    int tiles_used() const;

    nlohmann::json to_json() const;
    static Mapping from_json(const nlohmann::json& j);
};

/// Output positions per VMM for a conv layer at index `layer`.
int conv_replicas(const dnn::NetworkGraph& graph, int layer);

/// Physical LSTM column -> row of the gate-major [4H][I+H] weight matrix.
int lstm_column_source(int physical_col, int hidden);

/// Dense lowered matrix [rows][cols] of a compute layer.
std::vector<float> lowered_matrix(const dnn::NetworkGraph& graph, int layer, int* rows = nullptr,
                                  int* cols = nullptr);

/// Elements entering / leaving a compute layer per token.
int input_width(const dnn::NetworkGraph& graph, int layer);
int output_width(const dnn::NetworkGraph& graph, int layer);

/// Greedy placement. Throws MappingError when a layer does not fit or a
/// route is impossible.
Mapping map_network(const dnn::NetworkGraph& graph, const ArchDescription& arch,
                    const MappingStrategy& strategy = {});

/// Returns human-readable violations; empty means valid.
std::vector<std::string> validate_mapping(const Mapping& mapping, const dnn::NetworkGraph& graph,
                                          const ArchDescription& arch, const MappingStrategy& strategy = {});

/// Nodes visited by the X-then-Y route from a to b, inclusive. Throws
/// MappingError when a grid position on the way has no router.
std::vector<int> xy_path(const ArchDescription& arch, int a, int b);

}  // namespace cimcall::mapper

#endif  // CIMCALL_MAPPER_HPP
