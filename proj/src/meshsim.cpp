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

#include "cimcall/meshsim.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <ostream>
#include <queue>
#include <set>
#include <tuple>

namespace cimcall::meshsim {

using dnn::LayerKind;
using mapper::ArchDescription;
using mapper::NodeKind;
using nlohmann::json;

const char* to_string(OpKind kind) {
    switch (kind) {
        case OpKind::VMM: return "VMM";
        case OpKind::DigitalVMM: return "DigitalVMM";
        case OpKind::BatchNormAux: return "BatchNormAux";
        case OpKind::SwishLUT: return "SwishLUT";
        case OpKind::LSTMAux: return "LSTMAux";
        case OpKind::Decode: return "Decode";
        case OpKind::SRAMAccess: return "SRAMAccess";
        case OpKind::MeshTransfer: return "MeshTransfer";
    }
    return "?";
}

const char* to_string(Category c) {
    switch (c) {
        case Category::VMM: return "vmm";
        case Category::LSTMOps: return "lstm_ops";
        case Category::Other: return "other";
        case Category::DataMovement: return "data_movement";
        case Category::Contention: return "contention";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Cost table

void CostTable::validate() const {
    auto pos = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string("costs.") + name + " must be positive");
    };
    pos(vmm_energy_nj, "vmm_energy_nJ");
    pos(vmm_cycles, "vmm_cycles");
    pos(elementwise_energy_pj, "elementwise_energy_pJ");
    pos(elementwise_cycles, "elementwise_cycles");
    pos(lut_energy_pj, "lut_energy_pJ");
    pos(lut_cycles, "lut_cycles");
    pos(lstm_aux_energy_pj, "lstm_aux_energy_pJ");
    pos(lstm_aux_cycles, "lstm_aux_cycles");
    pos(dpu_sram_bit_energy_fj, "dpu_sram_bit_energy_fJ");
    pos(dpu_sram_cycles, "dpu_sram_cycles");
    pos(mesh_ew_bit_energy_fj, "mesh_ew_bit_energy_fJ");
    pos(mesh_ns_bit_energy_fj, "mesh_ns_bit_energy_fJ");
    pos(mesh_turn_bit_energy_fj, "mesh_turn_bit_energy_fJ");
    pos(mesh_leg_cycles, "mesh_leg_cycles");
    pos(decode_energy_nj, "decode_energy_nJ");
    pos(decode_cycles, "decode_cycles");
    pos(signal_buffer_bit_energy_fj, "signal_buffer_bit_energy_fJ");
    pos(signal_buffer_cycles, "signal_buffer_cycles");
    pos(clock_hz, "clock_hz");
    pos(dpu_mac_lanes, "dpu_mac_lanes");
    pos(activation_bits, "activation_bits");
    pos(sample_bits, "sample_bits");
    la.validate();
    const int expected = decoder::decoder_cost(la).latency_cycles;
    if (decode_cycles != expected) {
        throw ConfigError("costs.decode_cycles is " + std::to_string(decode_cycles) + " but the decoder with l_tp=" +
                          std::to_string(la.l_tp) + ", l_mlp=" + std::to_string(la.l_mlp) + " takes " +
                          std::to_string(expected) + " cycles");
    }
}

json CostTable::to_json() const {
    return json{{"vmm_energy_nJ", vmm_energy_nj},
                {"vmm_cycles", vmm_cycles},
                {"elementwise_energy_pJ", elementwise_energy_pj},
                {"elementwise_cycles", elementwise_cycles},
                {"lut_energy_pJ", lut_energy_pj},
                {"lut_cycles", lut_cycles},
                {"lstm_aux_energy_pJ", lstm_aux_energy_pj},
                {"lstm_aux_cycles", lstm_aux_cycles},
                {"dpu_sram_bit_energy_fJ", dpu_sram_bit_energy_fj},
                {"dpu_sram_cycles", dpu_sram_cycles},
                {"mesh_ew_bit_energy_fJ", mesh_ew_bit_energy_fj},
                {"mesh_ns_bit_energy_fJ", mesh_ns_bit_energy_fj},
                {"mesh_turn_bit_energy_fJ", mesh_turn_bit_energy_fj},
                {"mesh_leg_cycles", mesh_leg_cycles},
                {"mesh_latency_mode", mesh_latency_mode == MeshLatencyMode::PerLeg ? "per_leg" : "per_hop"},
                {"decode_energy_nJ", decode_energy_nj},
                {"decode_cycles", decode_cycles},
                {"signal_buffer_bit_energy_fJ", signal_buffer_bit_energy_fj},
                {"signal_buffer_cycles", signal_buffer_cycles},
                {"clock_hz", clock_hz},
                {"dpu_mac_lanes", dpu_mac_lanes},
                {"activation_bits", activation_bits},
                {"sample_bits", sample_bits},
                {"l_tp", la.l_tp},
                {"l_mlp", la.l_mlp}};
}

CostTable CostTable::from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("costs: expected an object");
    CostTable c;
    const std::map<std::string, std::function<void(const json&)>> setters = {
        {"vmm_energy_nJ", [&](const json& v) { c.vmm_energy_nj = v.get<double>(); }},
        {"vmm_cycles", [&](const json& v) { c.vmm_cycles = v.get<int>(); }},
        {"elementwise_energy_pJ", [&](const json& v) { c.elementwise_energy_pj = v.get<double>(); }},
        {"elementwise_cycles", [&](const json& v) { c.elementwise_cycles = v.get<int>(); }},
        {"lut_energy_pJ", [&](const json& v) { c.lut_energy_pj = v.get<double>(); }},
        {"lut_cycles", [&](const json& v) { c.lut_cycles = v.get<int>(); }},
        {"lstm_aux_energy_pJ", [&](const json& v) { c.lstm_aux_energy_pj = v.get<double>(); }},
        {"lstm_aux_cycles", [&](const json& v) { c.lstm_aux_cycles = v.get<int>(); }},
        {"dpu_sram_bit_energy_fJ", [&](const json& v) { c.dpu_sram_bit_energy_fj = v.get<double>(); }},
        {"dpu_sram_cycles", [&](const json& v) { c.dpu_sram_cycles = v.get<int>(); }},
        {"mesh_ew_bit_energy_fJ", [&](const json& v) { c.mesh_ew_bit_energy_fj = v.get<double>(); }},
        {"mesh_ns_bit_energy_fJ", [&](const json& v) { c.mesh_ns_bit_energy_fj = v.get<double>(); }},
        {"mesh_turn_bit_energy_fJ", [&](const json& v) { c.mesh_turn_bit_energy_fj = v.get<double>(); }},
        {"mesh_leg_cycles", [&](const json& v) { c.mesh_leg_cycles = v.get<int>(); }},
        {"mesh_latency_mode",
         [&](const json& v) {
             const auto s = v.get<std::string>();
             if (s == "per_leg") c.mesh_latency_mode = MeshLatencyMode::PerLeg;
             else if (s == "per_hop") c.mesh_latency_mode = MeshLatencyMode::PerHop;
             else throw ConfigError("costs.mesh_latency_mode: expected per_leg or per_hop, got '" + s + "'");
         }},
        {"decode_energy_nJ", [&](const json& v) { c.decode_energy_nj = v.get<double>(); }},
        {"decode_cycles", [&](const json& v) { c.decode_cycles = v.get<int>(); }},
        {"signal_buffer_bit_energy_fJ", [&](const json& v) { c.signal_buffer_bit_energy_fj = v.get<double>(); }},
        {"signal_buffer_cycles", [&](const json& v) { c.signal_buffer_cycles = v.get<int>(); }},
        {"clock_hz", [&](const json& v) { c.clock_hz = v.get<double>(); }},
        {"dpu_mac_lanes", [&](const json& v) { c.dpu_mac_lanes = v.get<int>(); }},
        {"activation_bits", [&](const json& v) { c.activation_bits = v.get<int>(); }},
        {"sample_bits", [&](const json& v) { c.sample_bits = v.get<int>(); }},
        {"l_tp", [&](const json& v) { c.la.l_tp = v.get<int>(); }},
        {"l_mlp", [&](const json& v) { c.la.l_mlp = v.get<int>(); }},
    };
    for (const auto& [key, value] : j.items()) {
        const auto it = setters.find(key);
        if (it == setters.end()) throw ConfigError("costs: unknown key '" + key + "'");
        try {
            it->second(value);
        } catch (const json::exception& e) {
            throw ConfigError("costs." + key + ": " + e.what());
        }
    }
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Mesh transfers

namespace {

enum Dir { East = 0, West = 1, North = 2, South = 3 };

std::string node_name(const ArchDescription& arch, int n) {
    const auto& node = arch.nodes[n];
    int index = 0;
    for (int i = 0; i < n; ++i) index += arch.nodes[i].kind == node.kind;
    switch (node.kind) {
        case NodeKind::CiMTile: return "tile" + std::to_string(index);
        case NodeKind::DPU: return "dpu" + std::to_string(index);
        case NodeKind::LADecoder: return "decoder";
        case NodeKind::SignalBuffer: return "signal_buffer";
        case NodeKind::IO: return "io" + std::to_string(index);
    }
    return "node" + std::to_string(n);
}

}  // namespace

int channel_resource(const ArchDescription& arch, int x0, int y0, int x1, int y1) {
    const int base = static_cast<int>(arch.nodes.size());
    if (y0 == y1 && std::abs(x1 - x0) == 1) return base + 2 * y0 + (x1 > x0 ? 0 : 1);
    if (x0 == x1 && std::abs(y1 - y0) == 1) return base + 2 * arch.height + 2 * x0 + (y1 > y0 ? 0 : 1);
    throw MappingError("channel_resource: positions are not adjacent");
}

TransferCost transfer_cost(const ArchDescription& arch, int src, const std::vector<int>& dsts, std::int64_t bits,
                           const CostTable& costs) {
    TransferCost out;
    std::set<std::pair<int, int>> hops;   // (from node, to node)
    std::set<std::pair<int, int>> turns;  // (node, outgoing vertical direction)
    std::set<int> channels;
    for (int d : dsts) {
        if (d == src) continue;
        const auto path = mapper::xy_path(arch, src, d);
        const auto& a = arch.nodes[src];
        const auto& b = arch.nodes[d];
        const int dx = std::abs(b.x - a.x);
        const int dy = std::abs(b.y - a.y);
        const int turn = dx > 0 && dy > 0 ? 1 : 0;
        if (turn) turns.insert({arch.node_at(b.x, a.y), b.y > a.y ? North : South});
        for (std::size_t i = 1; i < path.size(); ++i) {
            const auto& p = arch.nodes[path[i - 1]];
            const auto& q = arch.nodes[path[i]];
            hops.insert({path[i - 1], path[i]});
            channels.insert(channel_resource(arch, p.x, p.y, q.x, q.y));
        }
        int lat = 0;
        if (costs.mesh_latency_mode == MeshLatencyMode::PerLeg) {
            lat = costs.mesh_leg_cycles * ((dx > 0) + (dy > 0) + turn);
        } else {
            lat = costs.mesh_leg_cycles * (dx + dy + turn);
        }
        out.latency = std::max(out.latency, lat);
    }
    for (const auto& [from, to] : hops) {
        if (arch.nodes[from].y == arch.nodes[to].y) ++out.x_hops;
        else ++out.y_hops;
    }
    out.turns = static_cast<int>(turns.size());
    const double per_bit_fj = costs.mesh_ew_bit_energy_fj * out.x_hops + costs.mesh_ns_bit_energy_fj * out.y_hops +
                              costs.mesh_turn_bit_energy_fj * out.turns;
    out.energy_j = static_cast<double>(bits) * per_bit_fj * 1e-15;
    out.channels.assign(channels.begin(), channels.end());
    return out;
}

// ---------------------------------------------------------------------------
// Job graph

namespace {

class Builder {
public:
    Builder(const dnn::NetworkGraph& graph, const mapper::Mapping& mapping, const ArchDescription& arch,
            const CostTable& costs, JobGraph& out)
        : graph_(graph), mapping_(mapping), arch_(arch), costs_(costs), out_(out) {}

    int add(int token, OpKind kind, Category cat, int layer, std::vector<int> resources, int latency, double energy_j,
            std::vector<int> preds, std::int64_t bits = 0, std::int64_t macs = 0) {
        MicroOp op;
        op.id = static_cast<int>(out_.ops.size());
        op.kind = kind;
        op.category = cat;
        op.token = token;
        op.layer = layer;
        op.resources = std::move(resources);
        op.latency = latency;
        op.energy_j = energy_j;
        std::sort(preds.begin(), preds.end());
        preds.erase(std::unique(preds.begin(), preds.end()), preds.end());
        preds.erase(std::remove(preds.begin(), preds.end(), -1), preds.end());
        op.preds = std::move(preds);
        op.bits = bits;
        op.macs = macs;
        out_.ops.push_back(std::move(op));
        return out_.ops.back().id;
    }

    /// Transfer op for a route leg, or -1 when every destination is local.
    int transfer(int token, int layer, int src, const std::vector<int>& dsts, std::int64_t bits, std::vector<int> preds) {
        const bool remote = std::any_of(dsts.begin(), dsts.end(), [&](int d) { return d != src; });
        if (!remote) return -1;
        const auto c = transfer_cost(arch_, src, dsts, bits, costs_);
        return add(token, OpKind::MeshTransfer, Category::DataMovement, layer, c.channels, c.latency, c.energy_j,
                   std::move(preds), bits);
    }

    int sram(int token, int layer, int node, std::int64_t bits, std::vector<int> preds) {
        return add(token, OpKind::SRAMAccess, Category::DataMovement, layer, {node}, costs_.dpu_sram_cycles,
                   static_cast<double>(bits) * costs_.dpu_sram_bit_energy_fj * 1e-15, std::move(preds), bits);
    }

    int elementwise(int token, int layer, int node, int width, Category cat, int pred) {
        return add(token, OpKind::BatchNormAux, cat, layer, {node}, costs_.elementwise_cycles,
                   width * costs_.elementwise_energy_pj * 1e-12, {pred});
    }

    void build_token(int k, const JobOptions& options) {
        const int bits = costs_.activation_bits;
        const auto route_into = [&](int layer) -> const mapper::Route* {
            for (const auto& r : mapping_.routes) {
                if (r.kind != mapper::RouteKind::Activation && r.kind != mapper::RouteKind::Output) continue;
                if (r.to_layer == layer) return &r;
            }
            return nullptr;
        };
        const int P = out_.ops_per_token;
        const auto same_slot_prev = [&](int id) { return k > 0 && P > 0 ? id - P : -1; };

        int last = -1;
        if (options.io) {
            const auto* r = route_into(mapping_.layers.front().layer);
            const std::int64_t sb_bits = static_cast<std::int64_t>(r ? r->width : 0) * costs_.sample_bits;
            std::vector<int> preds;
            if (k >= out_.inflight) preds.push_back(decode_ids_[k - out_.inflight]);
            last = add(k, OpKind::SRAMAccess, Category::DataMovement, -1, {arch_.signal_buffer()},
                       costs_.signal_buffer_cycles, static_cast<double>(sb_bits) * costs_.signal_buffer_bit_energy_fj * 1e-15,
                       preds, sb_bits);
        }

        // Transfer that delivers each LSTM's hidden state back to its tiles.
        std::map<int, int> recurrence_this_token;
        const mapper::LayerPlacement* prev = nullptr;

        for (const auto& p : mapping_.layers) {
            const auto& layer = graph_.layers[p.layer];
            const auto kind = layer.kind();
            const bool is_lstm = kind == LayerKind::LSTM;
            const Category vmm_cat = is_lstm ? Category::VMM : Category::Other;
            const Category aux_cat = is_lstm ? Category::LSTMOps : Category::Other;

            int input_ready = last;
            const auto* r = route_into(p.layer);
            if (r && (options.io || prev)) {
                const int eb = r->from_layer < 0 ? costs_.sample_bits : bits;
                const int x = transfer(k, p.layer, r->src_nodes.front(), r->dst_nodes,
                                       static_cast<std::int64_t>(r->width) * eb, {last});
                if (x >= 0) input_ready = x;
            }
            if (prev && graph_.layers[prev->layer].kind() == LayerKind::LSTM) {
                recurrence_this_token[prev->layer] = input_ready;
            }

            const int dpu_node = p.dpu >= 0 ? arch_.dpu_node(p.dpu) : -1;
            const int out_width = mapper::output_width(graph_, p.layer);
            int compute_done = -1;
            if (!p.analog) {
                const std::int64_t in_bits = static_cast<std::int64_t>(mapper::input_width(graph_, p.layer)) * bits;
                const int w = sram(k, p.layer, dpu_node, in_bits, {input_ready});
                const std::int64_t macs = static_cast<std::int64_t>(p.rows) * p.cols;
                const int lat = static_cast<int>((macs + costs_.dpu_mac_lanes - 1) / costs_.dpu_mac_lanes) *
                                costs_.elementwise_cycles;
                compute_done = add(k, OpKind::DigitalVMM, Category::Other, p.layer, {dpu_node}, lat,
                                   static_cast<double>(macs) * costs_.elementwise_energy_pj * 1e-12, {w}, 0, macs);
            } else {
                std::map<int, std::vector<int>> vmm_by_node;
                std::map<int, int> cols_by_node;
                for (const auto& piece : p.pieces) {
                    const int node = arch_.tile_node(piece.tile);
                    std::vector<int> preds{input_ready};
                    if (is_lstm && k > 0) preds.push_back(recurrence_prev_.at(p.layer));
                    const int v = add(k, OpKind::VMM, vmm_cat, p.layer, {node}, costs_.vmm_cycles,
                                      costs_.vmm_energy_nj * 1e-9, preds, 0,
                                      static_cast<std::int64_t>(piece.rows) * piece.cols);
                    vmm_by_node[node].push_back(v);
                    cols_by_node[node] += piece.cols;
                }
                if (dpu_node >= 0) {
                    std::vector<int> arrivals;
                    std::int64_t total_bits = 0;
                    for (const auto& [node, vmms] : vmm_by_node) {
                        const std::int64_t b = static_cast<std::int64_t>(cols_by_node[node]) * bits;
                        total_bits += b;
                        const int x = transfer(k, p.layer, node, {dpu_node}, b, vmms);
                        if (x >= 0) arrivals.push_back(x);
                        else arrivals.insert(arrivals.end(), vmms.begin(), vmms.end());
                    }
                    compute_done = sram(k, p.layer, dpu_node, total_bits, arrivals);
                    if (p.row_blocks() > 1) {
                        compute_done =
                            elementwise(k, p.layer, dpu_node, p.cols * (p.row_blocks() - 1), aux_cat, compute_done);
                    }
                } else {
                    // Lone block: bias and readout finish in the tile periphery.
                    const int node = vmm_by_node.begin()->first;
                    compute_done = elementwise(k, p.layer, node, out_width, aux_cat, vmm_by_node.begin()->second.back());
                }
            }

            last = compute_done;
            if (dpu_node >= 0) {
                if (is_lstm) {
                    last = add(k, OpKind::LSTMAux, Category::LSTMOps, p.layer, {dpu_node}, costs_.lstm_aux_cycles,
                               out_width * costs_.lstm_aux_energy_pj * 1e-12, {last});
                } else if (!layer.bias.empty()) {
                    last = elementwise(k, p.layer, dpu_node, out_width, Category::Other, last);
                }
                for (int a : p.aux_layers) {
                    const auto ak = graph_.layers[a].kind();
                    if (ak == LayerKind::Swish) {
                        last = add(k, OpKind::SwishLUT, Category::Other, a, {dpu_node}, costs_.lut_cycles,
                                   out_width * costs_.lut_energy_pj * 1e-12, {last});
                    } else {
                        last = elementwise(k, a, dpu_node, out_width, Category::Other, last);
                    }
                }
            }
            prev = &p;
        }

        int tail = last;
        if (options.io) {
            const auto* r = route_into(-1);
            if (r) {
                const int x = transfer(k, -1, r->src_nodes.front(), r->dst_nodes,
                                       static_cast<std::int64_t>(r->width) * bits, {last});
                if (x >= 0) tail = x;
            }
            decode_ids_.push_back(add(k, OpKind::Decode, Category::Other, -1, {arch_.decoder()}, costs_.decode_cycles,
                                      costs_.decode_energy_nj * 1e-9, {tail}));
        }
        // The output multicast also carries the last LSTM's state back to
        // its tiles; without I/O the state loops back after its own update.
        if (prev && graph_.layers[prev->layer].kind() == LayerKind::LSTM) recurrence_this_token[prev->layer] = tail;
        recurrence_prev_ = recurrence_this_token;

        // Same op of the previous token must finish first (in-order stages).
        if (k > 0) {
            for (int id = k * P; id < static_cast<int>(out_.ops.size()); ++id) {
                auto& preds = out_.ops[id].preds;
                preds.push_back(same_slot_prev(id));
                std::sort(preds.begin(), preds.end());
                preds.erase(std::unique(preds.begin(), preds.end()), preds.end());
            }
        }
    }

private:
    const dnn::NetworkGraph& graph_;
    const mapper::Mapping& mapping_;
    const ArchDescription& arch_;
    const CostTable& costs_;
    JobGraph& out_;
    std::map<int, int> recurrence_prev_;
    std::vector<int> decode_ids_;
};

}  // namespace

JobGraph build_job_graph(const dnn::NetworkGraph& graph, const mapper::Mapping& mapping, const ArchDescription& arch,
                         int n_tokens, const CostTable& costs, const JobOptions& options) {
    if (n_tokens < 0) throw ConfigError("n_tokens must be non-negative");
    if (options.max_inflight < 0) throw ConfigError("max_inflight must be non-negative");
    costs.validate();
    JobGraph out;
    out.n_tokens = n_tokens;
    for (std::size_t n = 0; n < arch.nodes.size(); ++n) out.resource_names.push_back(node_name(arch, static_cast<int>(n)));
    for (int y = 0; y < arch.height; ++y) {
        out.resource_names.push_back("row" + std::to_string(y) + ".E");
        out.resource_names.push_back("row" + std::to_string(y) + ".W");
    }
    for (int x = 0; x < arch.width; ++x) {
        out.resource_names.push_back("col" + std::to_string(x) + ".N");
        out.resource_names.push_back("col" + std::to_string(x) + ".S");
    }
    out.inflight = options.max_inflight > 0 ? options.max_inflight : static_cast<int>(mapping.layers.size()) + 1;
    if (n_tokens == 0 || mapping.layers.empty()) return out;

    Builder b(graph, mapping, arch, costs, out);
    for (int k = 0; k < n_tokens; ++k) {
        const std::size_t before = out.ops.size();
        b.build_token(k, options);
        const int count = static_cast<int>(out.ops.size() - before);
        if (k == 0) out.ops_per_token = count;
        else if (count != out.ops_per_token) throw Error("job graph: token structure changed between tokens");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Scheduling

Timeline schedule(const JobGraph& graph) {
    Timeline tl;
    const int n = static_cast<int>(graph.ops.size());
    tl.ops.resize(n);
    tl.token_end.assign(graph.n_tokens, 0);
    if (n == 0) return tl;

    std::vector<int> missing(n, 0);
    std::vector<std::vector<int>> succ(n);
    for (const auto& op : graph.ops) {
        for (int p : op.preds) {
            if (p < 0 || p >= op.id) throw Error("job graph: predecessor " + std::to_string(p) + " of op " +
                                                 std::to_string(op.id) + " is not an earlier op");
            succ[p].push_back(op.id);
        }
        missing[op.id] = static_cast<int>(op.preds.size());
    }

    // Op ids are token-major, so id order is (token, op id) order.
    std::set<int> ready;
    for (int i = 0; i < n; ++i) {
        if (missing[i] == 0) ready.insert(i);
    }
    std::vector<std::int64_t> busy_until(graph.n_resources(), 0);
    using Event = std::pair<std::int64_t, int>;
    std::priority_queue<Event, std::vector<Event>, std::greater<>> running;
    std::int64_t now = 0;
    int done = 0;
    while (done < n) {
        for (auto it = ready.begin(); it != ready.end();) {
            const auto& op = graph.ops[*it];
            const bool free = std::all_of(op.resources.begin(), op.resources.end(),
                                          [&](int r) { return busy_until[r] <= now; });
            if (!free) {
                ++it;
                continue;
            }
            auto& t = tl.ops[op.id];
            t.start = now;
            t.end = now + op.latency;
            for (int r : op.resources) busy_until[r] = t.end;
            running.push({t.end, op.id});
            it = ready.erase(it);
        }
        if (running.empty()) throw Error("scheduler: deadlock with " + std::to_string(n - done) + " ops pending");
        now = running.top().first;
        while (!running.empty() && running.top().first == now) {
            const int id = running.top().second;
            running.pop();
            ++done;
            for (int s : succ[id]) {
                if (--missing[s] == 0) {
                    tl.ops[s].ready = now;
                    ready.insert(s);
                }
            }
        }
    }

    for (const auto& op : graph.ops) {
        tl.energy_j += op.energy_j;
        tl.makespan = std::max(tl.makespan, tl.ops[op.id].end);
        tl.token_end[op.token] = std::max(tl.token_end[op.token], tl.ops[op.id].end);
    }
    tl.breakdown = token_breakdown(graph, tl, graph.n_tokens / 2);
    return tl;
}

double Breakdown::fraction(Category c) const {
    const auto t = total();
    return t > 0 ? static_cast<double>(cycles[static_cast<int>(c)]) / static_cast<double>(t) : 0.0;
}

Breakdown token_breakdown(const JobGraph& graph, const Timeline& timeline, int token) {
    Breakdown b;
    b.token = token;
    if (graph.ops_per_token == 0 || token < 0 || token >= graph.n_tokens) return b;
    const int first = token * graph.ops_per_token;
    const int last = first + graph.ops_per_token;
    b.window_begin = std::numeric_limits<std::int64_t>::max();
    b.window_end = 0;
    for (int i = first; i < last; ++i) {
        b.window_begin = std::min(b.window_begin, timeline.ops[i].start);
        b.window_end = std::max(b.window_end, timeline.ops[i].end);
    }
    // Rank 0 means idle; higher ranks win.
    const auto rank = [](Category c) {
        switch (c) {
            case Category::VMM: return 4;
            case Category::LSTMOps: return 3;
            case Category::Other: return 2;
            case Category::DataMovement: return 1;
            default: return 0;
        }
    };
    const Category by_rank[] = {Category::Contention, Category::DataMovement, Category::Other, Category::LSTMOps,
                                Category::VMM};
    std::vector<int> level(static_cast<std::size_t>(b.total()), 0);
    for (int i = first; i < last; ++i) {
        const int r = rank(graph.ops[i].category);
        for (auto c = timeline.ops[i].start; c < timeline.ops[i].end; ++c) {
            auto& l = level[static_cast<std::size_t>(c - b.window_begin)];
            l = std::max(l, r);
        }
    }
    for (int l : level) ++b.cycles[static_cast<int>(by_rank[l])];
    return b;
}

std::int64_t critical_path(const JobGraph& graph) {
    std::vector<std::int64_t> finish(graph.ops.size(), 0);
    std::int64_t best = 0;
    for (const auto& op : graph.ops) {
        std::int64_t start = 0;
        for (int p : op.preds) start = std::max(start, finish[p]);
        finish[op.id] = start + op.latency;
        best = std::max(best, finish[op.id]);
    }
    return best;
}

// ---------------------------------------------------------------------------
// Reporting

double Stats::movement_share() const {
    return breakdown.fraction(Category::DataMovement) + breakdown.fraction(Category::Contention);
}

json Stats::to_json() const {
    json bd = json::object();
    for (int c = 0; c < kCategories; ++c) {
        bd[to_string(static_cast<Category>(c))] = breakdown.fraction(static_cast<Category>(c));
    }
    return json{{"schema", "cimcall-stats"},
                {"version", 1},
                {"n_tokens", n_tokens},
                {"ops_per_token", ops_per_token},
                {"makespan_cycles", makespan_cycles},
                {"seconds", seconds},
                {"energy_j", energy_j},
                {"frames_per_s", frames_per_s},
                {"bases_per_frame", bases_per_frame},
                {"bases_per_s", bases_per_s},
                {"power_w", power_w},
                {"tops", tops},
                {"bps_per_w", bases_per_joule},
                {"bps_per_mm2", bps_per_mm2},
                {"area_mm2", area_mm2},
                {"mean_token_gap_cycles", mean_token_gap_cycles},
                {"breakdown_token", breakdown.token},
                {"breakdown_window_cycles", breakdown.total()},
                {"breakdown", bd},
                {"movement_share", movement_share()}};
}

Stats report(const JobGraph& graph, const Timeline& timeline, const ReportParams& params) {
    if (!(params.samples_per_base > 0.0) || params.samples_per_frame <= 0 || !(params.clock_hz > 0.0) ||
        !(params.area_mm2 > 0.0)) {
        throw ConfigError("report: samples per frame/base, clock and area must be positive");
    }
    Stats s;
    s.n_tokens = graph.n_tokens;
    s.ops_per_token = graph.ops_per_token;
    s.makespan_cycles = timeline.makespan;
    s.seconds = static_cast<double>(timeline.makespan) / params.clock_hz;
    s.energy_j = timeline.energy_j;
    s.area_mm2 = params.area_mm2;
    s.bases_per_frame = params.samples_per_frame / params.samples_per_base;
    s.breakdown = timeline.breakdown;
    if (graph.n_tokens == 0 || timeline.makespan == 0) return s;

    const auto& te = timeline.token_end;
    if (graph.n_tokens >= 2 && te.back() > te.front()) {
        s.mean_token_gap_cycles = static_cast<double>(te.back() - te.front()) / (graph.n_tokens - 1);
    } else {
        s.mean_token_gap_cycles = static_cast<double>(timeline.makespan);
    }
    s.frames_per_s = params.clock_hz / s.mean_token_gap_cycles;
    s.bases_per_s = s.frames_per_s * s.bases_per_frame;
    s.power_w = s.energy_j / s.seconds;
    std::int64_t macs = 0;
    for (const auto& op : graph.ops) macs += op.macs;
    s.tops = static_cast<double>(macs) / s.seconds / 1e12;
    s.bases_per_joule = s.power_w > 0.0 ? s.bases_per_s / s.power_w : 0.0;
    s.bps_per_mm2 = s.bases_per_s / params.area_mm2;
    return s;
}

void write_trace(std::ostream& os, const JobGraph& graph, const Timeline& timeline) {
    os << json{{"schema", "cimcall-trace"}, {"version", 1}, {"n_tokens", graph.n_tokens}}.dump() << '\n';
    for (const auto& op : graph.ops) {
        std::string res;
        for (int r : op.resources) {
            if (!res.empty()) res += '+';
            res += graph.resource_names[r];
        }
        const auto& t = timeline.ops[op.id];
        os << json{{"id", op.id},
                   {"token", op.token},
                   {"kind", to_string(op.kind)},
                   {"layer", op.layer},
                   {"resource", res},
                   {"start_cycle", t.start},
                   {"end_cycle", t.end},
                   {"energy_fJ", op.energy_j * 1e15}}
                  .dump()
           << '\n';
    }
}

PeakCompute peak_compute(int tile_rows, int tile_cols, int vmm_cycles, double clock_hz, int n_tiles,
                         double area_mm2) {
    PeakCompute p;
    const double seconds = vmm_cycles / clock_hz;
    p.tops_per_tile = static_cast<double>(tile_rows) * tile_cols / seconds / 1e12;
    p.tops_total = p.tops_per_tile * n_tiles;
    p.tops_per_mm2 = area_mm2 > 0.0 ? p.tops_total / area_mm2 : 0.0;
    return p;
}

}  // namespace cimcall::meshsim
