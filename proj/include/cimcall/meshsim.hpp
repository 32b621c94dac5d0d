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
 * @file meshsim.hpp
 * @brief Cycle-level simulation of a mapped network on the mesh.
 *
 * A mapped network is expanded into micro-operations per token (one output
 * frame). Each op claims one or more resources (a node, or the mesh channels
 * a transfer crosses) for its whole latency. The scheduler is an
 * event-driven list scheduler: whenever resources free up, ready ops are
 * tried in (token, op id) order and started if all their resources are free.
 *
 * Mesh channels: one per grid row per direction (east, west) and one per
 * grid column per direction (north, south). Routing is X then Y.
 */

#ifndef CIMCALL_MESHSIM_HPP
#define CIMCALL_MESHSIM_HPP

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cimcall/decoder.hpp"
#include "cimcall/dnn.hpp"
#include "cimcall/mapper.hpp"
#include "json.hpp"

namespace cimcall::meshsim {

enum class OpKind { VMM, DigitalVMM, BatchNormAux, SwishLUT, LSTMAux, Decode, SRAMAccess, MeshTransfer };

const char* to_string(OpKind kind);

/// Runtime breakdown buckets.
enum class Category { VMM, LSTMOps, Other, DataMovement, Contention };
inline constexpr int kCategories = 5;

const char* to_string(Category c);

enum class MeshLatencyMode {
    PerLeg,  ///< a fixed charge per straight leg and per turn
    PerHop,  ///< a fixed charge per router hop and per turn
};

/// Latency and energy parameters. Energies are kept in the units of their
/// key names so that a JSON round trip is exact.
struct CostTable {
    double vmm_energy_nj = 5.2;
    int vmm_cycles = 40;
    double elementwise_energy_pj = 1.24;  ///< batchnorm, add, mul, clamp (per element)
    int elementwise_cycles = 3;
    double lut_energy_pj = 1.49;  ///< swish and other LUT activations (per element)
    int lut_cycles = 4;
    double lstm_aux_energy_pj = 19.3;  ///< gate nonlinearities and state update (per unit)
    int lstm_aux_cycles = 25;
    double dpu_sram_bit_energy_fj = 2.5;
    int dpu_sram_cycles = 1;
    double mesh_ew_bit_energy_fj = 44.9;
    double mesh_ns_bit_energy_fj = 81.4;
    double mesh_turn_bit_energy_fj = 126.0;
    int mesh_leg_cycles = 3;
    MeshLatencyMode mesh_latency_mode = MeshLatencyMode::PerLeg;
    double decode_energy_nj = 0.16;
    int decode_cycles = 11;
    double signal_buffer_bit_energy_fj = 2.5;
    int signal_buffer_cycles = 1;
    double clock_hz = 1e9;
    /// Multiply-accumulate lanes of a DPU when it runs a layer digitally.
    int dpu_mac_lanes = 128;
    int activation_bits = 10;
    int sample_bits = 16;
    decoder::LAParams la;

    /// Throws ConfigError on non-positive entries or when decode_cycles does
    /// not match the decoder cost model for `la`.
    void validate() const;

    nlohmann::json to_json() const;
    /// Rejects unknown keys; missing keys keep their defaults.
    static CostTable from_json(const nlohmann::json& j);

    bool operator==(const CostTable&) const = default;
};

struct MicroOp {
    int id = 0;
    OpKind kind = OpKind::VMM;
    Category category = Category::Other;
    int token = 0;
    int layer = -1;  ///< network layer, -1 for I/O ops
    std::vector<int> resources;
    int latency = 1;
    double energy_j = 0.0;
    std::vector<int> preds;
    std::int64_t bits = 0;  ///< payload for transfers and SRAM accesses
    std::int64_t macs = 0;  ///< multiply-accumulates for VMMs
};

struct JobOptions {
    /// Emit signal-buffer read, input/output transfers and decode.
    bool io = true;
    /// Tokens admitted before the oldest one has been decoded. 0 picks one
    /// token per pipeline stage (compute layers + decoder).
    int max_inflight = 0;
};

struct JobGraph {
    int n_tokens = 0;
    int ops_per_token = 0;
    int inflight = 0;
    std::vector<MicroOp> ops;  ///< token-major; id == index
    std::vector<std::string> resource_names;

    int n_resources() const { return static_cast<int>(resource_names.size()); }
};

/// Cost of one (possibly multicast) transfer; channels are resource ids.
struct TransferCost {
    int latency = 0;
    double energy_j = 0.0;
    int x_hops = 0;  ///< distinct east-west hops in the multicast tree
    int y_hops = 0;
    int turns = 0;
    std::vector<int> channels;
};

/// Resource id of the channel used by a single hop between adjacent
/// grid positions.
int channel_resource(const mapper::ArchDescription& arch, int x0, int y0, int x1, int y1);

/// Multicast from `src` to `dsts` (destinations equal to `src` are ignored).
/// Latency is the slowest destination; energy counts each hop and turn of
/// the union of X-then-Y paths once.
TransferCost transfer_cost(const mapper::ArchDescription& arch, int src, const std::vector<int>& dsts,
                           std::int64_t bits, const CostTable& costs);

/// Expand a mapped network into micro-ops for `n_tokens` frames. Throws
/// MappingError when a route crosses a grid position without a router.
JobGraph build_job_graph(const dnn::NetworkGraph& graph, const mapper::Mapping& mapping,
                         const mapper::ArchDescription& arch, int n_tokens, const CostTable& costs,
                         const JobOptions& options = {});

/// Cycles spent per category inside one token's window, which runs from the
/// start of its first op to the end of its last. Each cycle goes to the
/// highest-priority category among the token's running ops
/// (VMM > LSTMOps > Other > DataMovement); cycles where none of them runs
/// are Contention.
struct Breakdown {
    int token = -1;
    std::int64_t window_begin = 0;
    std::int64_t window_end = 0;
    std::array<std::int64_t, kCategories> cycles{};

    std::int64_t total() const { return window_end - window_begin; }
    double fraction(Category c) const;
};

struct OpTiming {
    std::int64_t ready = 0;
    std::int64_t start = 0;
    std::int64_t end = 0;
};

struct Timeline {
    std::vector<OpTiming> ops;
    std::int64_t makespan = 0;
    double energy_j = 0.0;
    std::vector<std::int64_t> token_end;  ///< completion of each token's last op
    Breakdown breakdown;                  ///< for the middle token
};

Timeline schedule(const JobGraph& graph);

Breakdown token_breakdown(const JobGraph& graph, const Timeline& timeline, int token);

/// Longest latency-weighted path through the dependency graph.
std::int64_t critical_path(const JobGraph& graph);

struct Stats {
    int n_tokens = 0;
    int ops_per_token = 0;
    std::int64_t makespan_cycles = 0;
    double seconds = 0.0;
    double energy_j = 0.0;
    double frames_per_s = 0.0;
    double bases_per_frame = 0.0;
    double bases_per_s = 0.0;
    double power_w = 0.0;
    double tops = 0.0;
    double bases_per_joule = 0.0;  ///< bps/W
    double bps_per_mm2 = 0.0;
    double area_mm2 = 0.0;
    double mean_token_gap_cycles = 0.0;
    Breakdown breakdown;

    /// Data movement plus contention as a share of the breakdown window.
    double movement_share() const;
    nlohmann::json to_json() const;
};

struct ReportParams {
    int samples_per_frame = 5;
    double samples_per_base = 10.0;
    double clock_hz = 1e9;
    double area_mm2 = 25.0;
};

Stats report(const JobGraph& graph, const Timeline& timeline, const ReportParams& params);

/// One JSON object per line: a schema header, then one record per op.
void write_trace(std::ostream& os, const JobGraph& graph, const Timeline& timeline);

struct PeakCompute {
    double tops_per_tile = 0.0;
    double tops_total = 0.0;
    double tops_per_mm2 = 0.0;
};

/// One multiply-accumulate counts as one op.
PeakCompute peak_compute(int tile_rows, int tile_cols, int vmm_cycles, double clock_hz, int n_tiles,
                         double area_mm2);

}  // namespace cimcall::meshsim

#endif  // CIMCALL_MESHSIM_HPP
