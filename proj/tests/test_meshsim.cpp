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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>
#include <sstream>

#include "cimcall/meshsim.hpp"
#include "support.hpp"

using namespace cimcall;
using namespace cimcall::meshsim;
using mapper::ArchDescription;
using mapper::NodeKind;

namespace {

/// Hand-built graph helper: ops with explicit resources and latencies.
struct ManualGraph {
    JobGraph g;
    explicit ManualGraph(int n_resources) {
        for (int i = 0; i < n_resources; ++i) g.resource_names.push_back("r" + std::to_string(i));
        g.n_tokens = 1;
    }
    int op(std::vector<int> res, int latency, double energy, std::vector<int> preds = {}, int token = 0) {
        MicroOp o;
        o.id = static_cast<int>(g.ops.size());
        o.token = token;
        o.resources = std::move(res);
        o.latency = latency;
        o.energy_j = energy;
        o.preds = std::move(preds);
        g.ops.push_back(o);
        g.ops_per_token = static_cast<int>(g.ops.size());
        return o.id;
    }
};

void check_exclusive(const JobGraph& g, const Timeline& t) {
    std::map<int, std::vector<std::pair<std::int64_t, std::int64_t>>> per_res;
    for (const auto& op : g.ops) {
        CHECK(t.ops[op.id].end - t.ops[op.id].start == op.latency);
        for (int p : op.preds) CHECK(t.ops[p].end <= t.ops[op.id].start);
        for (int r : op.resources) per_res[r].push_back({t.ops[op.id].start, t.ops[op.id].end});
    }
    int overlaps = 0;
    for (auto& [r, iv] : per_res) {
        std::sort(iv.begin(), iv.end());
        for (std::size_t i = 1; i < iv.size(); ++i) overlaps += iv[i].first < iv[i - 1].second;
    }
    CHECK(overlaps == 0);
}

struct DefaultRun {
    dnn::NetworkGraph net = dnn::build_al_dorado(1);
    ArchDescription arch = ArchDescription::default_arch();
    mapper::Mapping mapping = mapper::map_network(net, arch);
    CostTable costs;
};

}  // namespace

TEST_CASE("cost table defaults and json") {
    const CostTable c;
    CHECK(c.vmm_energy_nj == 5.2);
    CHECK(c.vmm_cycles == 40);
    CHECK(c.elementwise_energy_pj == 1.24);
    CHECK(c.elementwise_cycles == 3);
    CHECK(c.lut_energy_pj == 1.49);
    CHECK(c.lut_cycles == 4);
    CHECK(c.lstm_aux_energy_pj == 19.3);
    CHECK(c.lstm_aux_cycles == 25);
    CHECK(c.dpu_sram_bit_energy_fj == 2.5);
    CHECK(c.mesh_ew_bit_energy_fj == 44.9);
    CHECK(c.mesh_ns_bit_energy_fj == 81.4);
    CHECK(c.mesh_turn_bit_energy_fj == 126.0);
    CHECK(c.mesh_leg_cycles == 3);
    CHECK(c.decode_energy_nj == 0.16);
    CHECK(c.decode_cycles == 11);
    CHECK(c.clock_hz == 1e9);
    CHECK_NOTHROW(c.validate());
    CHECK(CostTable::from_json(c.to_json()) == c);

    auto j = c.to_json();
    j["vmm_energy"] = 1.0;
    CHECK_THROWS_AS(CostTable::from_json(j), ConfigError);
    auto bad = c;
    bad.decode_cycles = 9;  // inconsistent with l_tp=4, l_mlp=1
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.lut_cycles = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("scheduler on hand-built graphs") {
    const double vmm = 5.2e-9;
    SUBCASE("independent VMMs on different tiles run in parallel") {
        ManualGraph m(2);
        m.op({0}, 40, vmm);
        m.op({1}, 40, vmm);
        const auto t = schedule(m.g);
        CHECK(t.makespan == 40);
    }
    SUBCASE("two VMMs on one tile serialize") {
        ManualGraph m(1);
        m.op({0}, 40, vmm);
        m.op({0}, 40, vmm);
        const auto t = schedule(m.g);
        CHECK(t.makespan == 80);
        CHECK(t.energy_j == doctest::Approx(10.4e-9).epsilon(1e-12));
        check_exclusive(m.g, t);
    }
    SUBCASE("priority follows op id") {
        ManualGraph m(1);
        m.op({0}, 5, 0.0);
        m.op({0}, 7, 0.0);
        const auto t = schedule(m.g);
        CHECK(t.ops[0].start == 0);
        CHECK(t.ops[1].start == 5);
    }
    SUBCASE("a blocked op does not stall a later independent op") {
        ManualGraph m(2);
        const int a = m.op({0}, 10, 0.0);
        m.op({0}, 3, 0.0);
        m.op({1}, 4, 0.0, {});
        m.op({0, 1}, 2, 0.0, {a});
        const auto t = schedule(m.g);
        CHECK(t.ops[2].start == 0);
        CHECK(t.ops[3].start == 13);
        check_exclusive(m.g, t);
    }
    SUBCASE("empty graph") {
        JobGraph g;
        const auto t = schedule(g);
        CHECK(t.makespan == 0);
        CHECK(t.energy_j == 0.0);
        const auto s = report(g, t, {});
        CHECK(s.bases_per_s == 0.0);
        CHECK(s.energy_j == 0.0);
    }
}

TEST_CASE("mesh transfer cost") {
    ArchDescription a;
    a.width = 3;
    a.height = 3;
    for (int y = 0; y < 3; ++y) {
        for (int x = 0; x < 3; ++x) a.nodes.push_back({NodeKind::CiMTile, x, y});
    }
    const CostTable c;
    SUBCASE("two east-west hops, one leg") {
        const auto t = transfer_cost(a, a.node_at(0, 0), {a.node_at(2, 0)}, 512 * 10, c);
        CHECK(t.x_hops == 2);
        CHECK(t.y_hops == 0);
        CHECK(t.turns == 0);
        CHECK(t.latency == 3);
        CHECK(t.energy_j == doctest::Approx(5120 * 2 * 44.9e-15).epsilon(1e-12));
        CHECK(t.energy_j * 1e12 == doctest::Approx(459.776).epsilon(1e-9));
        REQUIRE(t.channels.size() == 1);
        CHECK(t.channels[0] == channel_resource(a, 0, 0, 1, 0));
    }
    SUBCASE("turning route") {
        const auto t = transfer_cost(a, a.node_at(0, 0), {a.node_at(1, 2)}, 100, c);
        CHECK(t.x_hops == 1);
        CHECK(t.y_hops == 2);
        CHECK(t.turns == 1);
        CHECK(t.latency == 9);  // X leg, turn, Y leg
        CHECK(t.energy_j == doctest::Approx(100 * (44.9 + 2 * 81.4 + 126) * 1e-15).epsilon(1e-12));
        auto hop = c;
        hop.mesh_latency_mode = MeshLatencyMode::PerHop;
        CHECK(transfer_cost(a, a.node_at(0, 0), {a.node_at(1, 2)}, 100, hop).latency == 12);
    }
    SUBCASE("multicast shares the common prefix") {
        const auto one = transfer_cost(a, a.node_at(0, 0), {a.node_at(2, 0)}, 10, c);
        const auto both = transfer_cost(a, a.node_at(0, 0), {a.node_at(1, 0), a.node_at(2, 0)}, 10, c);
        CHECK(both.x_hops == 2);
        CHECK(both.energy_j == one.energy_j);
        const auto fan = transfer_cost(a, a.node_at(1, 1), {a.node_at(0, 1), a.node_at(2, 1)}, 10, c);
        CHECK(fan.x_hops == 2);
        CHECK(fan.channels.size() == 2);  // east and west of row 1
    }
    SUBCASE("local destination is free") {
        const auto t = transfer_cost(a, 4, {4}, 1000, c);
        CHECK(t.latency == 0);
        CHECK(t.energy_j == 0.0);
    }
}

TEST_CASE("co-located fully connected layer") {
    dnn::NetworkGraph g;
    g.input_channels = 64;
    g.layers = {dnn::make_fc(64, 20)};
    dnn::randomize(g, 1);
    ArchDescription a;
    a.width = 2;
    a.height = 2;
    a.nodes = {{NodeKind::SignalBuffer, 0, 0}, {NodeKind::CiMTile, 1, 0}, {NodeKind::DPU, 0, 1}, {NodeKind::LADecoder, 1, 1}};
    const auto m = mapper::map_network(g, a);
    JobOptions o;
    o.io = false;
    const auto jg = build_job_graph(g, m, a, 1, CostTable{}, o);
    std::map<OpKind, int> count;
    for (const auto& op : jg.ops) ++count[op.kind];
    CHECK(jg.ops.size() == 2);
    CHECK(count[OpKind::VMM] == 1);
    CHECK(count[OpKind::BatchNormAux] == 1);
    CHECK(count[OpKind::MeshTransfer] == 0);
}

TEST_CASE("lstm recurrence crosses tokens") {
    dnn::NetworkGraph g;
    g.input_channels = 32;
    g.layers = {dnn::make_lstm(32, 32, false)};
    dnn::randomize(g, 1);
    const auto a = ArchDescription::default_arch();
    const auto m = mapper::map_network(g, a);
    const auto jg = build_job_graph(g, m, a, 2, CostTable{});
    int aux0 = -1, vmm1 = -1;
    for (const auto& op : jg.ops) {
        if (op.token == 0 && op.kind == OpKind::LSTMAux) aux0 = op.id;
        if (op.token == 1 && op.kind == OpKind::VMM) vmm1 = op.id;
    }
    REQUIRE(aux0 >= 0);
    REQUIRE(vmm1 >= 0);
    // token 1's VMM waits (directly or through the state multicast) on token 0's update
    std::vector<bool> reach(jg.ops.size(), false);
    std::vector<int> stack{vmm1};
    while (!stack.empty()) {
        const int id = stack.back();
        stack.pop_back();
        for (int p : jg.ops[id].preds) {
            if (!reach[p]) {
                reach[p] = true;
                stack.push_back(p);
            }
        }
    }
    CHECK(reach[aux0]);
    const auto t = schedule(jg);
    CHECK(t.ops[vmm1].start >= t.ops[aux0].end);
}

TEST_CASE("AL-Dorado job graph") {
    const DefaultRun r;
    const auto one = build_job_graph(r.net, r.mapping, r.arch, 1, r.costs);
    // Hand walk of one token on the default mapping:
    //   signal-buffer read                                            1
    //   conv1 on DPU: transfer in, SRAM write, digital VMM,
    //                 swish, clamp                                    5
    //   conv2, conv3 on a tile each: transfer in, VMM, gates out,
    //                 SRAM write, swish, clamp                        6 + 6
    //   three single-tile LSTMs: transfer in, VMM, gates out,
    //                 SRAM write, LSTM update                         5 * 3
    //   two LSTMs split over two tiles: transfer in, 2 VMM,
    //                 2 gates out, SRAM write, LSTM update            7 * 2
    //   FC: transfer in, VMM, gates out, SRAM write, bias, clamp      6
    //   transfer to decoder, decode                                   2
    const int hand = 1 + 5 + 6 + 6 + 5 * 3 + 7 * 2 + 6 + 2;
    CHECK(hand == 55);
    CHECK(one.ops_per_token == hand);
    CHECK(static_cast<int>(one.ops.size()) == hand);
    std::map<OpKind, int> count;
    for (const auto& op : one.ops) ++count[op.kind];
    CHECK(count[OpKind::VMM] == 10);
    CHECK(count[OpKind::DigitalVMM] == 1);
    CHECK(count[OpKind::LSTMAux] == 5);
    CHECK(count[OpKind::Decode] == 1);

    // The split layer's two gate transfers share a column channel, so a
    // lone token can still wait on a resource.
    const auto t1 = schedule(one);
    std::int64_t waited = 0;
    for (const auto& o : t1.ops) waited += o.start - o.ready;
    CHECK(t1.makespan >= critical_path(one));
    CHECK(t1.makespan <= critical_path(one) + waited);
}

TEST_CASE("single token without shared channels runs on its critical path") {
    dnn::NetworkGraph g;
    g.layers = {dnn::make_conv(1, 8, 5, 1, 2), dnn::make_swish(), dnn::make_conv(8, 16, 9, 5, 4),
                dnn::make_swish(), dnn::make_lstm(16, 64, true), dnn::make_lstm(64, 64, false), dnn::make_fc(64, 20)};
    dnn::randomize(g, 4);
    const auto a = ArchDescription::default_arch();
    const auto jg = build_job_graph(g, mapper::map_network(g, a), a, 1, CostTable{});
    const auto t = schedule(jg);
    CHECK(t.makespan == critical_path(jg));
}

TEST_CASE("AL-Dorado schedule invariants") {
    const DefaultRun r;
    const int n = 120;
    const auto jg = build_job_graph(r.net, r.mapping, r.arch, n, r.costs);
    const auto t = schedule(jg);
    check_exclusive(jg, t);

    double sum = 0.0, lat = 0.0;
    for (const auto& op : jg.ops) {
        sum += op.energy_j;
        lat += op.latency;
    }
    CHECK(t.energy_j == sum);
    CHECK(t.makespan >= critical_path(jg));
    CHECK(static_cast<double>(t.makespan) <= lat);

    // determinism
    const auto t2 = schedule(build_job_graph(r.net, r.mapping, r.arch, n, r.costs));
    CHECK(t2.makespan == t.makespan);
    bool same = true;
    for (std::size_t i = 0; i < t.ops.size(); ++i) same = same && t.ops[i].start == t2.ops[i].start;
    CHECK(same);

    // breakdown covers its window exactly
    std::int64_t acc = 0;
    for (auto c : t.breakdown.cycles) acc += c;
    CHECK(acc == t.breakdown.total());

    // steady state: completion gaps settle after the pipeline fills
    std::vector<double> gaps;
    for (int k = 3 * jg.inflight + 1; k < n; ++k) gaps.push_back(static_cast<double>(t.token_end[k] - t.token_end[k - 1]));
    const auto [mean, sd] = testsupport::mean_sd(gaps);
    MESSAGE("steady-state gap " << mean << " cycles, sd " << sd);
    CHECK(sd / mean < 0.05);
}

TEST_CASE("AL-Dorado report") {
    const DefaultRun r;
    const auto jg = build_job_graph(r.net, r.mapping, r.arch, 200, r.costs);
    const auto t = schedule(jg);
    const auto s = report(jg, t, {r.net.samples_per_frame(), 10.0, r.costs.clock_hz, 25.0});
    MESSAGE("bases/s " << s.bases_per_s << " power " << s.power_w << " W, movement share " << s.movement_share());
    MESSAGE(s.to_json().dump());
    CHECK(s.bases_per_s >= 204800.0);
    CHECK(s.movement_share() >= 0.40);
    CHECK(s.movement_share() <= 0.75);

    std::ostringstream trace;
    write_trace(trace, jg, t);
    std::istringstream in(trace.str());
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        if (lines == 0) CHECK(j.at("version") == 1);
        else CHECK(j.at("end_cycle").get<std::int64_t>() > j.at("start_cycle").get<std::int64_t>());
        ++lines;
    }
    CHECK(lines == static_cast<int>(jg.ops.size()) + 1);
}

TEST_CASE("peak compute") {
    const auto p = peak_compute(512, 512, 40, 1e9, 11, 25.0);
    CHECK(p.tops_per_tile == doctest::Approx(6.5536));
    CHECK(std::round(p.tops_per_tile * 100) / 100 == doctest::Approx(6.55));
    CHECK(p.tops_total == doctest::Approx(72.09).epsilon(1e-3));
    CHECK(std::round(p.tops_per_mm2 * 100) / 100 == doctest::Approx(2.88));
}
