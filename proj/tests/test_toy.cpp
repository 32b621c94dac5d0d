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

#include "toy.hpp"

using namespace cimcall;
namespace ex = cimcall::experiments;

namespace {

const toy::Fixture& fixture() {
    static const toy::Fixture f;
    return f;
}

}  // namespace

TEST_CASE("toy fixture loads") {
    const auto& f = fixture();
    CHECK(f.spf() == 5);
    CHECK(f.pore.k == 3);
    CHECK(f.graph.output_width() == 20);
    CHECK(f.config.pipeline.plan.chunk_size == 500);
}

TEST_CASE("bounded-run sequences respect the run limit") {
    Rng rng(3);
    const auto s = toy::bounded_run_sequence(5000, 3, rng);
    int run = 1;
    for (std::size_t i = 1; i < s.size(); ++i) {
        run = s[i] == s[i - 1] ? run + 1 : 1;
        REQUIRE(run <= 3);
    }
}

TEST_CASE("noise-free end-to-end identity") {
    const auto e = toy::noise_free_identity(fixture(), 60, 300, 2026);
    int perfect = 0;
    for (double a : e.accuracy) perfect += a == 1.0;
    MESSAGE("perfect reads " << perfect << "/" << e.accuracy.size() << ", mean " << e.mean);
    CHECK(e.mean == 1.0);
}

TEST_CASE("reads from the fixture are called well by every decoder") {
    const auto& f = fixture();
    auto reads = f.reads();
    reads.resize(40);
    const auto plan = f.config.pipeline.plan;
    const auto frames = ex::infer_reads(reads, plan, ex::reference_infer(f.graph));
    const double full = ex::evaluate_frames(reads, frames, plan, f.spf(), {ex::DecoderKind::Full, {}}).mean;
    const double la = ex::evaluate_frames(reads, frames, plan, f.spf(), {ex::DecoderKind::LookAround, {4, 1}}).mean;
    const double greedy = ex::evaluate_frames(reads, frames, plan, f.spf(), {ex::DecoderKind::Greedy, {}}).mean;
    MESSAGE("full " << full << " lookaround(4,1) " << la << " greedy " << greedy);
    CHECK(full > 0.9);
    CHECK(la > 0.9);
    CHECK(greedy > 0.5);
}

TEST_CASE("lookaround accuracy rises with the TP window") {
    const auto& f = fixture();
    const auto t = toy::la_trend(f, f.reads());
    for (const auto& c : t.cells) MESSAGE("(" << c.l_tp << "," << c.l_mlp << ") " << c.accuracy);
    CHECK(t.cells.size() == 16);
    CHECK(t.cells.front().per_read.size() >= 200);
    CHECK(t.tp_monotone);
    CHECK(t.tp_beats_mlp);
}

TEST_CASE("accuracy under drift") {
    const auto& f = fixture();
    const auto reads = f.reads();
    const auto t = toy::drift_trend(f, reads);
    for (const auto& p : t.series) MESSAGE("t=" << p.elapsed_s << " accuracy " << p.accuracy);
    for (const auto& r : t.day) MESSAGE(r.config << " " << r.layer << " " << r.accuracy);
    REQUIRE(t.series.size() == 4);
    CHECK(t.non_increasing);
    // One day of drift costs accuracy relative to the first read.
    CHECK(t.series[2].accuracy < t.series[0].accuracy);

    REQUIRE(t.day.size() == 3);
    CHECK(t.day[0].config == "all_digital");
    CHECK(t.day[1].config == "all_analog");
    CHECK(t.day[2].layer == f.graph.compute_layers().front());
    CHECK(t.first_layer_helps);
    CHECK(t.day[2].accuracy <= t.day[0].accuracy + toy::kDriftBand);
    // The all-digital configuration reads no devices at all.
    const double ref =
        ex::evaluate(reads, f.config.pipeline.plan, f.spf(), ex::reference_infer(f.graph), f.config.decoder).mean;
    CHECK(t.day[0].accuracy == ref);
}

TEST_CASE("drift series is deterministic and starts at reference level without noise") {
    const auto& f = fixture();
    auto reads = f.reads();
    reads.resize(50);
    const auto& plan = f.config.pipeline.plan;
    const auto cal = analog::calibrate(f.graph, ex::calibration_chunks(reads, plan, 16));
    const auto mapping = config::build_mapping(f.config, f.graph);

    const auto noisy = analog::program_network(f.graph, mapping, f.config.device, cal, 3);
    const std::vector<double> times{20.0, 86400.0};
    const auto a = ex::drift_sweep(noisy, reads, plan, f.config.decoder, times, 11);
    const auto b = ex::drift_sweep(noisy, reads, plan, f.config.decoder, times, 11);
    CHECK(a[0].per_read == b[0].per_read);
    CHECK(a[1].per_read == b[1].per_read);

    auto quiet = f.config.device;
    quiet.sigma_prog_us = 0.0;
    quiet.sigma_read_us = 0.0;
    const auto clean = analog::program_network(f.graph, mapping, quiet, cal, 3);
    const auto at_t0 = ex::drift_sweep(clean, reads, plan, f.config.decoder, {quiet.t0_s}, 11);
    const double ref = ex::evaluate(reads, plan, f.spf(), ex::reference_infer(f.graph), f.config.decoder).mean;
    MESSAGE("noise-free analog at t0 " << at_t0[0].accuracy << " reference " << ref);
    CHECK(std::abs(at_t0[0].accuracy - ref) <= toy::kDriftBand);
}

TEST_CASE("noise-free analog calls match the reference on most reads") {
    const auto& f = fixture();
    auto reads = f.reads();
    reads.resize(100);
    auto device = f.config.device;
    device.sigma_prog_us = 0.0;
    device.sigma_read_us = 0.0;
    device.drift_nu = 0.0;
    const auto& plan = f.config.pipeline.plan;
    const auto cal = analog::calibrate(f.graph, ex::calibration_chunks(reads, plan, 16));
    const auto mapping = config::build_mapping(f.config, f.graph);
    const auto sys = analog::program_network(f.graph, mapping, device, cal, 1);
    const auto ana = ex::evaluate(reads, plan, f.spf(), ex::analog_infer(sys, device.t0_s, 1), f.config.decoder);
    const auto ref = ex::evaluate(reads, plan, f.spf(), ex::reference_infer(f.graph), f.config.decoder);
    int same = 0;
    for (std::size_t i = 0; i < reads.size(); ++i) same += ana.calls[i] == ref.calls[i];
    MESSAGE("identical calls " << same << "/100, analog " << ana.mean << " reference " << ref.mean);
    CHECK(same >= 95);
}
