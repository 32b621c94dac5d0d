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

#include <algorithm>
#include <cmath>

#include "cimcall/analog.hpp"
#include "cimcall/experiments.hpp"
#include "support.hpp"

using namespace cimcall;
using dnn::LayerKind;

namespace {

pcm::DeviceParams noise_free() {
    pcm::DeviceParams d;
    d.sigma_prog_us = 0.0;
    d.sigma_read_us = 0.0;
    return d;
}

/// conv(1->8, k5) swish, conv(8->16, k19, s5) swish, fc(16->20) clamp.
dnn::NetworkGraph three_layer_net(std::uint64_t seed) {
    dnn::NetworkGraph g;
    g.name = "three-layer";
    g.layers.push_back(dnn::make_conv(1, 8, 5, 1, 2, true));
    g.layers.push_back(dnn::make_swish());
    g.layers.push_back(dnn::make_conv(8, 16, 19, 5, 9, true));
    g.layers.push_back(dnn::make_swish());
    g.layers.push_back(dnn::make_fc(16, 20));
    g.layers.push_back(dnn::make_clamp(-5.0f, 5.0f));
    dnn::randomize(g, seed);
    g.validate();
    return g;
}

std::vector<float> random_chunk(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<float> d(0.0f, 1.0f);
    std::vector<float> x(n);
    for (auto& v : x) v = d(rng);
    return x;
}

mapper::MappingStrategy all_analog() {
    mapper::MappingStrategy s;
    s.first_conv_digital = false;
    return s;
}

/// Largest sum of |w| feeding one output of a compute layer.
double row_l1(const dnn::LayerSpec& layer) {
    const std::size_t outs = static_cast<std::size_t>(layer.matrix_cols());
    const std::size_t per = layer.weights.size() / outs;
    double best = 0.0;
    for (std::size_t o = 0; o < outs; ++o) {
        double s = 0.0;
        for (std::size_t i = 0; i < per; ++i) s += std::abs(layer.weights[o * per + i]);
        best = std::max(best, s);
    }
    return best;
}

double bias_absmax(const dnn::LayerSpec& layer) {
    double m = 0.0;
    for (float b : layer.bias) m = std::max(m, static_cast<double>(std::abs(b)));
    return m;
}

/// Worst-case deviation of noise-free analog execution from the float
/// reference for a network of conv/FC blocks, accumulated block by block:
/// input rounding (half an input step) passes through the weights' row L1
/// norm, the ADC adds half an output step, binary16 rounding adds at most
/// 2^-11 of the magnitude per rounding, the block's elementwise tail scales
/// errors by its Lipschitz constant, and the inter-block code adds half an
/// activation step. Saturating quantizers only move values toward the
/// calibrated range, so they cannot enlarge the error.
double quantization_error_bound(const analog::ProgrammedSystem& sys, const analog::Calibration& cal) {
    const auto& g = sys.graph;
    const auto compute = g.compute_layers();
    const double half_ulp = std::ldexp(1.0, -11);
    double e = 0.0;
    for (std::size_t ci = 0; ci < compute.size(); ++ci) {
        const int li = compute[ci];
        const auto& st = sys.state(li);
        const auto& r = cal.at(li);
        const auto& layer = g.layers[li];
        const double magnitude = r.matvec_absmax + bias_absmax(layer) + e + 1.0;
        double mv = row_l1(layer) * (e + st.in_scale / 2.0) + st.out_scale / 2.0 + 3 * half_ulp * magnitude;
        const int next = ci + 1 < compute.size() ? compute[ci + 1] : static_cast<int>(g.layers.size());
        for (int a = li + 1; a < next; ++a) {
            const double lipschitz = g.layers[a].kind() == LayerKind::Swish ? 1.0998 : 1.0;
            mv = lipschitz * mv + half_ulp * (magnitude * lipschitz + mv);
        }
        e = (mv + st.act_scale / 2.0) * (1.0 + 1e-5);
    }
    return e;
}

}  // namespace

TEST_CASE("w_max is the largest absolute weight") {
    auto fc = dnn::make_fc(2, 2);
    fc.weights = {-0.3f, 0.8f, 0.1f, -0.2f};
    CHECK(analog::weight_absmax(fc) == doctest::Approx(0.8));
    fc.weights = {-0.3f, 0.25f, 0.1f, -0.2f};
    CHECK(analog::weight_absmax(fc) == doctest::Approx(0.3));
    CHECK(analog::weight_absmax(dnn::make_swish()) == 0.0);
}

TEST_CASE("AL-Dorado programming populates 10 of 11 tiles") {
    const auto g = dnn::build_al_dorado(3);
    const auto arch = mapper::ArchDescription::default_arch();
    const auto mapping = mapper::map_network(g, arch);
    const auto cal = analog::calibrate(g, {random_chunk(500, 1)});
    const auto sys = analog::program_network(g, mapping, pcm::DeviceParams{}, cal, 5);
    int populated = 0;
    for (const auto& t : sys.tiles) populated += t.rows_used > 0;
    CHECK(populated == 10);
    CHECK(arch.n_tiles() == 11);
    CHECK(mapping.tiles_used() == 10);
    // The first conv stays digital by default; every other compute layer is analog.
    for (int li : g.compute_layers()) CHECK(sys.state(li).analog == (li != 0));
}

TEST_CASE("noise-free analog inference stays within the accumulated quantization bound") {
    const auto g = three_layer_net(21);
    const auto mapping = mapper::map_network(g, mapper::ArchDescription::default_arch(), all_analog());
    const auto device = noise_free();
    for (std::uint64_t s = 0; s < 4; ++s) {
        const auto chunk = random_chunk(400, 100 + s);
        const auto cal = analog::calibrate(g, {chunk});
        const auto sys = analog::program_network(g, mapping, device, cal, 9);
        REQUIRE(sys.any_analog());
        const auto ref = dnn::infer_reference(g, chunk);
        const auto ana = analog::infer_analog(sys, chunk, device.t0_s, 77);
        REQUIRE(ref.scores.size() == ana.scores.size());
        double worst = 0.0;
        for (std::size_t i = 0; i < ref.scores.size(); ++i) worst = std::max(worst, std::abs(ref.scores[i] - ana.scores[i]));
        const double bound = quantization_error_bound(sys, cal);
        INFO("worst " << worst << " bound " << bound);
        CHECK(worst <= bound);
        // Quantization is not a no-op, and the bound is informative.
        CHECK(worst > 0.0);
        CHECK(bound < 1.0);
    }
}

TEST_CASE("noise-free analog execution ignores the read seed") {
    const auto g = three_layer_net(4);
    const auto mapping = mapper::map_network(g, mapper::ArchDescription::default_arch(), all_analog());
    const auto chunk = random_chunk(300, 2);
    const auto sys = analog::program_network(g, mapping, noise_free(), analog::calibrate(g, {chunk}), 1);
    CHECK(analog::infer_analog(sys, chunk, 20.0, 1).scores == analog::infer_analog(sys, chunk, 20.0, 2).scores);
}

TEST_CASE("analog inference is deterministic per seed and time") {
    const auto g = three_layer_net(8);
    const auto mapping = mapper::map_network(g, mapper::ArchDescription::default_arch(), all_analog());
    const auto chunk = random_chunk(300, 3);
    const auto cal = analog::calibrate(g, {chunk});
    const auto a = analog::program_network(g, mapping, pcm::DeviceParams{}, cal, 42);
    const auto b = analog::program_network(g, mapping, pcm::DeviceParams{}, cal, 42);
    const auto fa = analog::infer_analog(a, chunk, 3600.0, 5);
    CHECK(fa.scores == analog::infer_analog(b, chunk, 3600.0, 5).scores);
    CHECK(fa.scores != analog::infer_analog(a, chunk, 3600.0, 6).scores);
    const auto c = analog::program_network(g, mapping, pcm::DeviceParams{}, cal, 43);
    CHECK(fa.scores != analog::infer_analog(c, chunk, 3600.0, 5).scores);
}

TEST_CASE("reading before programming is an error") {
    const auto g = three_layer_net(8);
    const auto mapping = mapper::map_network(g, mapper::ArchDescription::default_arch(), all_analog());
    const auto chunk = random_chunk(300, 3);
    const auto sys = analog::program_network(g, mapping, pcm::DeviceParams{}, analog::calibrate(g, {chunk}), 1, 100.0);
    CHECK_THROWS_AS(analog::infer_analog(sys, chunk, 50.0, 1), Error);
    CHECK_NOTHROW(analog::infer_analog(sys, chunk, 100.0, 1));
}

TEST_CASE("a piece outside its tile is a capacity error") {
    const auto g = three_layer_net(8);
    auto mapping = mapper::map_network(g, mapper::ArchDescription::default_arch(), all_analog());
    const auto chunk = random_chunk(300, 3);
    const auto cal = analog::calibrate(g, {chunk});
    for (auto& p : mapping.layers) {
        if (p.analog && !p.pieces.empty()) {
            p.pieces[0].row_begin = pcm::kTileDim - 1;
            break;
        }
    }
    CHECK_THROWS_AS(analog::program_network(g, mapping, pcm::DeviceParams{}, cal, 1), MappingError);
}

TEST_CASE("an all-digital system reproduces the float reference exactly") {
    const auto g = three_layer_net(12);
    mapper::MappingStrategy s;
    s.all_digital = true;
    const auto mapping = mapper::map_network(g, mapper::ArchDescription::default_arch(), s);
    const auto chunk = random_chunk(300, 4);
    const auto sys = analog::program_network(g, mapping, pcm::DeviceParams{}, analog::calibrate(g, {chunk}), 1);
    CHECK_FALSE(sys.any_analog());
    CHECK(analog::infer_analog(sys, chunk, 1e6, 3).scores == dnn::infer_reference(g, chunk).scores);
}

TEST_CASE("drift lowers the uncompensated output scale") {
    const auto g = three_layer_net(5);
    const auto mapping = mapper::map_network(g, mapper::ArchDescription::default_arch(), all_analog());
    const auto chunk = random_chunk(300, 6);
    auto cal = analog::calibrate(g, {chunk});
    analog::ExecOptions opt;
    opt.drift_compensation = false;
    const auto sys = analog::program_network(g, mapping, noise_free(), cal, 1, 0.0, opt);
    auto energy = [&](double t) {
        const auto f = analog::infer_analog(sys, chunk, t, 1);
        double s = 0.0;
        for (double v : f.scores) s += v * v;
        return s;
    };
    // With the final clamp inactive, smaller conductances give smaller logits.
    CHECK(energy(86400.0 * 10) < energy(20.0));
}

TEST_CASE("quantize saturates and rounds to nearest") {
    CHECK(analog::quantize(0.26f, 0.1f, 8) == 3);
    CHECK(analog::quantize(-0.24f, 0.1f, 8) == -2);
    CHECK(analog::quantize(1000.0f, 0.1f, 8) == 127);
    CHECK(analog::quantize(-1000.0f, 0.1f, 8) == -128);
    CHECK(analog::quantize(1000.0f, 1.0f, 10) == 511);
}

TEST_CASE("calibration records per-layer ranges") {
    const auto g = three_layer_net(2);
    const auto chunk = random_chunk(300, 9);
    const auto cal = analog::calibrate(g, {chunk});
    REQUIRE(cal.layers.size() == 3);
    float in_max = 0.0f;
    for (float v : chunk) in_max = std::max(in_max, std::abs(v));
    CHECK(cal.at(0).input_absmax == in_max);
    const auto trace = dnn::trace_reference(g, chunk);
    float out_max = 0.0f;
    for (float v : trace.back().data) out_max = std::max(out_max, std::abs(v));
    CHECK(cal.at(4).output_absmax == out_max);
    CHECK_THROWS_AS(cal.at(1), Error);
    CHECK_THROWS_AS(analog::calibrate(g, {}), InputError);
}
