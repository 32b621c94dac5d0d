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
#include <filesystem>
#include <random>

#include "cimcall/dnn.hpp"
#include "cimcall/kernels.hpp"
#include "cimcall/weights_io.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace cimcall;
using namespace cimcall::dnn;

TEST_CASE("dorado-fast geometry") {
    const auto g = build_dorado_fast(1);
    REQUIRE(g.layers.front().kind() == LayerKind::Conv1D);
    CHECK(g.layers.front().parameter_count() == 80);
    int lstm = 0;
    for (const auto& l : g.layers) {
        if (l.kind() == LayerKind::LSTM) {
            CHECK(l.as<LstmGeom>().hidden_size == 96);
            ++lstm;
        }
    }
    CHECK(lstm == 5);
    CHECK(g.output_width() == 5 * 64);
    const double total = static_cast<double>(g.parameter_count());
    CHECK(total >= 0.47e6 * 0.85);
    CHECK(total <= 0.47e6 * 1.15);
    CHECK(g.samples_per_frame() == 5);
    CHECK(build_dorado_fast(1, 1).output_width() == 20);
}

TEST_CASE("al-dorado geometry") {
    const auto g = build_al_dorado(1);
    std::vector<int> hidden;
    int clamps = 0;
    for (const auto& l : g.layers) {
        if (l.kind() == LayerKind::LSTM) hidden.push_back(l.as<LstmGeom>().hidden_size);
        if (l.kind() == LayerKind::Clamp) ++clamps;
    }
    CHECK(hidden == std::vector<int>{128, 128, 128, 256, 256});
    CHECK(clamps == 4);
    CHECK(g.output_width() == 20);
    CHECK(g.layers.back().kind() == LayerKind::Clamp);
    const auto total = g.parameter_count();
    CHECK(total >= 1'200'000);
    CHECK(total <= 2'200'000);
    MESSAGE("AL-Dorado parameters: " << total);
}

TEST_CASE("parameter count equals a brute-force count") {
    for (const auto& g : {build_dorado_fast(2), build_al_dorado(2)}) {
        std::size_t n = 0;
        for (const auto& l : g.layers) {
            n += l.weights.size() + l.bias.size();
            CHECK(l.weights.size() == l.expected_weight_count());
            CHECK(l.bias.size() == l.expected_bias_count());
        }
        CHECK(n == g.parameter_count());
    }
    auto lstm = make_lstm(3, 2, false);
    CHECK(lstm.weights.size() == 4 * 2 * 5);
    CHECK(lstm.bias.size() == 8);
    auto fc = make_fc(7, 3);
    CHECK(fc.parameter_count() == 7 * 3 + 3);
}

TEST_CASE("graph validation catches mismatches") {
    NetworkGraph g;
    g.layers.push_back(make_conv(1, 4, 3, 1, 1));
    g.layers.push_back(make_lstm(5, 4, false));
    CHECK_THROWS_AS(g.validate(), ConfigError);
    g.layers.back() = make_lstm(4, 4, false);
    CHECK_NOTHROW(g.validate());
    g.layers.back().weights.pop_back();
    CHECK_THROWS_AS(g.validate(), ConfigError);
}

TEST_CASE("hand-set conv example") {
    NetworkGraph g;
    g.layers.push_back(make_conv(1, 1, 3, 1, 0));
    g.layers[0].weights = {1.0f, 0.0f, -1.0f};
    Activations x{4, 1, {1, 2, 4, 8}};
    const auto y = forward_layer(g.layers[0], x);
    REQUIRE(y.steps == 2);
    CHECK(y.data[0] == doctest::Approx(-3.0));
    CHECK(y.data[1] == doctest::Approx(-6.0));
}

TEST_CASE("conv1d matches a naive oracle") {
    Rng rng(13);
    std::uniform_int_distribution<int> ch(1, 8), kw(1, 7), st(1, 3), len(8, 40);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    for (int trial = 0; trial < 100; ++trial) {
        const int cin = ch(rng), cout = ch(rng), k = kw(rng), s = st(rng), L = len(rng);
        const int pad = trial % 3 == 0 ? k / 2 : 0;
        auto layer = make_conv(cin, cout, k, s, pad, trial % 2 == 0);
        for (auto& w : layer.weights) w = u(rng);
        for (auto& b : layer.bias) b = u(rng);
        Activations x{L, cin, std::vector<float>(static_cast<std::size_t>(L) * cin)};
        for (auto& v : x.data) v = u(rng);
        const auto y = forward_layer(layer, x);
        const auto ref = oracle::conv1d(x.data, L, cin, layer.weights, layer.bias, cout, k, s, pad);
        REQUIRE(y.data.size() == ref.size());
        for (std::size_t i = 0; i < ref.size(); ++i) {
            CHECK(std::abs(y.data[i] - ref[i]) <= 1e-6 * std::max(1.0, std::abs(ref[i])) + 1e-6);
        }
        // The serial reference kernel must agree with the parallel one bit for bit.
        kernels::ConvShape shape{L, cin, cout, k, s, pad};
        std::vector<float> ys(ref.size());
        kernels::serial::conv1d(shape, x.data, layer.weights, layer.bias, ys);
        CHECK(ys == y.data);
    }
}

TEST_CASE("matvec serial and parallel agree") {
    Rng rng(4);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    std::vector<float> w(300 * 200), x(200), b(300), y1(300), y2(300);
    for (auto& v : w) v = u(rng);
    for (auto& v : x) v = u(rng);
    for (auto& v : b) v = u(rng);
    kernels::serial::matvec(w, x, b, y1);
    kernels::omp::matvec(w, x, b, y2);
    CHECK(y1 == y2);
}

TEST_CASE("lstm step") {
    SUBCASE("zero everything") {
        auto l = make_lstm(3, 4, false);
        std::vector<float> x(3, 0.0f), h(4, 0.0f), c(4, 0.0f);
        auto [h1, c1] = lstm_step(l, x, h, c);
        for (float v : h1) CHECK(v == 0.0f);
        for (float v : c1) CHECK(v == 0.0f);
    }
    SUBCASE("hand computation, hidden 2") {
        auto l = make_lstm(1, 2, false);
        // rows: i0 i1 f0 f1 g0 g1 o0 o1; columns: x, h0, h1
        l.weights = {0.5f, 0.1f, -0.2f,   // i0
                     -0.3f, 0.0f, 0.4f,   // i1
                     0.2f, 0.3f, 0.1f,    // f0
                     0.0f, -0.1f, 0.2f,   // f1
                     1.0f, 0.5f, -0.5f,   // g0
                     -1.0f, 0.2f, 0.3f,   // g1
                     0.7f, 0.0f, 0.1f,    // o0
                     0.1f, 0.6f, -0.4f};  // o1
        l.bias = {0.1f, 0.0f, 0.5f, -0.5f, 0.0f, 0.2f, -0.1f, 0.3f};
        const std::vector<float> x{0.8f}, h{0.2f, -0.4f}, c{0.5f, -0.25f};
        auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
        auto pre = [&](int row) {
            return l.bias[row] + l.weights[row * 3] * x[0] + l.weights[row * 3 + 1] * h[0] +
                   l.weights[row * 3 + 2] * h[1];
        };
        auto [h1, c1] = lstm_step(l, x, h, c);
        for (int u = 0; u < 2; ++u) {
            const double i = sig(pre(u)), f = sig(pre(2 + u)), g = std::tanh(pre(4 + u)), o = sig(pre(6 + u));
            const double cn = f * c[u] + i * g;
            CHECK(c1[u] == doctest::Approx(cn).epsilon(1e-5));
            CHECK(h1[u] == doctest::Approx(o * std::tanh(cn)).epsilon(1e-5));
        }
    }
    SUBCASE("bounded outputs") {
        Rng rng(9);
        auto l = make_lstm(6, 5, false);
        std::normal_distribution<float> n(0.0f, 3.0f);
        for (auto& w : l.weights) w = n(rng);
        std::vector<float> x(6), h(5, 0.0f), c(5, 0.0f);
        for (int step = 0; step < 200; ++step) {
            for (auto& v : x) v = n(rng);
            auto [h1, c1] = lstm_step(l, x, h, c);
            for (float v : h1) CHECK(std::abs(v) <= 1.0f);
            for (float v : c1) CHECK(std::isfinite(v));
            h = h1;
            c = c1;
        }
    }
    SUBCASE("dimension mismatch") {
        auto l = make_lstm(3, 2, false);
        std::vector<float> x(2), h(2), c(2);
        CHECK_THROWS(lstm_step(l, x, h, c));
    }
}

TEST_CASE("reference inference shapes") {
    const auto al = build_al_dorado(3);
    std::vector<float> chunk(4000);
    Rng rng(1);
    std::normal_distribution<float> n(0.0f, 1.0f);
    for (auto& v : chunk) v = n(rng);
    const auto f = infer_reference(al, chunk);
    CHECK(f.T == 800);
    CHECK(f.n_states == 4);
    CHECK(f.n_decisions == 5);
    for (double v : f.scores) CHECK(std::isfinite(v));
    CHECK_THROWS_AS(infer_reference(al, std::span<const float>{}), InputError);

    SUBCASE("shape law after padding") {
        for (int L : {al.receptive_field(), 97, 1234, 2001}) {
            std::vector<float> c(static_cast<std::size_t>(L), 0.5f);
            pad_chunk(c, al);
            CHECK(c.size() % 5 == 0);
            CHECK(infer_reference(al, c).T == static_cast<int>(c.size()) / al.samples_per_frame());
        }
        std::vector<float> tiny(3, 1.0f);
        CHECK(pad_chunk(tiny, al));
        CHECK(static_cast<int>(tiny.size()) >= al.receptive_field());
    }
}

TEST_CASE("all-zero weights give constant frames") {
    auto g = build_al_dorado(5);
    for (auto& l : g.layers) {
        std::fill(l.weights.begin(), l.weights.end(), 0.0f);
        std::fill(l.bias.begin(), l.bias.end(), 0.0f);
    }
    std::vector<float> chunk(500);
    for (std::size_t i = 0; i < chunk.size(); ++i) chunk[i] = std::sin(0.1f * static_cast<float>(i));
    const auto f = infer_reference(g, chunk);
    for (double v : f.scores) CHECK(v == f.scores[0]);
}

TEST_CASE("determinism and weight file round trip") {
    const auto a = build_al_dorado(42);
    const auto b = build_al_dorado(42);
    for (std::size_t i = 0; i < a.layers.size(); ++i) CHECK(a.layers[i].weights == b.layers[i].weights);
    std::vector<float> chunk(1000, 0.25f);
    for (std::size_t i = 0; i < chunk.size(); i += 7) chunk[i] = -1.0f;
    const auto fa = infer_reference(a, chunk);
    CHECK(fa.scores == infer_reference(b, chunk).scores);

    const auto dir = std::filesystem::temp_directory_path() / "cimcall_test_dnn";
    std::filesystem::create_directories(dir);
    save_network(a, dir / "net.json");
    CHECK(std::filesystem::exists(dir / "net.bin"));
    const auto c = load_network(dir / "net.json");
    CHECK(c.parameter_count() == a.parameter_count());
    CHECK(infer_reference(c, chunk).scores == fa.scores);
    CHECK_THROWS_AS(load_network(dir / "missing.json"), InputError);
    std::filesystem::remove_all(dir);
}
