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

#include "cimcall/dnn.hpp"

#include <algorithm>
#include <cmath>
#include <type_traits>

#include "cimcall/kernels.hpp"

namespace cimcall::dnn {

const char* to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::Conv1D: return "conv1d";
        case LayerKind::LSTM: return "lstm";
        case LayerKind::FullyConnected: return "fc";
        case LayerKind::Swish: return "swish";
        case LayerKind::Clamp: return "clamp";
        case LayerKind::BatchNorm: return "batchnorm";
    }
    return "?";
}

LayerKind LayerSpec::kind() const {
    struct Visitor {
        LayerKind operator()(const Conv1DGeom&) const { return LayerKind::Conv1D; }
        LayerKind operator()(const LstmGeom&) const { return LayerKind::LSTM; }
        LayerKind operator()(const FcGeom&) const { return LayerKind::FullyConnected; }
        LayerKind operator()(const SwishGeom&) const { return LayerKind::Swish; }
        LayerKind operator()(const ClampGeom&) const { return LayerKind::Clamp; }
        LayerKind operator()(const BatchNormGeom&) const { return LayerKind::BatchNorm; }
    };
    return std::visit(Visitor{}, geometry);
}

bool LayerSpec::is_compute() const {
    const auto k = kind();
    return k == LayerKind::Conv1D || k == LayerKind::LSTM || k == LayerKind::FullyConnected;
}

std::size_t LayerSpec::expected_weight_count() const {
    switch (kind()) {
        case LayerKind::Conv1D: {
            const auto& g = as<Conv1DGeom>();
            return static_cast<std::size_t>(g.in_channels) * g.kernel_width * g.out_channels;
        }
        case LayerKind::LSTM: {
            const auto& g = as<LstmGeom>();
            return 4ull * g.hidden_size * (g.input_size + g.hidden_size);
        }
        case LayerKind::FullyConnected: {
            const auto& g = as<FcGeom>();
            return static_cast<std::size_t>(g.in_features) * g.out_features;
        }
        case LayerKind::BatchNorm: return static_cast<std::size_t>(as<BatchNormGeom>().channels);
        default: return 0;
    }
}

std::size_t LayerSpec::expected_bias_count() const {
    switch (kind()) {
        case LayerKind::Conv1D: {
            const auto& g = as<Conv1DGeom>();
            return g.has_bias ? static_cast<std::size_t>(g.out_channels) : 0;
        }
        case LayerKind::LSTM: return 4ull * as<LstmGeom>().hidden_size;
        case LayerKind::FullyConnected: return static_cast<std::size_t>(as<FcGeom>().out_features);
        case LayerKind::BatchNorm: return static_cast<std::size_t>(as<BatchNormGeom>().channels);
        default: return 0;
    }
}

int LayerSpec::output_channels(int input_channels) const {
    auto expect = [&](int want) {
        if (input_channels != want) {
            throw ConfigError(std::string(to_string(kind())) + " layer expects " + std::to_string(want) +
                              " input channels, got " + std::to_string(input_channels));
        }
    };
    switch (kind()) {
        case LayerKind::Conv1D: expect(as<Conv1DGeom>().in_channels); return as<Conv1DGeom>().out_channels;
        case LayerKind::LSTM: expect(as<LstmGeom>().input_size); return as<LstmGeom>().hidden_size;
        case LayerKind::FullyConnected: expect(as<FcGeom>().in_features); return as<FcGeom>().out_features;
        case LayerKind::BatchNorm: expect(as<BatchNormGeom>().channels); return input_channels;
        default: return input_channels;
    }
}

int LayerSpec::matrix_rows() const {
    switch (kind()) {
        case LayerKind::Conv1D: return as<Conv1DGeom>().in_channels * as<Conv1DGeom>().kernel_width;
        case LayerKind::LSTM: return as<LstmGeom>().input_size + as<LstmGeom>().hidden_size;
        case LayerKind::FullyConnected: return as<FcGeom>().in_features;
        default: return 0;
    }
}

int LayerSpec::matrix_cols() const {
    switch (kind()) {
        case LayerKind::Conv1D: return as<Conv1DGeom>().out_channels;
        case LayerKind::LSTM: return 4 * as<LstmGeom>().hidden_size;
        case LayerKind::FullyConnected: return as<FcGeom>().out_features;
        default: return 0;
    }
}

namespace {

LayerSpec sized(Geometry g) {
    LayerSpec l{std::move(g), {}, {}};
    l.weights.assign(l.expected_weight_count(), 0.0f);
    l.bias.assign(l.expected_bias_count(), 0.0f);
    return l;
}

}  // namespace

LayerSpec make_conv(int in, int out, int kernel, int stride, int padding, bool bias) {
    return sized(Conv1DGeom{in, out, kernel, stride, padding, bias});
}
LayerSpec make_lstm(int input, int hidden, bool reverse) { return sized(LstmGeom{input, hidden, reverse}); }
LayerSpec make_fc(int in, int out) { return sized(FcGeom{in, out}); }
LayerSpec make_swish() { return sized(SwishGeom{}); }
LayerSpec make_clamp(float lo, float hi) { return sized(ClampGeom{lo, hi}); }
LayerSpec make_batchnorm(int channels) {
    auto l = sized(BatchNormGeom{channels});
    std::fill(l.weights.begin(), l.weights.end(), 1.0f);
    return l;
}

int NetworkGraph::samples_per_frame() const {
    int s = 1;
    for (const auto& l : layers) {
        if (l.kind() == LayerKind::Conv1D) s *= l.as<Conv1DGeom>().stride;
    }
    return s;
}

std::size_t NetworkGraph::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.parameter_count();
    return n;
}

int NetworkGraph::output_width() const {
    int c = input_channels;
    for (const auto& l : layers) c = l.output_channels(c);
    return c;
}

int NetworkGraph::receptive_field() const {
    int rf = 1;
    int jump = 1;
    for (const auto& l : layers) {
        if (l.kind() != LayerKind::Conv1D) continue;
        const auto& g = l.as<Conv1DGeom>();
        rf += (g.kernel_width - 1) * jump;
        jump *= g.stride;
    }
    return rf;
}

std::vector<int> NetworkGraph::compute_layers() const {
    std::vector<int> idx;
    for (int i = 0; i < static_cast<int>(layers.size()); ++i) {
        if (layers[i].is_compute()) idx.push_back(i);
    }
    return idx;
}

void NetworkGraph::validate() const {
    if (layers.empty()) throw ConfigError("network '" + name + "' has no layers");
    int c = input_channels;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        const std::string where = "network '" + name + "' layer " + std::to_string(i);
        std::visit(
            [&](const auto& g) {
                using G = std::decay_t<decltype(g)>;
                bool ok = true;
                if constexpr (std::is_same_v<G, Conv1DGeom>) {
                    ok = g.in_channels > 0 && g.out_channels > 0 && g.kernel_width > 0 && g.stride > 0 &&
                         g.padding >= 0;
                } else if constexpr (std::is_same_v<G, LstmGeom>) {
                    ok = g.input_size > 0 && g.hidden_size > 0;
                } else if constexpr (std::is_same_v<G, FcGeom>) {
                    ok = g.in_features > 0 && g.out_features > 0;
                } else if constexpr (std::is_same_v<G, ClampGeom>) {
                    ok = g.lo < g.hi;
                } else if constexpr (std::is_same_v<G, BatchNormGeom>) {
                    ok = g.channels > 0;
                }
                if (!ok) throw ConfigError(where + ": invalid geometry");
            },
            l.geometry);
        if (l.weights.size() != l.expected_weight_count() || l.bias.size() != l.expected_bias_count()) {
            throw ConfigError(where + ": weight array size does not match geometry");
        }
        try {
            c = l.output_channels(c);
        } catch (const ConfigError& e) {
            throw ConfigError(where + ": " + e.what());
        }
    }
}

void randomize(NetworkGraph& graph, std::uint64_t seed) {
    Rng rng(seed);
    for (auto& l : graph.layers) {
        if (!l.is_compute()) continue;
        int fan_in = l.matrix_rows();
        if (l.kind() == LayerKind::LSTM) fan_in = l.as<LstmGeom>().hidden_size;
        const float bound = 1.0f / std::sqrt(static_cast<float>(fan_in));
        std::uniform_real_distribution<float> u(-bound, bound);
        for (auto& w : l.weights) w = u(rng);
        for (auto& b : l.bias) b = u(rng);
    }
}

namespace {

void add_front_end(NetworkGraph& g, int features, bool clamps) {
    const float lo = -3.5f, hi = 3.5f;
    g.layers.push_back(make_conv(1, 16, 5, 1, 2));
    g.layers.push_back(make_swish());
    if (clamps) g.layers.push_back(make_clamp(lo, hi));
    g.layers.push_back(make_conv(16, 16, 5, 1, 2));
    g.layers.push_back(make_swish());
    if (clamps) g.layers.push_back(make_clamp(lo, hi));
    g.layers.push_back(make_conv(16, features, 19, 5, 9));
    g.layers.push_back(make_swish());
    if (clamps) g.layers.push_back(make_clamp(lo, hi));
}

}  // namespace

NetworkGraph build_dorado_fast(std::uint64_t seed, int state_len) {
    NetworkGraph g;
    g.name = "dorado-fast";
    add_front_end(g, 96, false);
    for (int i = 0; i < 5; ++i) g.layers.push_back(make_lstm(96, 96, i % 2 == 0));
    int states = 1;
    for (int i = 0; i < state_len; ++i) states *= 4;
    g.layers.push_back(make_fc(96, 5 * states));
    randomize(g, seed);
    g.validate();
    return g;
}

NetworkGraph build_al_dorado(std::uint64_t seed) {
    NetworkGraph g;
    g.name = "al-dorado";
    add_front_end(g, 128, true);
    const int sizes[] = {128, 128, 128, 256, 256};
    int in = 128;
    for (int i = 0; i < 5; ++i) {
        g.layers.push_back(make_lstm(in, sizes[i], i % 2 == 0));
        in = sizes[i];
    }
    g.layers.push_back(make_fc(256, 20));
    g.layers.push_back(make_clamp(-5.0f, 5.0f));
    randomize(g, seed);
    g.validate();
    return g;
}

TransitionFrames::TransitionFrames(int frames, int states, int decisions)
    : T(frames),
      n_states(states),
      n_decisions(decisions),
      scores(static_cast<std::size_t>(frames) * states * decisions, 0.0) {}

std::span<const double> TransitionFrames::frame(int t) const {
    return std::span<const double>(scores).subspan(static_cast<std::size_t>(t) * per_frame(), per_frame());
}

float sigmoid(float x) { return 1.0f / (1.0f + std::exp(-x)); }
float swish(float x) { return x * sigmoid(x); }

std::pair<std::vector<float>, std::vector<float>> lstm_step(const LayerSpec& layer,
                                                            std::span<const float> x,
                                                            std::span<const float> h_prev,
                                                            std::span<const float> c_prev) {
    if (layer.kind() != LayerKind::LSTM) throw Error("lstm_step: layer is not an LSTM");
    const auto& g = layer.as<LstmGeom>();
    const auto H = static_cast<std::size_t>(g.hidden_size);
    if (x.size() != static_cast<std::size_t>(g.input_size) || h_prev.size() != H || c_prev.size() != H) {
        throw Error("lstm_step: dimension mismatch");
    }
    std::vector<float> xh(x.begin(), x.end());
    xh.insert(xh.end(), h_prev.begin(), h_prev.end());
    std::vector<float> gates(4 * H);
    kernels::omp::matvec(layer.weights, xh, layer.bias, gates);

    std::vector<float> h(H), c(H);
    for (std::size_t u = 0; u < H; ++u) {
        const float i = sigmoid(gates[u]);
        const float f = sigmoid(gates[H + u]);
        const float gg = std::tanh(gates[2 * H + u]);
        const float o = sigmoid(gates[3 * H + u]);
        c[u] = f * c_prev[u] + i * gg;
        h[u] = o * std::tanh(c[u]);
    }
    return {std::move(h), std::move(c)};
}

Activations forward_layer(const LayerSpec& layer, const Activations& in) {
    Activations out;
    out.channels = layer.output_channels(in.channels);
    switch (layer.kind()) {
        case LayerKind::Conv1D: {
            const auto& g = layer.as<Conv1DGeom>();
            kernels::ConvShape shape{in.steps, g.in_channels, g.out_channels, g.kernel_width, g.stride, g.padding};
            out.steps = shape.out_length();
            if (out.steps <= 0) throw InputError("conv1d: input shorter than kernel");
            out.data.resize(static_cast<std::size_t>(out.steps) * out.channels);
            kernels::omp::conv1d(shape, in.data, layer.weights, layer.bias, out.data);
            break;
        }
        case LayerKind::LSTM: {
            const auto& g = layer.as<LstmGeom>();
            const auto H = static_cast<std::size_t>(g.hidden_size);
            out.steps = in.steps;
            out.data.resize(static_cast<std::size_t>(out.steps) * H);
            std::vector<float> h(H, 0.0f), c(H, 0.0f);
            for (int s = 0; s < in.steps; ++s) {
                const int t = g.reverse ? in.steps - 1 - s : s;
                std::span<const float> x(in.data.data() + static_cast<std::size_t>(t) * in.channels, in.channels);
                auto [h2, c2] = lstm_step(layer, x, h, c);
                h = std::move(h2);
                c = std::move(c2);
                std::copy(h.begin(), h.end(), out.data.begin() + static_cast<std::ptrdiff_t>(t * H));
            }
            break;
        }
        case LayerKind::FullyConnected: {
            out.steps = in.steps;
            out.data.resize(static_cast<std::size_t>(out.steps) * out.channels);
            for (int t = 0; t < in.steps; ++t) {
                std::span<const float> x(in.data.data() + static_cast<std::size_t>(t) * in.channels, in.channels);
                std::span<float> y(out.data.data() + static_cast<std::size_t>(t) * out.channels, out.channels);
                kernels::omp::matvec(layer.weights, x, layer.bias, y);
            }
            break;
        }
        case LayerKind::Swish:
            out = in;
            for (auto& v : out.data) v = swish(v);
            break;
        case LayerKind::Clamp: {
            const auto& g = layer.as<ClampGeom>();
            out = in;
            for (auto& v : out.data) v = std::clamp(v, g.lo, g.hi);
            break;
        }
        case LayerKind::BatchNorm:
            out = in;
            for (int t = 0; t < out.steps; ++t) {
                for (int ch = 0; ch < out.channels; ++ch) {
                    auto& v = out.data[static_cast<std::size_t>(t) * out.channels + ch];
                    v = v * layer.weights[ch] + layer.bias[ch];
                }
            }
            break;
    }
    return out;
}

bool pad_chunk(std::vector<float>& chunk, const NetworkGraph& graph) {
    const std::size_t spf = static_cast<std::size_t>(graph.samples_per_frame());
    std::size_t target = std::max(chunk.size(), static_cast<std::size_t>(graph.receptive_field()));
    target = (target + spf - 1) / spf * spf;
    if (target == chunk.size()) return false;
    chunk.resize(target, 0.0f);
    return true;
}

TransitionFrames to_frames(const Activations& out) {
    if (out.channels % 5 != 0) {
        throw Error("network output width " + std::to_string(out.channels) + " is not a multiple of 5");
    }
    TransitionFrames f(out.steps, out.channels / 5, 5);
    for (std::size_t i = 0; i < out.data.size(); ++i) f.scores[i] = out.data[i];
    return f;
}

std::vector<Activations> trace_reference(const NetworkGraph& graph, std::span<const float> chunk) {
    if (chunk.empty()) throw InputError("infer: empty chunk");
    Activations x{static_cast<int>(chunk.size()), 1, std::vector<float>(chunk.begin(), chunk.end())};
    if (graph.input_channels != 1) throw Error("infer: graph must take a single input channel");
    std::vector<Activations> trace;
    trace.reserve(graph.layers.size());
    for (const auto& l : graph.layers) {
        x = forward_layer(l, x);
        trace.push_back(x);
    }
    return trace;
}

TransitionFrames infer_reference(const NetworkGraph& graph, std::span<const float> chunk) {
    if (chunk.empty()) throw InputError("infer: empty chunk");
    Activations x{static_cast<int>(chunk.size()), 1, std::vector<float>(chunk.begin(), chunk.end())};
    for (const auto& l : graph.layers) x = forward_layer(l, x);
    return to_frames(x);
}

}  // namespace cimcall::dnn
