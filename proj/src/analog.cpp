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

#include "cimcall/analog.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cimcall/kernels.hpp"

namespace cimcall::analog {

using dnn::Activations;
using dnn::LayerKind;
using dnn::LayerSpec;

namespace {

float absmax(std::span<const float> v) {
    float m = 0.0f;
    for (float x : v) m = std::max(m, std::abs(x));
    return m;
}

/// Step size for a signed code of `bits` covering +-range.
float step_for(float range, int bits) {
    const float top = static_cast<float>((1 << (bits - 1)) - 1);
    return range > 0.0f ? range / top : 1.0f / top;
}

/// Gate pre-activations of an LSTM over a sequence, in processing order,
/// using the reference hidden states.
float lstm_matvec_absmax(const LayerSpec& layer, const Activations& x, const Activations& h_out) {
    const auto& g = layer.as<dnn::LstmGeom>();
    const int H = g.hidden_size;
    std::vector<float> xh(static_cast<std::size_t>(g.input_size + H));
    std::vector<float> z(4 * static_cast<std::size_t>(H));
    std::vector<float> h(H, 0.0f);
    float m = 0.0f;
    for (int s = 0; s < x.steps; ++s) {
        const int t = g.reverse ? x.steps - 1 - s : s;
        std::copy_n(x.data.begin() + static_cast<std::ptrdiff_t>(t) * x.channels, x.channels, xh.begin());
        std::copy(h.begin(), h.end(), xh.begin() + g.input_size);
        kernels::serial::matvec(layer.weights, xh, {}, z);
        m = std::max(m, absmax(z));
        std::copy_n(h_out.data.begin() + static_cast<std::ptrdiff_t>(t) * H, H, h.begin());
    }
    return m;
}

float minus_bias_absmax(const LayerSpec& layer, const Activations& y) {
    float m = 0.0f;
    for (int t = 0; t < y.steps; ++t) {
        for (int c = 0; c < y.channels; ++c) {
            float v = y.data[static_cast<std::size_t>(t) * y.channels + c];
            if (!layer.bias.empty()) v -= layer.bias[c];
            m = std::max(m, std::abs(v));
        }
    }
    return m;
}

}  // namespace

const LayerRange& Calibration::at(int layer) const {
    for (const auto& l : layers) {
        if (l.layer == layer) return l;
    }
    throw Error("calibration has no entry for layer " + std::to_string(layer));
}

Calibration calibrate(const dnn::NetworkGraph& graph, const std::vector<std::vector<float>>& chunks) {
    if (chunks.empty()) throw InputError("calibrate: no chunks");
    const auto compute = graph.compute_layers();
    Calibration cal;
    for (int li : compute) cal.layers.push_back({li, 0.0f, 0.0f, 0.0f, 0.0f});
    for (const auto& chunk : chunks) {
        const auto trace = dnn::trace_reference(graph, chunk);
        const Activations raw{static_cast<int>(chunk.size()), 1, chunk};
        for (std::size_t ci = 0; ci < compute.size(); ++ci) {
            const int li = compute[ci];
            const auto& layer = graph.layers[li];
            const Activations& in = li == 0 ? raw : trace[li - 1];
            const int block_end = ci + 1 < compute.size() ? compute[ci + 1] - 1 : static_cast<int>(graph.layers.size()) - 1;
            auto& r = cal.layers[ci];
            r.input_absmax = std::max(r.input_absmax, absmax(in.data));
            r.output_absmax = std::max(r.output_absmax, absmax(trace[block_end].data));
            if (layer.kind() == LayerKind::LSTM) {
                r.hidden_absmax = std::max(r.hidden_absmax, absmax(trace[li].data));
                r.matvec_absmax = std::max(r.matvec_absmax, lstm_matvec_absmax(layer, in, trace[li]));
            } else {
                r.matvec_absmax = std::max(r.matvec_absmax, minus_bias_absmax(layer, trace[li]));
            }
        }
    }
    return cal;
}

int quantize(float x, float step, int bits) {
    const int hi = (1 << (bits - 1)) - 1;
    const int lo = -(1 << (bits - 1));
    const float q = std::nearbyint(x / step);
    return static_cast<int>(std::clamp(q, static_cast<float>(lo), static_cast<float>(hi)));
}

double weight_absmax(const LayerSpec& layer) {
    if (!layer.is_compute()) return 0.0;
    return absmax(layer.weights);
}

const AnalogLayerState& ProgrammedSystem::state(int layer) const {
    for (const auto& s : layers) {
        if (s.layer == layer) return s;
    }
    throw Error("no execution state for layer " + std::to_string(layer));
}

bool ProgrammedSystem::any_analog() const {
    return std::any_of(layers.begin(), layers.end(), [](const AnalogLayerState& s) { return s.analog; });
}

ProgrammedSystem program_network(const dnn::NetworkGraph& graph, const mapper::Mapping& mapping,
                                 const pcm::DeviceParams& device, const Calibration& calibration, std::uint64_t seed,
                                 double program_time, const ExecOptions& options) {
    graph.validate();
    device.validate();
    if (options.activation_bits < 2 || options.activation_bits > 16) {
        throw ConfigError("activation_bits out of range [2, 16]");
    }
    if (!(options.headroom > 0.0f)) throw ConfigError("headroom must be positive");

    ProgrammedSystem sys;
    sys.graph = graph;
    sys.mapping = mapping;
    sys.device = device;
    sys.options = options;
    sys.program_time = program_time;
    int max_tile = -1;
    for (const auto& p : mapping.layers) {
        for (const auto& piece : p.pieces) max_tile = std::max(max_tile, piece.tile);
    }
    sys.tiles.resize(static_cast<std::size_t>(max_tile + 1));

    const float h = options.headroom;
    for (int li : graph.compute_layers()) {
        const auto& p = mapping.placement(li);
        const auto& range = calibration.at(li);
        const auto& layer = graph.layers[li];
        AnalogLayerState st;
        st.layer = li;
        st.analog = p.analog;
        st.act_scale = step_for(range.output_absmax * h, options.activation_bits);
        st.in_scale = step_for(range.input_absmax * h, device.input_bits);
        st.in_scale_h = layer.kind() == LayerKind::LSTM ? step_for(range.hidden_absmax * h, device.input_bits) : st.in_scale;
        st.out_scale = step_for(range.matvec_absmax * h, device.adc_bits);
        if (!p.analog) {
            sys.layers.push_back(st);
            continue;
        }

        int rows = 0, cols = 0;
        auto mat = mapper::lowered_matrix(graph, li, &rows, &cols);
        if (rows != p.rows || cols != p.cols) {
            throw MappingError("layer " + std::to_string(li) + ": placement size does not match the lowered matrix");
        }
        if (layer.kind() == LayerKind::LSTM) {
            const int I = layer.as<dnn::LstmGeom>().input_size;
            const float ratio = st.in_scale_h / st.in_scale;
            for (int r = I; r < rows; ++r) {
                for (int c = 0; c < cols; ++c) mat[static_cast<std::size_t>(r) * cols + c] *= ratio;
            }
        }
        st.w_max = absmax(mat);
        if (!(st.w_max > 0.0)) st.w_max = 1.0;
        const float col_scale = static_cast<float>(st.w_max * st.in_scale / st.out_scale);

        pcm::SaturationCounter sat;
        for (std::size_t pi = 0; pi < p.pieces.size(); ++pi) {
            const auto& piece = p.pieces[pi];
            if (piece.row_begin < 0 || piece.col_begin < 0 || piece.row_begin + piece.rows > pcm::kTileDim ||
                piece.col_begin + piece.cols > pcm::kTileDim) {
                throw MappingError("capacity exceeded: layer " + std::to_string(li) + " piece " + std::to_string(pi) +
                                   " does not fit a tile");
            }
            auto& tile = sys.tiles[piece.tile];
            Rng rng(derive_seed(seed, static_cast<std::uint64_t>(li) * 4096 + pi));
            for (int r = 0; r < piece.rows; ++r) {
                for (int c = 0; c < piece.cols; ++c) {
                    const double w = mat[static_cast<std::size_t>(piece.layer_row + r) * cols + piece.layer_col + c];
                    auto pair = pcm::map_weight_to_conductance(w, st.w_max, device, &sat);
                    pair = pcm::apply_programming_noise(pair, device, rng);
                    pair.t_programmed = program_time;
                    tile.at(piece.row_begin + r, piece.col_begin + c) = pair;
                }
            }
            for (int c = 0; c < piece.cols; ++c) {
                tile.col_scale[piece.col_begin + c] = col_scale;
                tile.col_offset[piece.col_begin + c] = 0.0f;
            }
            tile.rows_used = std::max(tile.rows_used, piece.row_begin + piece.rows);
            tile.cols_used = std::max(tile.cols_used, piece.col_begin + piece.cols);
        }
        sys.clipped_weights += sat.clipped;
        sys.layers.push_back(st);
    }
    for (auto& tile : sys.tiles) tile.seal();
    return sys;
}

// ---------------------------------------------------------------------------
// Inference

namespace {

class Executor {
public:
    Executor(const ProgrammedSystem& sys, double t_read, std::uint64_t seed)
        : sys_(sys), t_read_(t_read), seed_(seed), fp16_(sys.options.fp16) {
        const double f = pcm::drift_factor(sys.program_time, t_read, sys.device);
        compensation_ = sys.options.drift_compensation ? static_cast<float>(1.0 / f) : 1.0f;
    }

    float r(float x) const { return fp16_ ? round_to_half(x) : x; }

    Activations run(std::span<const float> chunk) const {
        const auto& g = sys_.graph;
        Activations x{static_cast<int>(chunk.size()), 1, std::vector<float>(chunk.begin(), chunk.end())};
        const auto compute = g.compute_layers();
        for (std::size_t ci = 0; ci < compute.size(); ++ci) {
            const int li = compute[ci];
            const auto& st = sys_.state(li);
            const auto& p = sys_.mapping.placement(li);
            x = st.analog ? analog_layer(li, p, st, x) : digital_layer(li, x);
            const int next = ci + 1 < compute.size() ? compute[ci + 1] : static_cast<int>(g.layers.size());
            for (int a = li + 1; a < next; ++a) {
                x = dnn::forward_layer(g.layers[a], x);
                for (auto& v : x.data) v = r(v);
            }
            // The block output crosses the mesh as a signed integer.
            const int bits = sys_.options.activation_bits;
            for (auto& v : x.data) v = static_cast<float>(quantize(v, st.act_scale, bits)) * st.act_scale;
        }
        return x;
    }

private:
    /// One read of all pieces of a layer; returns dequantized column sums.
    void read(const mapper::LayerPlacement& p, const AnalogLayerState& st, std::span<const std::int8_t> codes,
              std::uint64_t key, std::span<float> out) const {
        std::fill(out.begin(), out.end(), 0.0f);
        const float scale = st.out_scale * compensation_;
        for (std::size_t pi = 0; pi < p.pieces.size(); ++pi) {
            const auto& piece = p.pieces[pi];
            const auto adc = pcm::analog_vmm(sys_.tiles[piece.tile], piece.row_begin, piece.col_begin, piece.cols,
                                             codes.subspan(piece.layer_row, piece.rows), sys_.device,
                                             derive_seed(key, pi), t_read_);
            for (int j = 0; j < piece.cols; ++j) {
                auto& o = out[piece.layer_col + j];
                o = r(o + r(static_cast<float>(adc[j]) * scale));
            }
        }
    }

    std::int8_t in_code(float v, float step) const {
        return static_cast<std::int8_t>(quantize(v, step, sys_.device.input_bits));
    }

    std::uint64_t layer_key(int li) const { return derive_seed(seed_, static_cast<std::uint64_t>(li)); }

    Activations analog_layer(int li, const mapper::LayerPlacement& p, const AnalogLayerState& st,
                             const Activations& x) const {
        const auto& layer = sys_.graph.layers[li];
        switch (layer.kind()) {
            case LayerKind::Conv1D: return analog_conv(li, p, st, x);
            case LayerKind::LSTM: return lstm(li, &p, &st, x);
            case LayerKind::FullyConnected: {
                const auto& g = layer.as<dnn::FcGeom>();
                Activations y{x.steps, g.out_features, std::vector<float>(static_cast<std::size_t>(x.steps) * g.out_features)};
                std::vector<std::int8_t> codes(g.in_features);
                for (int t = 0; t < x.steps; ++t) {
                    for (int i = 0; i < g.in_features; ++i) {
                        codes[i] = in_code(x.data[static_cast<std::size_t>(t) * x.channels + i], st.in_scale);
                    }
                    std::span<float> out(y.data.data() + static_cast<std::size_t>(t) * y.channels, y.channels);
                    read(p, st, codes, derive_seed(layer_key(li), t), out);
                    if (!layer.bias.empty()) {
                        for (int o = 0; o < y.channels; ++o) out[o] = r(out[o] + layer.bias[o]);
                    }
                }
                return y;
            }
            default: throw Error("layer " + std::to_string(li) + " is not a compute layer");
        }
    }

    Activations analog_conv(int li, const mapper::LayerPlacement& p, const AnalogLayerState& st,
                            const Activations& x) const {
        const auto& layer = sys_.graph.layers[li];
        const auto& g = layer.as<dnn::Conv1DGeom>();
        const kernels::ConvShape shape{x.steps, g.in_channels, g.out_channels, g.kernel_width, g.stride, g.padding};
        const int out_len = shape.out_length();
        if (out_len <= 0) throw InputError("conv1d: input shorter than kernel");
        const int R = p.replicas;
        const int window = g.kernel_width + (R - 1) * g.stride;
        Activations y{out_len, g.out_channels, std::vector<float>(static_cast<std::size_t>(out_len) * g.out_channels)};
        std::vector<std::int8_t> codes(static_cast<std::size_t>(window) * g.in_channels);
        std::vector<float> cols(static_cast<std::size_t>(p.cols));
        const int groups = (out_len + R - 1) / R;
        for (int grp = 0; grp < groups; ++grp) {
            const int w0 = grp * R * g.stride - g.padding;
            for (int pos = 0; pos < window; ++pos) {
                const int src = w0 + pos;
                for (int c = 0; c < g.in_channels; ++c) {
                    const float v = src >= 0 && src < x.steps ? x.data[static_cast<std::size_t>(src) * x.channels + c] : 0.0f;
                    codes[static_cast<std::size_t>(pos) * g.in_channels + c] = in_code(v, st.in_scale);
                }
            }
            read(p, st, codes, derive_seed(layer_key(li), grp), cols);
            for (int rep = 0; rep < R; ++rep) {
                const int t = grp * R + rep;
                if (t >= out_len) break;
                for (int o = 0; o < g.out_channels; ++o) {
                    float v = cols[static_cast<std::size_t>(rep) * g.out_channels + o];
                    if (!layer.bias.empty()) v = r(v + layer.bias[o]);
                    y.data[static_cast<std::size_t>(t) * g.out_channels + o] = v;
                }
            }
        }
        return y;
    }

    /// LSTM over a sequence; crossbar reads when `p` is given, binary16
    /// digital matvec otherwise.
    Activations lstm(int li, const mapper::LayerPlacement* p, const AnalogLayerState* st, const Activations& x) const {
        const auto& layer = sys_.graph.layers[li];
        const auto& g = layer.as<dnn::LstmGeom>();
        const int H = g.hidden_size;
        const int I = g.input_size;
        Activations y{x.steps, H, std::vector<float>(static_cast<std::size_t>(x.steps) * H)};
        std::vector<float> h(H, 0.0f), c(H, 0.0f), phys(4 * static_cast<std::size_t>(H)), z(4 * static_cast<std::size_t>(H));
        std::vector<std::int8_t> codes(static_cast<std::size_t>(I + H));
        std::vector<float> xh(static_cast<std::size_t>(I + H));
        std::vector<float> w16;
        if (!p) {
            w16.resize(layer.weights.size());
            for (std::size_t i = 0; i < w16.size(); ++i) w16[i] = r(layer.weights[i]);
        }
        for (int s = 0; s < x.steps; ++s) {
            const int t = g.reverse ? x.steps - 1 - s : s;
            const float* xt = x.data.data() + static_cast<std::size_t>(t) * x.channels;
            if (p) {
                for (int i = 0; i < I; ++i) codes[i] = in_code(xt[i], st->in_scale);
                for (int u = 0; u < H; ++u) codes[I + u] = in_code(h[u], st->in_scale_h);
                read(*p, *st, codes, derive_seed(layer_key(li), s), phys);
                for (int col = 0; col < 4 * H; ++col) z[mapper::lstm_column_source(col, H)] = phys[col];
            } else {
                for (int i = 0; i < I; ++i) xh[i] = r(xt[i]);
                for (int u = 0; u < H; ++u) xh[I + u] = h[u];
                kernels::serial::matvec(w16, xh, {}, z);
                for (auto& v : z) v = r(v);
            }
            for (int k = 0; k < 4 * H; ++k) z[k] = r(z[k] + layer.bias[k]);
            for (int u = 0; u < H; ++u) {
                const float ig = r(dnn::sigmoid(z[u]));
                const float fg = r(dnn::sigmoid(z[H + u]));
                const float gg = r(std::tanh(z[2 * H + u]));
                const float og = r(dnn::sigmoid(z[3 * H + u]));
                c[u] = r(r(fg * c[u]) + r(ig * gg));
                h[u] = r(og * r(std::tanh(c[u])));
            }
            std::copy(h.begin(), h.end(), y.data.begin() + static_cast<std::ptrdiff_t>(t) * H);
        }
        return y;
    }

    Activations digital_layer(int li, const Activations& x) const {
        const auto& layer = sys_.graph.layers[li];
        if (layer.kind() == LayerKind::LSTM) return lstm(li, nullptr, nullptr, x);
        LayerSpec rounded = layer;
        for (auto& w : rounded.weights) w = r(w);
        for (auto& b : rounded.bias) b = r(b);
        Activations in = x;
        for (auto& v : in.data) v = r(v);
        auto y = dnn::forward_layer(rounded, in);
        for (auto& v : y.data) v = r(v);
        return y;
    }

    const ProgrammedSystem& sys_;
    double t_read_;
    std::uint64_t seed_;
    bool fp16_;
    float compensation_ = 1.0f;
};

}  // namespace

dnn::TransitionFrames infer_analog(const ProgrammedSystem& system, std::span<const float> chunk, double t_read,
                                   std::uint64_t seed) {
    if (chunk.empty()) throw InputError("infer: empty chunk");
    if (t_read < system.program_time) {
        throw Error("read time " + std::to_string(t_read) + " precedes programming time " +
                    std::to_string(system.program_time));
    }
    if (!system.any_analog()) return dnn::infer_reference(system.graph, chunk);
    const Executor ex(system, t_read, seed);
    return dnn::to_frames(ex.run(chunk));
}

}  // namespace cimcall::analog
