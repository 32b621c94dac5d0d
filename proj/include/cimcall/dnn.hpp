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
 * @file dnn.hpp
 * @brief Basecaller network graph, builders and full-precision inference.
 *
 * Activations are time-major: a tensor of T steps and C channels is stored
 * as T*C floats. Weight layouts:
 *   - Conv1D:  [out][in][k], optional bias [out]
 *   - LSTM:    [4H][I+H] gate-major rows (i, f, g, o), bias [4H]
 *   - FC:      [out][in], bias [out]
 *   - BatchNorm (folded): scale [C] in `weights`, shift [C] in `bias`
 */

#ifndef CIMCALL_DNN_HPP
#define CIMCALL_DNN_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "cimcall/common.hpp"

namespace cimcall::dnn {

enum class LayerKind { Conv1D, LSTM, FullyConnected, Swish, Clamp, BatchNorm };

const char* to_string(LayerKind kind);

struct Conv1DGeom {
    int in_channels = 1;
    int out_channels = 1;
    int kernel_width = 1;
    int stride = 1;
    int padding = 0;
    bool has_bias = false;
};

struct LstmGeom {
    int input_size = 1;
    int hidden_size = 1;
    bool reverse = false;
};

struct FcGeom {
    int in_features = 1;
    int out_features = 1;
};

struct SwishGeom {};

struct ClampGeom {
    float lo = -3.5f;
    float hi = 3.5f;
};

struct BatchNormGeom {
    int channels = 1;
};

using Geometry = std::variant<Conv1DGeom, LstmGeom, FcGeom, SwishGeom, ClampGeom, BatchNormGeom>;

struct LayerSpec {
    Geometry geometry;
    std::vector<float> weights;
    std::vector<float> bias;

    LayerKind kind() const;
    /// Conv / LSTM / FC: layers that carry a weight matrix.
    bool is_compute() const;
    std::size_t expected_weight_count() const;
    std::size_t expected_bias_count() const;
    std::size_t parameter_count() const { return weights.size() + bias.size(); }

    /// Output channels given input channels; throws on a mismatch.
    int output_channels(int input_channels) const;

    /// Weight matrix rows / columns as laid out on a crossbar
    /// (rows = inputs, columns = outputs). Zero for elementwise layers.
    int matrix_rows() const;
    int matrix_cols() const;

    template <class G>
    const G& as() const { return std::get<G>(geometry); }
};

LayerSpec make_conv(int in, int out, int kernel, int stride, int padding, bool bias = false);
LayerSpec make_lstm(int input, int hidden, bool reverse);
LayerSpec make_fc(int in, int out);
LayerSpec make_swish();
LayerSpec make_clamp(float lo, float hi);
LayerSpec make_batchnorm(int channels);

struct NetworkGraph {
    std::string name;
    std::vector<LayerSpec> layers;
    int input_channels = 1;

    /// Product of conv strides.
    int samples_per_frame() const;
    std::size_t parameter_count() const;
    /// Output channels of the final layer.
    int output_width() const;
    /// Receptive field of the conv front-end in samples.
    int receptive_field() const;
    /// Indices of compute layers in order.
    std::vector<int> compute_layers() const;

    /// Throws ConfigError when dimensions do not compose or weights are
    /// mis-sized.
    void validate() const;
};

/// Fill every weight and bias with U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
void randomize(NetworkGraph& graph, std::uint64_t seed);

NetworkGraph build_dorado_fast(std::uint64_t seed, int state_len = 3);
NetworkGraph build_al_dorado(std::uint64_t seed);

/// Per-timestep CRF transition log-scores, laid out [T][S][D] where
/// D = n_bases + 1 decisions per source state: index 0 is Stay, index
/// 1 + b is a move that shifts base b into the state.
struct TransitionFrames {
    int T = 0;
    int n_states = 4;
    int n_decisions = 5;
    std::vector<double> scores;

    TransitionFrames() = default;
    TransitionFrames(int frames, int states, int decisions);

    double& at(int t, int s, int d) { return scores[index(t, s, d)]; }
    double at(int t, int s, int d) const { return scores[index(t, s, d)]; }
    std::span<const double> frame(int t) const;
    int per_frame() const { return n_states * n_decisions; }

private:
    std::size_t index(int t, int s, int d) const {
        return (static_cast<std::size_t>(t) * n_states + s) * n_decisions + d;
    }
};

/// Activation tensor [steps][channels].
struct Activations {
    int steps = 0;
    int channels = 0;
    std::vector<float> data;
};

float swish(float x);
float sigmoid(float x);

/// Full-precision forward pass of a single layer.
Activations forward_layer(const LayerSpec& layer, const Activations& in);

/// Standard LSTM cell; gates ordered i, f, g, o.
std::pair<std::vector<float>, std::vector<float>> lstm_step(const LayerSpec& layer,
                                                            std::span<const float> x,
                                                            std::span<const float> h_prev,
                                                            std::span<const float> c_prev);

/// Zero-pads the tail of a chunk to a multiple of samples_per_frame (and to
/// at least the receptive field). Returns true when padding was added.
bool pad_chunk(std::vector<float>& chunk, const NetworkGraph& graph);

/// Shape CRF transition frames from a final activation tensor.
TransitionFrames to_frames(const Activations& out);

TransitionFrames infer_reference(const NetworkGraph& graph, std::span<const float> chunk);

/// Per-layer activations of a reference pass (index i = output of layer i).
std::vector<Activations> trace_reference(const NetworkGraph& graph, std::span<const float> chunk);

}  // namespace cimcall::dnn

#endif  // CIMCALL_DNN_HPP
