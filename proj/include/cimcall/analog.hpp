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

// Noise- and drift-aware execution of a mapped network.
//
// Numeric contract of an analog layer:
//   input (float) -> signed 8-bit PWM code with a per-layer static scale
//   crossbar read -> signed 10-bit ADC code per column
//   code * out_scale [* drift compensation] -> float, + bias, aux ops
// Auxiliary and digital math is rounded to binary16 after every op, and
// the activation leaving each compute block is quantized to signed 10-bit
// with a per-block static scale. Scales come from a calibration pass of
// the float reference over a few chunks.

#ifndef CIMCALL_ANALOG_HPP
#define CIMCALL_ANALOG_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "cimcall/dnn.hpp"
#include "cimcall/mapper.hpp"
#include "cimcall/pcm.hpp"

namespace cimcall::analog {

/// Per compute layer ranges observed on the calibration batch.
struct LayerRange {
    int layer = 0;
    float input_absmax = 0.0f;   ///< layer input x
    float hidden_absmax = 0.0f;  ///< LSTM hidden state, 0 otherwise
    float matvec_absmax = 0.0f;  ///< W * input before bias
    float output_absmax = 0.0f;  ///< block output after its aux layers
};

struct Calibration {
    std::vector<LayerRange> layers;  ///< one per compute layer, in order

    const LayerRange& at(int layer) const;
};

/// Runs the float reference on each chunk and records absolute maxima.
Calibration calibrate(const dnn::NetworkGraph& graph, const std::vector<std::vector<float>>& chunks);

struct ExecOptions {
    int activation_bits = 10;
    /// Round auxiliary and digital math to binary16.
    bool fp16 = true;
    /// Undo the mean conductance decay digitally after the ADC, as a
    /// global drift compensation would. The correction assumes the nominal
    /// drift exponent, so it removes the average decay but not the growth
    /// of read noise relative to the signal.
    bool drift_compensation = true;
    /// Multiplies every calibrated range, leaving room above the batch max.
    float headroom = 1.0f;

    bool operator==(const ExecOptions&) const = default;
};

struct AnalogLayerState {
    int layer = 0;
    bool analog = false;
    double w_max = 0.0;
    float in_scale = 1.0f;   ///< float value of one input code step
    /// LSTM recurrent rows get their own input step; their weights are
    /// programmed pre-multiplied by in_scale_h / in_scale so one ADC scale
    /// serves both row groups.
    float in_scale_h = 1.0f;
    float out_scale = 1.0f;  ///< float value of one ADC code step
    float act_scale = 1.0f;  ///< float value of one inter-layer code step
};

struct ProgrammedSystem {
    dnn::NetworkGraph graph;
    mapper::Mapping mapping;
    pcm::DeviceParams device;
    ExecOptions options;
    std::vector<pcm::ProgrammedTile> tiles;  ///< indexed by tile id
    std::vector<AnalogLayerState> layers;    ///< one per compute layer
    double program_time = 0.0;
    std::size_t clipped_weights = 0;

    const AnalogLayerState& state(int layer) const;
    bool any_analog() const;
};

/// Largest absolute weight of a layer (0 for elementwise layers).
double weight_absmax(const dnn::LayerSpec& layer);

/// Programs every analog layer of the mapping onto its tiles. Throws
/// MappingError when a piece exceeds tile bounds or the mapping does not
/// cover the graph.
ProgrammedSystem program_network(const dnn::NetworkGraph& graph, const mapper::Mapping& mapping,
                                 const pcm::DeviceParams& device, const Calibration& calibration,
                                 std::uint64_t seed, double program_time = 0.0, const ExecOptions& options = {});

/// Inference at absolute time t_read. Read noise streams are keyed by
/// `seed`, the layer, the crossbar piece and the step, so results do not
/// depend on thread count. A system without analog layers runs the float
/// reference. Throws Error when t_read precedes program_time.
dnn::TransitionFrames infer_analog(const ProgrammedSystem& system, std::span<const float> chunk, double t_read,
                                   std::uint64_t seed);

/// Quantize to a signed code with the given step; saturates.
int quantize(float x, float step, int bits);

}  // namespace cimcall::analog

#endif  // CIMCALL_ANALOG_HPP
