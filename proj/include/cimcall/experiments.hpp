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
 * @file experiments.hpp
 * @brief Read-level basecalling and the accuracy sweeps built on it.
 *
 * A read is chunked, every chunk is run through an inference callback and
 * a decoder, and the chunk calls are stitched. Reads are processed in
 * parallel; results are stored by read index so output order never depends
 * on scheduling.
 */

#ifndef CIMCALL_EXPERIMENTS_HPP
#define CIMCALL_EXPERIMENTS_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cimcall/analog.hpp"
#include "cimcall/decoder.hpp"
#include "cimcall/pipeline.hpp"

namespace cimcall::experiments {

enum class DecoderKind { Full, Greedy, LookAround };

struct DecoderSpec {
    DecoderKind kind = DecoderKind::LookAround;
    decoder::LAParams la;

    bool operator==(const DecoderSpec&) const = default;
};

const char* to_string(DecoderKind kind);
/// "full", "greedy" or "lookaround"; throws ConfigError otherwise.
DecoderKind decoder_kind_from_string(const std::string& s);

decoder::MoveSequence decode(const dnn::TransitionFrames& frames, const DecoderSpec& spec);

/// Inference on one zero-padded chunk. `key` is unique per (read, chunk).
using ChunkInfer = std::function<dnn::TransitionFrames(std::span<const float> chunk, std::uint64_t key)>;

ChunkInfer reference_infer(const dnn::NetworkGraph& graph);
/// Analog inference at `elapsed_s` after programming.
ChunkInfer analog_infer(const analog::ProgrammedSystem& system, double elapsed_s, std::uint64_t seed);

/// Network output for every chunk of a read.
struct ReadFrames {
    std::vector<pipeline::Chunk> chunks;
    std::vector<dnn::TransitionFrames> frames;
};

ReadFrames infer_read(const pipeline::SquiggleRead& read, const pipeline::ChunkPlan& plan,
                      const ChunkInfer& infer, std::uint64_t read_key);

/// Decode and stitch. Bases decoded from zero padding are dropped.
std::string call_read(const ReadFrames& frames, const pipeline::ChunkPlan& plan, int samples_per_frame,
                      const DecoderSpec& decoder);

struct Evaluation {
    std::vector<std::string> calls;
    std::vector<double> accuracy;  ///< per read, aligned identity
    double mean = 0.0;
};

Evaluation evaluate(const std::vector<pipeline::SquiggleRead>& reads, const pipeline::ChunkPlan& plan,
                    int samples_per_frame, const ChunkInfer& infer, const DecoderSpec& decoder,
                    std::uint64_t seed = 0);

/// Scores already-computed frames with another decoder.
Evaluation evaluate_frames(const std::vector<pipeline::SquiggleRead>& reads, const std::vector<ReadFrames>& frames,
                           const pipeline::ChunkPlan& plan, int samples_per_frame, const DecoderSpec& decoder);

std::vector<ReadFrames> infer_reads(const std::vector<pipeline::SquiggleRead>& reads,
                                    const pipeline::ChunkPlan& plan, const ChunkInfer& infer, std::uint64_t seed = 0);

/// `n` random reads of `bases` bases each, synthesized from `model`.
std::vector<pipeline::SquiggleRead> synth_reads(const pipeline::PoreModel& model, int n, int bases,
                                                std::uint64_t seed);

/// Zero-padded chunks of the first reads, for calibration.
std::vector<std::vector<float>> calibration_chunks(const std::vector<pipeline::SquiggleRead>& reads,
                                                   const pipeline::ChunkPlan& plan, int max_chunks);

// ---------------------------------------------------------------------------
// Sweeps

struct AnalogSetup {
    mapper::ArchDescription arch = mapper::ArchDescription::default_arch();
    pcm::DeviceParams device;
    analog::ExecOptions options;
    pipeline::ChunkPlan plan;
    DecoderSpec decoder;
    std::uint64_t seed = 1;
};

struct SensitivityRow {
    std::string config;  ///< "all_digital", "all_analog" or "digital_layer"
    int layer = -1;      ///< network layer kept digital, -1 for baselines
    double accuracy = 0.0;
    std::vector<double> per_read;
};

/// All-digital, all-analog, then each listed compute layer digital with the
/// rest analog, read `elapsed_s` after programming. An empty list means
/// every compute layer.
std::vector<SensitivityRow> layer_sensitivity_sweep(const dnn::NetworkGraph& graph,
                                                    const std::vector<pipeline::SquiggleRead>& reads,
                                                    const analog::Calibration& calibration, const AnalogSetup& setup,
                                                    double elapsed_s, const std::vector<int>& layers = {});

struct DriftPoint {
    double elapsed_s = 0.0;
    double accuracy = 0.0;
    std::vector<double> per_read;
};

/// Accuracy at each elapsed time; the same read-noise streams are used at
/// every time point. Times must be ascending.
std::vector<DriftPoint> drift_sweep(const analog::ProgrammedSystem& system,
                                    const std::vector<pipeline::SquiggleRead>& reads, const pipeline::ChunkPlan& plan,
                                    const DecoderSpec& decoder, const std::vector<double>& elapsed_s,
                                    std::uint64_t seed);

struct LaCell {
    int l_tp = 0;
    int l_mlp = 0;
    double accuracy = 0.0;
    std::vector<double> per_read;
};

/// LookAround accuracy for every (l_tp, l_mlp) pair on shared frames.
std::vector<LaCell> la_grid(const std::vector<pipeline::SquiggleRead>& reads, const std::vector<ReadFrames>& frames,
                            const pipeline::ChunkPlan& plan, int samples_per_frame, const std::vector<int>& l_tp,
                            const std::vector<int>& l_mlp);

}  // namespace cimcall::experiments

#endif  // CIMCALL_EXPERIMENTS_HPP
