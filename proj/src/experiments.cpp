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

#include "cimcall/experiments.hpp"

#include <algorithm>
#include <numeric>

namespace cimcall::experiments {

const char* to_string(DecoderKind kind) {
    switch (kind) {
        case DecoderKind::Full: return "full";
        case DecoderKind::Greedy: return "greedy";
        case DecoderKind::LookAround: return "lookaround";
    }
    return "?";
}

DecoderKind decoder_kind_from_string(const std::string& s) {
    if (s == "full") return DecoderKind::Full;
    if (s == "greedy") return DecoderKind::Greedy;
    if (s == "lookaround") return DecoderKind::LookAround;
    throw ConfigError("decoder: expected full, greedy or lookaround, got '" + s + "'");
}

decoder::MoveSequence decode(const dnn::TransitionFrames& frames, const DecoderSpec& spec) {
    switch (spec.kind) {
        case DecoderKind::Full: return decoder::full_crf_decode(frames);
        case DecoderKind::Greedy: return decoder::greedy_decode(frames);
        case DecoderKind::LookAround: return decoder::lookaround_decode(frames, spec.la);
    }
    throw ConfigError("decoder: unknown kind");
}

ChunkInfer reference_infer(const dnn::NetworkGraph& graph) {
    return [&graph](std::span<const float> chunk, std::uint64_t) { return dnn::infer_reference(graph, chunk); };
}

ChunkInfer analog_infer(const analog::ProgrammedSystem& system, double elapsed_s, std::uint64_t seed) {
    return [&system, elapsed_s, seed](std::span<const float> chunk, std::uint64_t key) {
        return analog::infer_analog(system, chunk, system.program_time + elapsed_s, derive_seed(seed, key));
    };
}

ReadFrames infer_read(const pipeline::SquiggleRead& read, const pipeline::ChunkPlan& plan, const ChunkInfer& infer,
                      std::uint64_t read_key) {
    ReadFrames out;
    out.chunks = pipeline::chunk(read.samples, plan);
    for (std::size_t i = 0; i < out.chunks.size(); ++i) {
        out.frames.push_back(infer(out.chunks[i].samples, derive_seed(read_key, i)));
    }
    return out;
}

std::string call_read(const ReadFrames& rf, const pipeline::ChunkPlan& plan, int samples_per_frame,
                      const DecoderSpec& spec) {
    std::vector<pipeline::ChunkCall> calls;
    for (std::size_t i = 0; i < rf.chunks.size(); ++i) {
        const auto moves = decode(rf.frames[i], spec);
        pipeline::ChunkCall call;
        std::vector<int> frames;
        const auto bases = decoder::collapse_moves(moves, frames);
        call.valid_frames = static_cast<int>((rf.chunks[i].valid + samples_per_frame - 1) / samples_per_frame);
        for (std::size_t b = 0; b < bases.size(); ++b) {
            if (frames[b] < call.valid_frames) {
                call.bases.push_back(bases[b]);
                call.base_frames.push_back(frames[b]);
            }
        }
        calls.push_back(std::move(call));
    }
    return pipeline::stitch(calls, plan, samples_per_frame);
}

namespace {

double accuracy_of(const std::string& call, const std::string& truth) {
    if (truth.empty()) throw InputError("evaluate: read has no ground truth");
    return call.empty() ? 0.0 : pipeline::aligned_accuracy(call, truth);
}

void finish(Evaluation& e) {
    e.mean = e.accuracy.empty() ? 0.0
                                : std::accumulate(e.accuracy.begin(), e.accuracy.end(), 0.0) /
                                      static_cast<double>(e.accuracy.size());
}

std::uint64_t read_key(std::uint64_t seed, std::size_t i) { return derive_seed(seed, 0x5eed0000ULL + i); }

}  // namespace

std::vector<ReadFrames> infer_reads(const std::vector<pipeline::SquiggleRead>& reads, const pipeline::ChunkPlan& plan,
                                    const ChunkInfer& infer, std::uint64_t seed) {
    std::vector<ReadFrames> out(reads.size());
    const auto n = static_cast<std::ptrdiff_t>(reads.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        out[i] = infer_read(reads[i], plan, infer, read_key(seed, static_cast<std::size_t>(i)));
    }
    return out;
}

Evaluation evaluate_frames(const std::vector<pipeline::SquiggleRead>& reads, const std::vector<ReadFrames>& frames,
                           const pipeline::ChunkPlan& plan, int samples_per_frame, const DecoderSpec& decoder) {
    if (frames.size() != reads.size()) throw Error("evaluate_frames: one frame set per read expected");
    Evaluation e;
    e.calls.resize(reads.size());
    e.accuracy.resize(reads.size());
    const auto n = static_cast<std::ptrdiff_t>(reads.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        e.calls[i] = call_read(frames[i], plan, samples_per_frame, decoder);
        e.accuracy[i] = accuracy_of(e.calls[i], reads[i].sequence);
    }
    finish(e);
    return e;
}

Evaluation evaluate(const std::vector<pipeline::SquiggleRead>& reads, const pipeline::ChunkPlan& plan,
                    int samples_per_frame, const ChunkInfer& infer, const DecoderSpec& decoder, std::uint64_t seed) {
    Evaluation e;
    e.calls.resize(reads.size());
    e.accuracy.resize(reads.size());
    const auto n = static_cast<std::ptrdiff_t>(reads.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto rf = infer_read(reads[i], plan, infer, read_key(seed, static_cast<std::size_t>(i)));
        e.calls[i] = call_read(rf, plan, samples_per_frame, decoder);
        e.accuracy[i] = accuracy_of(e.calls[i], reads[i].sequence);
    }
    finish(e);
    return e;
}

std::vector<pipeline::SquiggleRead> synth_reads(const pipeline::PoreModel& model, int n, int bases,
                                                std::uint64_t seed) {
    if (n < 0 || bases < 1) throw ConfigError("synth_reads: need n >= 0 and bases >= 1");
    std::vector<pipeline::SquiggleRead> reads;
    reads.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Rng rng(derive_seed(seed, 2 * static_cast<std::uint64_t>(i)));
        const auto seq = pipeline::random_sequence(static_cast<std::size_t>(bases), rng);
        auto r = pipeline::synth_squiggle(seq, model, derive_seed(seed, 2 * static_cast<std::uint64_t>(i) + 1));
        r.channel = static_cast<std::uint32_t>(i % 512);
        r.id = "read" + std::to_string(i);
        reads.push_back(std::move(r));
    }
    return reads;
}

std::vector<std::vector<float>> calibration_chunks(const std::vector<pipeline::SquiggleRead>& reads,
                                                   const pipeline::ChunkPlan& plan, int max_chunks) {
    std::vector<std::vector<float>> out;
    for (const auto& r : reads) {
        for (auto& c : pipeline::chunk(r.samples, plan)) {
            if (static_cast<int>(out.size()) >= max_chunks) return out;
            out.push_back(std::move(c.samples));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sweeps

std::vector<SensitivityRow> layer_sensitivity_sweep(const dnn::NetworkGraph& graph,
                                                    const std::vector<pipeline::SquiggleRead>& reads,
                                                    const analog::Calibration& calibration, const AnalogSetup& setup,
                                                    double elapsed_s, const std::vector<int>& layers) {
    const int spf = graph.samples_per_frame();
    std::vector<std::pair<SensitivityRow, mapper::MappingStrategy>> configs;
    {
        mapper::MappingStrategy s;
        s.all_digital = true;
        configs.push_back({{"all_digital", -1, 0.0, {}}, s});
    }
    {
        mapper::MappingStrategy s;
        s.first_conv_digital = false;
        configs.push_back({{"all_analog", -1, 0.0, {}}, s});
    }
    const auto compute = graph.compute_layers();
    for (int li : layers) {
        if (std::find(compute.begin(), compute.end(), li) == compute.end()) {
            throw ConfigError("sweep.sensitivity_layers: layer " + std::to_string(li) + " is not a compute layer");
        }
    }
    for (int li : layers.empty() ? compute : layers) {
        mapper::MappingStrategy s;
        s.first_conv_digital = false;
        s.digital_layers = {li};
        configs.push_back({{"digital_layer", li, 0.0, {}}, s});
    }
    std::vector<SensitivityRow> rows;
    for (auto& [row, strategy] : configs) {
        const auto mapping = mapper::map_network(graph, setup.arch, strategy);
        const auto sys = analog::program_network(graph, mapping, setup.device, calibration, setup.seed, 0.0,
                                                 setup.options);
        const auto e = evaluate(reads, setup.plan, spf, analog_infer(sys, elapsed_s, setup.seed), setup.decoder,
                                setup.seed);
        row.accuracy = e.mean;
        row.per_read = e.accuracy;
        rows.push_back(row);
    }
    return rows;
}

std::vector<DriftPoint> drift_sweep(const analog::ProgrammedSystem& system,
                                    const std::vector<pipeline::SquiggleRead>& reads, const pipeline::ChunkPlan& plan,
                                    const DecoderSpec& decoder, const std::vector<double>& elapsed_s,
                                    std::uint64_t seed) {
    if (!std::is_sorted(elapsed_s.begin(), elapsed_s.end())) throw ConfigError("drift_sweep: times must be ascending");
    std::vector<DriftPoint> out;
    for (double t : elapsed_s) {
        if (t < 0.0) throw ConfigError("drift_sweep: negative elapsed time");
        const auto e = evaluate(reads, plan, system.graph.samples_per_frame(), analog_infer(system, t, seed), decoder,
                                seed);
        out.push_back({t, e.mean, e.accuracy});
    }
    return out;
}

std::vector<LaCell> la_grid(const std::vector<pipeline::SquiggleRead>& reads, const std::vector<ReadFrames>& frames,
                            const pipeline::ChunkPlan& plan, int samples_per_frame, const std::vector<int>& l_tp,
                            const std::vector<int>& l_mlp) {
    std::vector<LaCell> out;
    for (int tp : l_tp) {
        for (int mlp : l_mlp) {
            DecoderSpec spec;
            spec.kind = DecoderKind::LookAround;
            spec.la = {tp, mlp};
            spec.la.validate();
            const auto e = evaluate_frames(reads, frames, plan, samples_per_frame, spec);
            out.push_back({tp, mlp, e.mean, e.accuracy});
        }
    }
    return out;
}

}  // namespace cimcall::experiments
