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
 * @file config.hpp
 * @brief Experiment configuration shared by every command.
 *
 * The on-disk form is a JSON object with `"schema": "cimcall-config"` and
 * `"version": 1`. Every section is optional and falls back to the defaults
 * below; unknown keys are rejected with the dotted path of the offending
 * key. All randomness derives from the single top-level `seed`.
 */

#ifndef CIMCALL_CONFIG_HPP
#define CIMCALL_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cimcall/analog.hpp"
#include "cimcall/dnn.hpp"
#include "cimcall/experiments.hpp"
#include "cimcall/mapper.hpp"
#include "cimcall/meshsim.hpp"
#include "cimcall/pcm.hpp"
#include "cimcall/pipeline.hpp"

namespace cimcall::config {

inline constexpr int kConfigVersion = 1;

struct NetworkConfig {
    /// "al-dorado" or "dorado-fast"; ignored when `weights` is set.
    std::string builder = "al-dorado";
    /// Weight manifest written by save_network.
    std::string weights;

    bool operator==(const NetworkConfig&) const = default;
};

struct MappingConfig {
    /// "auto" runs the greedy mapper, "file" loads `file`.
    std::string mode = "auto";
    std::string file;
    bool first_conv_digital = true;
    std::vector<int> digital_layers;
    bool all_digital = false;

    bool operator==(const MappingConfig&) const = default;
};

struct PoreConfig {
    /// Pore model JSON; when empty a model is generated from the fields below.
    std::string file;
    int k = 6;
    /// "random" (Gaussian levels) or "spaced" (evenly spaced, shuffled).
    std::string levels = "random";
    double half_range = 2.0;  ///< only for "spaced"
    /// When set, replace the model's value (loaded or generated). Generated
    /// models otherwise use noise 0.1, mean dwell 10 and min dwell 1.
    std::optional<double> level_noise;
    std::optional<double> mean_dwell;
    std::optional<int> min_dwell;

    bool operator==(const PoreConfig&) const = default;
};

struct PipelineConfig {
    pipeline::ChunkPlan plan;
    PoreConfig pore;
    /// Raw read container to basecall; synthetic reads are used when empty.
    std::string input;
    /// Optional FASTA of true sequences for `input`, matched by order.
    std::string truth;
    int reads = 200;
    int read_bases = 400;

    bool operator==(const PipelineConfig&) const = default;
};

struct SimulationConfig {
    int tokens = 200;
    int max_inflight = 0;  ///< 0 selects compute layers + 1
    bool io = true;
    double samples_per_base = 10.0;
    double area_mm2 = 25.0;

    bool operator==(const SimulationConfig&) const = default;
};

struct AnalogConfig {
    /// Basecall through the programmed crossbars instead of the float model.
    bool enabled = false;
    analog::ExecOptions options;
    double elapsed_s = 20.0;  ///< read time after programming
    int calibration_chunks = 8;

    bool operator==(const AnalogConfig&) const = default;
};

struct SweepConfig {
    std::vector<double> drift_times_s{20.0, 3600.0, 86400.0, 864000.0};
    std::vector<int> la_tp{1, 2, 3, 4};
    std::vector<int> la_mlp{1, 2, 3, 4};
    /// Compute layers to try digital one at a time; absent means all.
    std::optional<std::vector<int>> sensitivity_layers;
    double sensitivity_elapsed_s = 86400.0;

    bool operator==(const SweepConfig&) const = default;
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    mapper::ArchDescription arch = mapper::ArchDescription::default_arch();
    meshsim::CostTable costs;
    pcm::DeviceParams device;
    NetworkConfig network;
    MappingConfig mapping;
    PipelineConfig pipeline;
    experiments::DecoderSpec decoder;
    SimulationConfig simulation;
    AnalogConfig analog;
    SweepConfig sweep;

    /// Throws ConfigError naming the failing field.
    void validate() const;

    nlohmann::json to_json() const;
    /// Missing keys keep their defaults. Throws ConfigError.
    static ExperimentConfig from_json(const nlohmann::json& j);
    /// Throws InputError when unreadable, ConfigError when malformed.
    /// Relative file paths in the config are resolved against its directory.
    static ExperimentConfig load(const std::filesystem::path& path);

    bool operator==(const ExperimentConfig&) const = default;
};

/// Stream labels for derive_seed(config.seed, label).
enum class SeedStream : std::uint64_t { Network = 1, PoreModel = 2, Reads = 3, Programming = 4, Inference = 5 };

std::uint64_t component_seed(const ExperimentConfig& config, SeedStream stream);

dnn::NetworkGraph build_network(const ExperimentConfig& config);
mapper::Mapping build_mapping(const ExperimentConfig& config, const dnn::NetworkGraph& graph);
pipeline::PoreModel build_pore_model(const ExperimentConfig& config);

/// Loaded reads when `pipeline.input` is set, synthetic reads otherwise.
std::vector<pipeline::SquiggleRead> build_reads(const ExperimentConfig& config);

}  // namespace cimcall::config

#endif  // CIMCALL_CONFIG_HPP
