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

#include "cimcall/config.hpp"

#include <algorithm>
#include <fstream>

#include "cimcall/json_util.hpp"
#include "cimcall/weights_io.hpp"

namespace cimcall::config {

using nlohmann::json;

namespace {

template <class T>
void read_field(const json& j, const char* key, T& out, const std::string& where) {
    const auto it = j.find(key);
    if (it == j.end()) return;
    try {
        out = it->template get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

/// Absent or null leaves `out` empty.
template <class T>
void read_optional(const json& j, const char* key, std::optional<T>& out, const std::string& where) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
        out.reset();
        return;
    }
    T v{};
    read_field(j, key, v, where);
    out = v;
}

json device_to_json(const pcm::DeviceParams& d) {
    return {{"g_max_uS", d.g_max_us},   {"sigma_prog_uS", d.sigma_prog_us}, {"sigma_read_uS", d.sigma_read_us},
            {"drift_nu", d.drift_nu},   {"t0_s", d.t0_s},                   {"adc_bits", d.adc_bits},
            {"input_bits", d.input_bits}};
}

pcm::DeviceParams device_from_json(const json& j) {
    const std::string w = "architecture.device";
    require_known_keys(j, {"g_max_uS", "sigma_prog_uS", "sigma_read_uS", "drift_nu", "t0_s", "adc_bits", "input_bits"},
                       w);
    pcm::DeviceParams d;
    read_field(j, "g_max_uS", d.g_max_us, w);
    read_field(j, "sigma_prog_uS", d.sigma_prog_us, w);
    read_field(j, "sigma_read_uS", d.sigma_read_us, w);
    read_field(j, "drift_nu", d.drift_nu, w);
    read_field(j, "t0_s", d.t0_s, w);
    read_field(j, "adc_bits", d.adc_bits, w);
    read_field(j, "input_bits", d.input_bits, w);
    return d;
}

template <class F>
auto wrap(const std::string& where, F&& f) {
    try {
        return f();
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        // Parsers of nested types report their own path; prefix only bare messages.
        if (msg.rfind(where, 0) == 0) throw;
        throw ConfigError(where + ": " + msg);
    } catch (const json::exception& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

}  // namespace

void ExperimentConfig::validate() const {
    wrap("architecture.arch", [&] { arch.validate(); });
    wrap("architecture.costs", [&] { costs.validate(); });
    wrap("architecture.device", [&] { device.validate(); });
    if (network.weights.empty() && network.builder != "al-dorado" && network.builder != "dorado-fast") {
        throw ConfigError("network.builder: expected al-dorado or dorado-fast, got '" + network.builder + "'");
    }
    if (mapping.mode != "auto" && mapping.mode != "file") {
        throw ConfigError("mapping.mode: expected auto or file, got '" + mapping.mode + "'");
    }
    if (mapping.mode == "file" && mapping.file.empty()) throw ConfigError("mapping.file: required when mode is file");
    wrap("pipeline", [&] { pipeline.plan.validate(); });
    const auto& pore = pipeline.pore;
    if (pore.levels != "random" && pore.levels != "spaced") {
        throw ConfigError("pipeline.pore.levels: expected random or spaced, got '" + pore.levels + "'");
    }
    if (pore.k < 1 || pore.k > 10) throw ConfigError("pipeline.pore.k: must be in [1, 10]");
    if (!(pore.half_range > 0.0)) throw ConfigError("pipeline.pore.half_range: must be > 0");
    if (pore.level_noise && !(*pore.level_noise >= 0.0)) throw ConfigError("pipeline.pore.level_noise: must be >= 0");
    if (pore.min_dwell && *pore.min_dwell < 1) throw ConfigError("pipeline.pore.min_dwell: must be >= 1");
    if (pore.mean_dwell && !(*pore.mean_dwell >= pore.min_dwell.value_or(1))) {
        throw ConfigError("pipeline.pore.mean_dwell: must be >= min_dwell");
    }
    if (pipeline.reads < 0) throw ConfigError("pipeline.reads: must be >= 0");
    if (pipeline.read_bases < 1) throw ConfigError("pipeline.read_bases: must be >= 1");
    wrap("decoder", [&] { decoder.la.validate(); });
    if (simulation.tokens < 1) throw ConfigError("simulation.tokens: must be >= 1");
    if (simulation.max_inflight < 0) throw ConfigError("simulation.max_inflight: must be >= 0");
    if (!(simulation.samples_per_base > 0.0)) throw ConfigError("simulation.samples_per_base: must be > 0");
    if (!(simulation.area_mm2 > 0.0)) throw ConfigError("simulation.area_mm2: must be > 0");
    const auto& o = analog.options;
    if (o.activation_bits < 2 || o.activation_bits > 16) throw ConfigError("analog.activation_bits: must be in [2, 16]");
    if (!(o.headroom > 0.0f)) throw ConfigError("analog.headroom: must be > 0");
    if (!(analog.elapsed_s >= 0.0)) throw ConfigError("analog.elapsed_s: must be >= 0");
    if (analog.calibration_chunks < 1) throw ConfigError("analog.calibration_chunks: must be >= 1");
    for (double t : sweep.drift_times_s) {
        if (!(t >= 0.0)) throw ConfigError("sweep.drift_times_s: times must be >= 0");
    }
    if (!std::is_sorted(sweep.drift_times_s.begin(), sweep.drift_times_s.end())) {
        throw ConfigError("sweep.drift_times_s: times must be ascending");
    }
    for (int v : sweep.la_tp) {
        if (v < 1) throw ConfigError("sweep.la_tp: values must be >= 1");
    }
    for (int v : sweep.la_mlp) {
        if (v < 1) throw ConfigError("sweep.la_mlp: values must be >= 1");
    }
    if (!(sweep.sensitivity_elapsed_s >= 0.0)) throw ConfigError("sweep.sensitivity_elapsed_s: must be >= 0");
}

json ExperimentConfig::to_json() const {
    json j;
    j["schema"] = "cimcall-config";
    j["version"] = kConfigVersion;
    j["seed"] = seed;
    j["architecture"] = {{"arch", arch.to_json()}, {"costs", costs.to_json()}, {"device", device_to_json(device)}};
    j["network"] = {{"builder", network.builder}, {"weights", network.weights}};
    j["mapping"] = {{"mode", mapping.mode},
                    {"file", mapping.file},
                    {"first_conv_digital", mapping.first_conv_digital},
                    {"digital_layers", mapping.digital_layers},
                    {"all_digital", mapping.all_digital}};
    const auto& p = pipeline.pore;
    j["pipeline"] = {{"chunk_size", pipeline.plan.chunk_size},
                     {"overlap", pipeline.plan.overlap},
                     {"pore",
                      {{"file", p.file},
                       {"k", p.k},
                       {"levels", p.levels},
                       {"half_range", p.half_range},
                       {"level_noise", p.level_noise ? json(*p.level_noise) : json(nullptr)},
                       {"mean_dwell", p.mean_dwell ? json(*p.mean_dwell) : json(nullptr)},
                       {"min_dwell", p.min_dwell ? json(*p.min_dwell) : json(nullptr)}}},
                     {"input", pipeline.input},
                     {"truth", pipeline.truth},
                     {"reads", pipeline.reads},
                     {"read_bases", pipeline.read_bases}};
    j["decoder"] = {{"kind", experiments::to_string(decoder.kind)},
                    {"l_tp", decoder.la.l_tp},
                    {"l_mlp", decoder.la.l_mlp}};
    j["simulation"] = {{"tokens", simulation.tokens},
                       {"max_inflight", simulation.max_inflight},
                       {"io", simulation.io},
                       {"samples_per_base", simulation.samples_per_base},
                       {"area_mm2", simulation.area_mm2}};
    const auto& o = analog.options;
    j["analog"] = {{"enabled", analog.enabled},
                   {"activation_bits", o.activation_bits},
                   {"fp16", o.fp16},
                   {"drift_compensation", o.drift_compensation},
                   {"headroom", o.headroom},
                   {"elapsed_s", analog.elapsed_s},
                   {"calibration_chunks", analog.calibration_chunks}};
    j["sweep"] = {{"drift_times_s", sweep.drift_times_s},
                  {"la_tp", sweep.la_tp},
                  {"la_mlp", sweep.la_mlp},
                  {"sensitivity_layers", sweep.sensitivity_layers ? json(*sweep.sensitivity_layers) : json(nullptr)},
                  {"sensitivity_elapsed_s", sweep.sensitivity_elapsed_s}};
    return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    require_known_keys(j,
                       {"schema", "version", "seed", "architecture", "network", "mapping", "pipeline", "decoder",
                        "simulation", "analog", "sweep"},
                       "config");
    if (j.contains("schema") && j["schema"] != "cimcall-config") {
        throw ConfigError("config.schema: expected \"cimcall-config\"");
    }
    if (!j.contains("version")) throw ConfigError("config.version: missing (expected 1)");
    if (j["version"] != kConfigVersion) {
        throw ConfigError("config.version: unsupported version " + j["version"].dump() + " (expected 1)");
    }

    ExperimentConfig c;
    read_field(j, "seed", c.seed, "config");

    if (const auto it = j.find("architecture"); it != j.end()) {
        require_known_keys(*it, {"arch", "costs", "device"}, "architecture");
        if (it->contains("arch")) {
            c.arch = wrap("architecture.arch", [&] { return mapper::ArchDescription::from_json(it->at("arch")); });
        }
        if (it->contains("costs")) {
            c.costs = wrap("architecture.costs", [&] { return meshsim::CostTable::from_json(it->at("costs")); });
        }
        if (it->contains("device")) c.device = device_from_json(it->at("device"));
    }
    if (const auto it = j.find("network"); it != j.end()) {
        require_known_keys(*it, {"builder", "weights"}, "network");
        read_field(*it, "builder", c.network.builder, "network");
        read_field(*it, "weights", c.network.weights, "network");
    }
    if (const auto it = j.find("mapping"); it != j.end()) {
        require_known_keys(*it, {"mode", "file", "first_conv_digital", "digital_layers", "all_digital"}, "mapping");
        read_field(*it, "mode", c.mapping.mode, "mapping");
        read_field(*it, "file", c.mapping.file, "mapping");
        read_field(*it, "first_conv_digital", c.mapping.first_conv_digital, "mapping");
        read_field(*it, "digital_layers", c.mapping.digital_layers, "mapping");
        read_field(*it, "all_digital", c.mapping.all_digital, "mapping");
    }
    if (const auto it = j.find("pipeline"); it != j.end()) {
        const std::string w = "pipeline";
        require_known_keys(*it, {"chunk_size", "overlap", "pore", "input", "truth", "reads", "read_bases"}, w);
        read_field(*it, "chunk_size", c.pipeline.plan.chunk_size, w);
        read_field(*it, "overlap", c.pipeline.plan.overlap, w);
        read_field(*it, "input", c.pipeline.input, w);
        read_field(*it, "truth", c.pipeline.truth, w);
        read_field(*it, "reads", c.pipeline.reads, w);
        read_field(*it, "read_bases", c.pipeline.read_bases, w);
        if (const auto pit = it->find("pore"); pit != it->end()) {
            const std::string pw = "pipeline.pore";
            require_known_keys(*pit, {"file", "k", "levels", "half_range", "level_noise", "mean_dwell", "min_dwell"},
                               pw);
            auto& p = c.pipeline.pore;
            read_field(*pit, "file", p.file, pw);
            read_field(*pit, "k", p.k, pw);
            read_field(*pit, "levels", p.levels, pw);
            read_field(*pit, "half_range", p.half_range, pw);
            read_optional(*pit, "level_noise", p.level_noise, pw);
            read_optional(*pit, "mean_dwell", p.mean_dwell, pw);
            read_optional(*pit, "min_dwell", p.min_dwell, pw);
        }
    }
    if (const auto it = j.find("decoder"); it != j.end()) {
        require_known_keys(*it, {"kind", "l_tp", "l_mlp"}, "decoder");
        std::string kind = experiments::to_string(c.decoder.kind);
        read_field(*it, "kind", kind, "decoder");
        c.decoder.kind = wrap("decoder.kind", [&] { return experiments::decoder_kind_from_string(kind); });
        read_field(*it, "l_tp", c.decoder.la.l_tp, "decoder");
        read_field(*it, "l_mlp", c.decoder.la.l_mlp, "decoder");
    }
    if (const auto it = j.find("simulation"); it != j.end()) {
        const std::string w = "simulation";
        require_known_keys(*it, {"tokens", "max_inflight", "io", "samples_per_base", "area_mm2"}, w);
        read_field(*it, "tokens", c.simulation.tokens, w);
        read_field(*it, "max_inflight", c.simulation.max_inflight, w);
        read_field(*it, "io", c.simulation.io, w);
        read_field(*it, "samples_per_base", c.simulation.samples_per_base, w);
        read_field(*it, "area_mm2", c.simulation.area_mm2, w);
    }
    if (const auto it = j.find("analog"); it != j.end()) {
        const std::string w = "analog";
        require_known_keys(*it,
                           {"enabled", "activation_bits", "fp16", "drift_compensation", "headroom", "elapsed_s",
                            "calibration_chunks"},
                           w);
        auto& o = c.analog.options;
        read_field(*it, "enabled", c.analog.enabled, w);
        read_field(*it, "activation_bits", o.activation_bits, w);
        read_field(*it, "fp16", o.fp16, w);
        read_field(*it, "drift_compensation", o.drift_compensation, w);
        read_field(*it, "headroom", o.headroom, w);
        read_field(*it, "elapsed_s", c.analog.elapsed_s, w);
        read_field(*it, "calibration_chunks", c.analog.calibration_chunks, w);
    }
    if (const auto it = j.find("sweep"); it != j.end()) {
        const std::string w = "sweep";
        require_known_keys(*it, {"drift_times_s", "la_tp", "la_mlp", "sensitivity_layers", "sensitivity_elapsed_s"},
                           w);
        read_field(*it, "drift_times_s", c.sweep.drift_times_s, w);
        read_field(*it, "la_tp", c.sweep.la_tp, w);
        read_field(*it, "la_mlp", c.sweep.la_mlp, w);
        read_field(*it, "sensitivity_elapsed_s", c.sweep.sensitivity_elapsed_s, w);
        read_optional(*it, "sensitivity_layers", c.sweep.sensitivity_layers, w);
    }
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + path.string() + "': " + e.what());
    }
    auto c = from_json(j);
    // File references inside a config are relative to the config itself.
    const auto base = path.parent_path();
    for (std::string* f : {&c.network.weights, &c.mapping.file, &c.pipeline.pore.file, &c.pipeline.input,
                           &c.pipeline.truth}) {
        if (!f->empty() && std::filesystem::path(*f).is_relative()) *f = (base / *f).lexically_normal().string();
    }
    return c;
}

std::uint64_t component_seed(const ExperimentConfig& config, SeedStream stream) {
    return derive_seed(config.seed, static_cast<std::uint64_t>(stream));
}

dnn::NetworkGraph build_network(const ExperimentConfig& config) {
    if (!config.network.weights.empty()) return dnn::load_network(config.network.weights);
    const auto seed = component_seed(config, SeedStream::Network);
    if (config.network.builder == "dorado-fast") return dnn::build_dorado_fast(seed);
    if (config.network.builder == "al-dorado") return dnn::build_al_dorado(seed);
    throw ConfigError("network.builder: unknown builder '" + config.network.builder + "'");
}

mapper::Mapping build_mapping(const ExperimentConfig& config, const dnn::NetworkGraph& graph) {
    mapper::MappingStrategy strategy;
    strategy.first_conv_digital = config.mapping.first_conv_digital;
    strategy.digital_layers = config.mapping.digital_layers;
    strategy.all_digital = config.mapping.all_digital;
    if (config.mapping.mode == "auto") return mapper::map_network(graph, config.arch, strategy);

    std::ifstream in(config.mapping.file);
    if (!in) throw InputError("cannot open mapping '" + config.mapping.file + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("mapping.file: " + std::string(e.what()));
    }
    auto m = mapper::Mapping::from_json(j);
    const auto problems = mapper::validate_mapping(m, graph, config.arch, strategy);
    if (!problems.empty()) throw MappingError("mapping.file: " + problems.front());
    return m;
}

pipeline::PoreModel build_pore_model(const ExperimentConfig& config) {
    const auto& p = config.pipeline.pore;
    pipeline::PoreModel m;
    if (!p.file.empty()) {
        m = pipeline::PoreModel::load(p.file);
    } else {
        const auto seed = component_seed(config, SeedStream::PoreModel);
        m = p.levels == "spaced" ? pipeline::PoreModel::spaced(p.k, seed, p.half_range)
                                 : pipeline::PoreModel::random(p.k, seed);
        m.level_noise = 0.1;
        m.mean_dwell = 10.0;
        m.min_dwell = 1;
    }
    if (p.level_noise) m.level_noise = *p.level_noise;
    if (p.mean_dwell) m.mean_dwell = *p.mean_dwell;
    if (p.min_dwell) m.min_dwell = *p.min_dwell;
    try {
        m.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("pipeline.pore: ") + e.what());
    }
    return m;
}

std::vector<pipeline::SquiggleRead> build_reads(const ExperimentConfig& config) {
    const auto& pc = config.pipeline;
    if (pc.input.empty()) {
        return experiments::synth_reads(build_pore_model(config), pc.reads, pc.read_bases,
                                        component_seed(config, SeedStream::Reads));
    }
    auto reads = pipeline::read_raw(pc.input);
    if (!pc.truth.empty()) {
        const auto truth = pipeline::read_fasta(pc.truth);
        if (truth.size() != reads.size()) {
            throw InputError("pipeline.truth: " + std::to_string(truth.size()) + " records for " +
                             std::to_string(reads.size()) + " reads");
        }
        for (std::size_t i = 0; i < reads.size(); ++i) {
            reads[i].id = truth[i].name;
            reads[i].sequence = truth[i].sequence;
        }
    }
    return reads;
}

}  // namespace cimcall::config
