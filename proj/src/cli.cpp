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

#include "cimcall/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "cimcall/config.hpp"
#include "cimcall/decoder.hpp"
#include "cimcall/experiments.hpp"
#include "cimcall/meshsim.hpp"
#include "cimcall/pipeline.hpp"

namespace cimcall::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Raised when a sweep axis has no points.
class EmptyAxisError : public Error {
public:
    using Error::Error;
};

/// Reads produced by a flow cell per second at 512 channels, 4 kHz and
/// 10 samples per base.
constexpr double kRealTimeBasesPerSecond = 512.0 * 4000.0 / 10.0;

/// Command-line values that override config keys. Each is applied only
/// when its flag was given.
struct Overrides {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    std::string builder, weights, mapping_file;
    bool first_conv_digital = true;
    std::vector<int> digital_layers;
    bool all_digital = false;
    int chunk_size = 0, overlap = 0;
    std::string pore_model, pore_levels, input, truth;
    int pore_k = 0, min_dwell = 0, reads = 0, read_bases = 0;
    double level_noise = 0.0, mean_dwell = 0.0;
    std::string decoder_kind;
    int l_tp = 0, l_mlp = 0;
    int tokens = 0, max_inflight = 0;
    bool no_io = false;
    bool analog = false;
    double elapsed_s = 0.0;
    bool drift_compensation = false;
    double sigma_prog = 0.0, sigma_read = 0.0, drift_nu = 0.0;
    std::vector<double> drift_times;
    std::vector<int> la_tp, la_mlp, sensitivity_layers;
};

struct Options {
    std::map<std::string, CLI::Option*> given;

    bool has(const std::string& name) const {
        const auto it = given.find(name);
        return it != given.end() && it->second->count() > 0;
    }
};

void add_overrides(CLI::App& app, Overrides& o, Options& opts) {
    auto add = [&](const std::string& name, CLI::Option* opt) { opts.given[name] = opt; };
    add("config", app.add_option("--config", o.config_path, "Experiment config (JSON)"));
    add("out-dir", app.add_option("--out-dir", o.out_dir, "Output directory"));
    add("seed", app.add_option("--seed", o.seed, "Top-level seed"));
    add("builder", app.add_option("--network-builder", o.builder, "al-dorado or dorado-fast"));
    add("weights", app.add_option("--weights", o.weights, "Weight manifest"));
    add("mapping-file", app.add_option("--mapping-file", o.mapping_file, "Mapping JSON (sets mapping.mode=file)"));
    add("first-conv-digital", app.add_option("--first-conv-digital", o.first_conv_digital, "true or false"));
    add("digital-layers", app.add_option("--digital-layers", o.digital_layers, "Compute layers kept digital")
                              ->delimiter(','));
    add("all-digital", app.add_flag("--all-digital", o.all_digital, "Keep every layer digital"));
    add("chunk-size", app.add_option("--chunk-size", o.chunk_size, "Samples per chunk"));
    add("overlap", app.add_option("--overlap", o.overlap, "Samples shared by neighbouring chunks"));
    add("pore-model", app.add_option("--pore-model", o.pore_model, "Pore model JSON"));
    add("pore-k", app.add_option("--pore-k", o.pore_k, "k-mer length of a generated pore model"));
    add("pore-levels", app.add_option("--pore-levels", o.pore_levels, "random or spaced"));
    add("level-noise", app.add_option("--level-noise", o.level_noise, "Signal noise std-dev"));
    add("mean-dwell", app.add_option("--mean-dwell", o.mean_dwell, "Mean samples per base"));
    add("min-dwell", app.add_option("--min-dwell", o.min_dwell, "Minimum samples per base"));
    add("input", app.add_option("--input", o.input, "Raw read file"));
    add("truth", app.add_option("--truth", o.truth, "FASTA of true sequences for --input"));
    add("reads", app.add_option("--reads", o.reads, "Synthetic read count"));
    add("read-bases", app.add_option("--read-bases", o.read_bases, "Bases per synthetic read"));
    add("decoder", app.add_option("--decoder", o.decoder_kind, "full, greedy or lookaround"));
    add("ltp", app.add_option("--ltp", o.l_tp, "LookAround transition look-ahead"));
    add("lmlp", app.add_option("--lmlp", o.l_mlp, "LookAround path look-ahead"));
    add("tokens", app.add_option("--tokens", o.tokens, "Simulated tokens"));
    add("max-inflight", app.add_option("--max-inflight", o.max_inflight, "Token admission cap, 0 = auto"));
    add("no-io", app.add_flag("--no-io", o.no_io, "Simulate compute only"));
    add("analog", app.add_flag("--analog", o.analog, "Basecall on the programmed crossbars"));
    add("elapsed", app.add_option("--elapsed", o.elapsed_s, "Seconds between programming and inference"));
    add("drift-compensation", app.add_option("--drift-compensation", o.drift_compensation,
                                             "Rescale ADC outputs by the inverse drift factor (true or false)"));
    add("sigma-prog", app.add_option("--sigma-prog", o.sigma_prog, "Programming noise std-dev, uS"));
    add("sigma-read", app.add_option("--sigma-read", o.sigma_read, "Read noise std-dev, uS"));
    add("drift-nu", app.add_option("--drift-nu", o.drift_nu, "Drift exponent"));
    add("drift-times", app.add_option("--drift-times", o.drift_times, "Drift sweep times in seconds")
                           ->delimiter(','));
    add("la-tp", app.add_option("--la-tp", o.la_tp, "L_TP values of the LA grid")->delimiter(','));
    add("la-mlp", app.add_option("--la-mlp", o.la_mlp, "L_MLP values of the LA grid")->delimiter(','));
    add("sensitivity-layers", app.add_option("--sensitivity-layers", o.sensitivity_layers,
                                             "Layers tried digital one at a time")
                                  ->delimiter(','));
}

config::ExperimentConfig resolve_config(const Overrides& o, const Options& opts) {
    config::ExperimentConfig c;
    if (opts.has("config")) {
        try {
            c = config::ExperimentConfig::load(o.config_path);
        } catch (const InputError& e) {
            throw ConfigError(std::string("--config: ") + e.what());
        }
    }
    if (opts.has("seed")) c.seed = o.seed;
    if (opts.has("builder")) c.network.builder = o.builder;
    if (opts.has("weights")) c.network.weights = o.weights;
    if (opts.has("mapping-file")) {
        c.mapping.mode = "file";
        c.mapping.file = o.mapping_file;
    }
    if (opts.has("first-conv-digital")) c.mapping.first_conv_digital = o.first_conv_digital;
    if (opts.has("digital-layers")) c.mapping.digital_layers = o.digital_layers;
    if (opts.has("all-digital")) c.mapping.all_digital = o.all_digital;
    if (opts.has("chunk-size")) c.pipeline.plan.chunk_size = o.chunk_size;
    if (opts.has("overlap")) c.pipeline.plan.overlap = o.overlap;
    if (opts.has("pore-model")) c.pipeline.pore.file = o.pore_model;
    if (opts.has("pore-k")) c.pipeline.pore.k = o.pore_k;
    if (opts.has("pore-levels")) c.pipeline.pore.levels = o.pore_levels;
    if (opts.has("level-noise")) c.pipeline.pore.level_noise = o.level_noise;
    if (opts.has("mean-dwell")) c.pipeline.pore.mean_dwell = o.mean_dwell;
    if (opts.has("min-dwell")) c.pipeline.pore.min_dwell = o.min_dwell;
    if (opts.has("input")) c.pipeline.input = o.input;
    if (opts.has("truth")) c.pipeline.truth = o.truth;
    if (opts.has("reads")) c.pipeline.reads = o.reads;
    if (opts.has("read-bases")) c.pipeline.read_bases = o.read_bases;
    if (opts.has("decoder")) c.decoder.kind = experiments::decoder_kind_from_string(o.decoder_kind);
    if (opts.has("ltp")) c.decoder.la.l_tp = o.l_tp;
    if (opts.has("lmlp")) c.decoder.la.l_mlp = o.l_mlp;
    if (opts.has("tokens")) c.simulation.tokens = o.tokens;
    if (opts.has("max-inflight")) c.simulation.max_inflight = o.max_inflight;
    if (opts.has("no-io")) c.simulation.io = !o.no_io;
    if (opts.has("analog")) c.analog.enabled = o.analog;
    if (opts.has("elapsed")) c.analog.elapsed_s = o.elapsed_s;
    if (opts.has("drift-compensation")) c.analog.options.drift_compensation = o.drift_compensation;
    if (opts.has("sigma-prog")) c.device.sigma_prog_us = o.sigma_prog;
    if (opts.has("sigma-read")) c.device.sigma_read_us = o.sigma_read;
    if (opts.has("drift-nu")) c.device.drift_nu = o.drift_nu;
    if (opts.has("drift-times")) c.sweep.drift_times_s = o.drift_times;
    if (opts.has("la-tp")) c.sweep.la_tp = o.la_tp;
    if (opts.has("la-mlp")) c.sweep.la_mlp = o.la_mlp;
    if (opts.has("sensitivity-layers")) c.sweep.sensitivity_layers = o.sensitivity_layers;
    c.validate();
    return c;
}

fs::path output_dir(const Overrides& o, const Options& opts) {
    fs::path dir = ".";
    if (opts.has("out-dir")) {
        dir = o.out_dir;
    } else if (const char* env = std::getenv(kOutDirEnv); env != nullptr && *env != '\0') {
        dir = env;
    }
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InputError("cannot create output directory '" + dir.string() + "': " + ec.message());
    return dir;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream f(path);
    if (!f) throw InputError("cannot write '" + path.string() + "'");
    return f;
}

void write_json(const fs::path& path, const json& j) { open_out(path) << j.dump(2) << '\n'; }

std::string decoder_line(const experiments::DecoderSpec& spec) {
    std::ostringstream s;
    s << "decoder=" << experiments::to_string(spec.kind);
    if (spec.kind == experiments::DecoderKind::LookAround) {
        const auto cost = decoder::decoder_cost(spec.la);
        s << " l_tp=" << spec.la.l_tp << " l_mlp=" << spec.la.l_mlp << " registers=" << cost.registers
          << " latency=" << cost.latency_cycles;
    }
    return s.str();
}

/// Programs the configured network from a calibration pass over `reads`.
analog::ProgrammedSystem program(const config::ExperimentConfig& c, const dnn::NetworkGraph& graph,
                                 const mapper::Mapping& mapping,
                                 const std::vector<pipeline::SquiggleRead>& reads) {
    const auto chunks = experiments::calibration_chunks(reads, c.pipeline.plan, c.analog.calibration_chunks);
    if (chunks.empty()) throw InputError("analog: no reads to calibrate on");
    const auto cal = analog::calibrate(graph, chunks);
    return analog::program_network(graph, mapping, c.device, cal,
                                   config::component_seed(c, config::SeedStream::Programming), 0.0,
                                   c.analog.options);
}

bool all_have_truth(const std::vector<pipeline::SquiggleRead>& reads) {
    for (const auto& r : reads) {
        if (r.sequence.empty()) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Commands

int cmd_simulate(const config::ExperimentConfig& c, const fs::path& out_dir, std::ostream& out) {
    const auto graph = config::build_network(c);
    const auto mapping = config::build_mapping(c, graph);
    meshsim::JobOptions jo;
    jo.io = c.simulation.io;
    jo.max_inflight = c.simulation.max_inflight;
    const auto jg = meshsim::build_job_graph(graph, mapping, c.arch, c.simulation.tokens, c.costs, jo);
    const auto tl = meshsim::schedule(jg);
    meshsim::ReportParams rp;
    rp.samples_per_frame = graph.samples_per_frame();
    rp.samples_per_base = c.simulation.samples_per_base;
    rp.clock_hz = c.costs.clock_hz;
    rp.area_mm2 = c.simulation.area_mm2;
    const auto stats = meshsim::report(jg, tl, rp);

    meshsim::JobGraph single = meshsim::build_job_graph(graph, mapping, c.arch, 1, c.costs, jo);
    const auto cp = meshsim::critical_path(single);

    auto j = stats.to_json();
    j["tiles_used"] = mapping.tiles_used();
    j["single_token_critical_path_cycles"] = cp;
    j["real_time_bases_per_s"] = kRealTimeBasesPerSecond;
    write_json(out_dir / "stats.json", j);
    {
        auto f = open_out(out_dir / "trace.jsonl");
        meshsim::write_trace(f, jg, tl);
    }

    out << std::fixed << std::setprecision(3);
    out << "tokens=" << stats.n_tokens << " ops_per_token=" << stats.ops_per_token
        << " makespan_cycles=" << stats.makespan_cycles << " critical_path_cycles=" << cp << '\n';
    out << "bases_per_s=" << std::setprecision(0) << stats.bases_per_s << " real_time_multiple=" << std::setprecision(2)
        << stats.bases_per_s / kRealTimeBasesPerSecond << '\n';
    out << std::setprecision(4) << "movement_share=" << stats.movement_share() << " power_w=" << stats.power_w
        << " energy_j=" << std::scientific << stats.energy_j << std::fixed << '\n';
    for (int k = 0; k < meshsim::kCategories; ++k) {
        const auto cat = static_cast<meshsim::Category>(k);
        out << "breakdown." << meshsim::to_string(cat) << '=' << stats.breakdown.fraction(cat) << '\n';
    }
    out << "wrote " << (out_dir / "stats.json").string() << " and " << (out_dir / "trace.jsonl").string() << '\n';
    return kExitOk;
}

int cmd_basecall(const config::ExperimentConfig& c, const fs::path& out_dir, std::ostream& out) {
    const auto graph = config::build_network(c);
    const auto reads = config::build_reads(c);
    const auto& plan = c.pipeline.plan;
    const int spf = graph.samples_per_frame();

    std::optional<analog::ProgrammedSystem> system;
    experiments::ChunkInfer infer = experiments::reference_infer(graph);
    if (c.analog.enabled) {
        system.emplace(program(c, graph, config::build_mapping(c, graph), reads));
        infer = experiments::analog_infer(*system, c.analog.elapsed_s,
                                          config::component_seed(c, config::SeedStream::Inference));
    }
    const auto frames = experiments::infer_reads(reads, plan, infer);

    out << decoder_line(c.decoder) << '\n';
    std::vector<pipeline::FastaRecord> records;
    std::vector<double> accuracy;
    if (all_have_truth(reads) && !reads.empty()) {
        const auto e = experiments::evaluate_frames(reads, frames, plan, spf, c.decoder);
        for (std::size_t i = 0; i < reads.size(); ++i) records.push_back({reads[i].id, e.calls[i]});
        accuracy = e.accuracy;
    } else {
        for (std::size_t i = 0; i < reads.size(); ++i) {
            records.push_back({reads[i].id, experiments::call_read(frames[i], plan, spf, c.decoder)});
        }
    }
    pipeline::write_fasta(out_dir / "calls.fasta", records);
    out << "reads=" << reads.size() << " mode=" << (c.analog.enabled ? "analog" : "reference") << '\n';
    if (!accuracy.empty()) {
        auto f = open_out(out_dir / "accuracy.csv");
        f << "read_id,accuracy,called_bases,true_bases\n" << std::setprecision(6) << std::fixed;
        double sum = 0.0;
        for (std::size_t i = 0; i < reads.size(); ++i) {
            f << reads[i].id << ',' << accuracy[i] << ',' << records[i].sequence.size() << ','
              << reads[i].sequence.size() << '\n';
            sum += accuracy[i];
        }
        out << std::fixed << std::setprecision(6) << "mean_accuracy=" << sum / static_cast<double>(reads.size())
            << '\n';
    }
    out << "wrote " << (out_dir / "calls.fasta").string() << '\n';
    return kExitOk;
}

int cmd_sweep(const config::ExperimentConfig& c, const std::string& axis, const fs::path& out_dir,
              std::ostream& out) {
    const auto& sw = c.sweep;
    if (axis == "la-grid" && (sw.la_tp.empty() || sw.la_mlp.empty())) {
        throw EmptyAxisError("sweep la-grid: la_tp and la_mlp must both be non-empty");
    }
    if (axis == "drift" && sw.drift_times_s.empty()) throw EmptyAxisError("sweep drift: drift_times_s is empty");
    if (axis == "sensitivity" && sw.sensitivity_layers && sw.sensitivity_layers->empty()) {
        throw EmptyAxisError("sweep sensitivity: sensitivity_layers is empty");
    }

    const auto graph = config::build_network(c);
    const auto reads = config::build_reads(c);
    if (reads.empty()) throw InputError("sweep: no reads");
    if (!all_have_truth(reads)) throw InputError("sweep: every read needs a true sequence");
    const auto& plan = c.pipeline.plan;
    const int spf = graph.samples_per_frame();
    const auto inference_seed = config::component_seed(c, config::SeedStream::Inference);
    const fs::path csv_path = out_dir / ("sweep_" + axis + ".csv");
    std::ostringstream csv;
    csv << std::fixed << std::setprecision(6);

    if (axis == "la-grid") {
        std::optional<analog::ProgrammedSystem> system;
        auto infer = experiments::reference_infer(graph);
        if (c.analog.enabled) {
            system.emplace(program(c, graph, config::build_mapping(c, graph), reads));
            infer = experiments::analog_infer(*system, c.analog.elapsed_s, inference_seed);
        }
        const auto frames = experiments::infer_reads(reads, plan, infer);
        const auto cells = experiments::la_grid(reads, frames, plan, spf, sw.la_tp, sw.la_mlp);
        csv << "l_tp,l_mlp,accuracy,reads\n";
        for (const auto& cell : cells) {
            csv << cell.l_tp << ',' << cell.l_mlp << ',' << cell.accuracy << ',' << cell.per_read.size() << '\n';
        }
    } else if (axis == "drift") {
        const auto system = program(c, graph, config::build_mapping(c, graph), reads);
        const auto points = experiments::drift_sweep(system, reads, plan, c.decoder, sw.drift_times_s, inference_seed);
        csv << "config,time_s,layer,accuracy,reads\n";
        for (const auto& p : points) {
            csv << "configured," << p.elapsed_s << ",," << p.accuracy << ',' << p.per_read.size() << '\n';
        }
    } else if (axis == "sensitivity") {
        const auto chunks = experiments::calibration_chunks(reads, plan, c.analog.calibration_chunks);
        const auto cal = analog::calibrate(graph, chunks);
        experiments::AnalogSetup setup;
        setup.arch = c.arch;
        setup.device = c.device;
        setup.options = c.analog.options;
        setup.plan = plan;
        setup.decoder = c.decoder;
        setup.seed = config::component_seed(c, config::SeedStream::Programming);
        const auto rows = experiments::layer_sensitivity_sweep(graph, reads, cal, setup, sw.sensitivity_elapsed_s,
                                                               sw.sensitivity_layers.value_or(std::vector<int>{}));
        csv << "config,time_s,layer,accuracy,reads\n";
        for (const auto& r : rows) {
            csv << r.config << ',' << sw.sensitivity_elapsed_s << ',';
            if (r.layer >= 0) csv << r.layer;
            csv << ',' << r.accuracy << ',' << r.per_read.size() << '\n';
        }
    } else {
        throw ConfigError("sweep: axis must be la-grid, drift or sensitivity, got '" + axis + "'");
    }
    open_out(csv_path) << csv.str();
    out << csv.str() << "wrote " << csv_path.string() << '\n';
    return kExitOk;
}

int cmd_report(const config::ExperimentConfig& c, const std::string& volumes, const fs::path& out_dir,
               std::ostream& out) {
    json j;
    const auto peak = meshsim::peak_compute(c.arch.tile_rows, c.arch.tile_cols, c.costs.vmm_cycles, c.costs.clock_hz,
                                            c.arch.n_tiles(), c.simulation.area_mm2);
    j["peak_compute"] = {{"tops_per_tile", peak.tops_per_tile},
                         {"tops_total", peak.tops_total},
                         {"tops_per_mm2", peak.tops_per_mm2},
                         {"tiles", c.arch.n_tiles()}};
    const auto cost = decoder::decoder_cost(c.decoder.la);
    j["decoder"] = {{"l_tp", c.decoder.la.l_tp},
                    {"l_mlp", c.decoder.la.l_mlp},
                    {"registers", cost.registers},
                    {"latency_cycles", cost.latency_cycles}};
    j["chunking"] = {{"chunk_size", c.pipeline.plan.chunk_size},
                     {"overlap", c.pipeline.plan.overlap},
                     {"duplicated_fraction", c.pipeline.plan.duplicated_fraction()}};

    const auto reads = config::build_reads(c);
    std::vector<pipeline::ReadVolume> vol;
    for (const auto& r : reads) vol.push_back({r.samples.size(), r.sequence.size()});
    const auto dr = pipeline::data_reduction_report(vol, 4.0, 1.0);
    j["data_reduction"] = {{"reads", dr.reads},
                           {"raw_bytes", dr.raw_bytes},
                           {"called_bytes", dr.called_bytes},
                           {"communication_ratio", dr.communication_ratio}};
    if (!volumes.empty()) {
        const auto table = pipeline::VolumeTable::load(volumes);
        j["volume_table"] = {{"raw_gb", table.total.raw_gb},
                             {"string_gb", table.total.string_gb},
                             {"communication_ratio", table.communication_ratio()}};
    }
    pipeline::SignalBuffer buffer;
    j["signal_buffer"] = {{"channels", buffer.config().channels},
                          {"total_bytes", buffer.config().total_bytes()},
                          {"samples_per_channel", buffer.config().channel_capacity_samples()}};
    write_json(out_dir / "report.json", j);
    out << j.dump(2) << '\n';
    return kExitOk;
}

int cmd_synth(const config::ExperimentConfig& c, const fs::path& out_dir, std::ostream& out) {
    const auto model = config::build_pore_model(c);
    const auto reads = experiments::synth_reads(model, c.pipeline.reads, c.pipeline.read_bases,
                                                config::component_seed(c, config::SeedStream::Reads));
    model.save(out_dir / "pore_model.json");
    pipeline::write_raw(out_dir / "reads.cmrw", reads);
    std::vector<pipeline::FastaRecord> truth;
    auto f = open_out(out_dir / "truth.jsonl");
    for (const auto& r : reads) {
        truth.push_back({r.id, r.sequence});
        f << json{{"id", r.id}, {"channel", r.channel}, {"sequence", r.sequence}, {"base_starts", r.base_starts}}.dump()
          << '\n';
    }
    pipeline::write_fasta(out_dir / "truth.fasta", truth);
    out << "reads=" << reads.size() << " wrote pore_model.json reads.cmrw truth.fasta truth.jsonl to "
        << out_dir.string() << '\n';
    return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Simulate basecalling on a compute-in-memory accelerator"};
    app.require_subcommand(1);
    app.fallthrough();
    Overrides o;
    Options opts;
    add_overrides(app, o, opts);

    auto* simulate = app.add_subcommand("simulate", "Cycle-level simulation of the mapped network");
    auto* basecall = app.add_subcommand("basecall", "Basecall reads and score them against the truth");
    auto* sweep = app.add_subcommand("sweep", "Accuracy sweep over one axis");
    std::string axis;
    sweep->add_option("axis", axis, "la-grid, drift or sensitivity")->required();
    auto* report = app.add_subcommand("report", "Static figures of merit");
    std::string volumes;
    report->add_option("--volumes", volumes, "Dataset volume table (JSON)");
    auto* synth = app.add_subcommand("synth", "Write synthetic reads, their truth and the pore model");
    auto* show = app.add_subcommand("config", "Print the resolved configuration");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitConfig;
    }

    try {
        const auto c = resolve_config(o, opts);
        if (*show) {
            out << c.to_json().dump(2) << '\n';
            return kExitOk;
        }
        const auto dir = output_dir(o, opts);
        if (*simulate) return cmd_simulate(c, dir, out);
        if (*basecall) return cmd_basecall(c, dir, out);
        if (*sweep) return cmd_sweep(c, axis, dir, out);
        if (*report) return cmd_report(c, volumes, dir, out);
        if (*synth) return cmd_synth(c, dir, out);
        return kExitFailure;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const MappingError& e) {
        err << "mapping error: " << e.what() << '\n';
        return kExitMapping;
    } catch (const InputError& e) {
        err << "input error: " << e.what() << '\n';
        return kExitInput;
    } catch (const EmptyAxisError& e) {
        err << "empty sweep axis: " << e.what() << '\n';
        return kExitEmptyAxis;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

}  // namespace cimcall::cli
