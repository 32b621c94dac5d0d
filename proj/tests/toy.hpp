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

// The small trained network under fixtures/toy and the experiments run on it.

#ifndef CIMCALL_TESTS_TOY_HPP
#define CIMCALL_TESTS_TOY_HPP

#include <string>
#include <vector>

#include "cimcall/config.hpp"
#include "cimcall/experiments.hpp"
#include "support.hpp"

namespace toy {

inline std::filesystem::path config_path() {
    return std::filesystem::path(CIMCALL_SOURCE_DIR) / "fixtures" / "toy" / "config.json";
}

struct Fixture {
    cimcall::config::ExperimentConfig config = cimcall::config::ExperimentConfig::load(config_path());
    cimcall::dnn::NetworkGraph graph = cimcall::config::build_network(config);
    cimcall::pipeline::PoreModel pore = cimcall::config::build_pore_model(config);

    int spf() const { return graph.samples_per_frame(); }
    /// Reads from the fixture's own seed and sizes.
    std::vector<cimcall::pipeline::SquiggleRead> reads() const { return cimcall::config::build_reads(config); }
};

/// Random sequence in which no base repeats more than `max_run` times.
/// With a k-mer pore model a run longer than k leaves consecutive samples
/// at one level, so its length is only recoverable from dwell statistics.
inline std::string bounded_run_sequence(std::size_t length, int max_run, cimcall::Rng& rng) {
    static constexpr char kAlphabet[] = {'A', 'C', 'G', 'T'};
    std::uniform_int_distribution<int> pick(0, 3);
    std::string s;
    int run = 0;
    while (s.size() < length) {
        const char c = kAlphabet[pick(rng)];
        const int next_run = !s.empty() && s.back() == c ? run + 1 : 1;
        if (next_run > max_run) continue;
        run = next_run;
        s.push_back(c);
    }
    return s;
}

/// Level-noise-free reads whose homopolymer runs are no longer than k.
inline std::vector<cimcall::pipeline::SquiggleRead> noise_free_reads(const cimcall::pipeline::PoreModel& pore, int n,
                                                                     int bases, std::uint64_t seed) {
    auto quiet = pore;
    quiet.level_noise = 0.0;
    cimcall::Rng rng(seed);
    std::vector<cimcall::pipeline::SquiggleRead> out;
    for (int i = 0; i < n; ++i) {
        auto r = cimcall::pipeline::synth_squiggle(bounded_run_sequence(static_cast<std::size_t>(bases), quiet.k, rng),
                                                   quiet, cimcall::derive_seed(seed, static_cast<std::uint64_t>(i)));
        r.id = "nf" + std::to_string(i);
        out.push_back(std::move(r));
    }
    return out;
}

/// LookAround accuracy over the 4x4 window grid on reference frames.
struct LaTrend {
    std::vector<cimcall::experiments::LaCell> cells;  ///< l_tp major
    bool tp_monotone = true;  ///< no significant drop from l_tp to l_tp + 1 at any l_mlp
    bool tp_beats_mlp = true;  ///< (4,1) not significantly below (1,4)

    const cimcall::experiments::LaCell& at(int l_tp, int l_mlp) const { return cells[(l_tp - 1) * 4 + l_mlp - 1]; }
};

inline LaTrend la_trend(const Fixture& f, const std::vector<cimcall::pipeline::SquiggleRead>& reads) {
    namespace ex = cimcall::experiments;
    const auto& plan = f.config.pipeline.plan;
    const auto frames = ex::infer_reads(reads, plan, ex::reference_infer(f.graph));
    LaTrend r;
    r.cells = ex::la_grid(reads, frames, plan, f.spf(), {1, 2, 3, 4}, {1, 2, 3, 4});
    for (int m = 1; m <= 4; ++m) {
        for (int t = 1; t < 4; ++t) {
            r.tp_monotone = r.tp_monotone && testsupport::paired_not_worse(r.at(t + 1, m).per_read, r.at(t, m).per_read);
        }
    }
    r.tp_beats_mlp = testsupport::paired_not_worse(r.at(4, 1).per_read, r.at(1, 4).per_read);
    return r;
}

inline constexpr double kDriftBand = 0.005;

struct DriftTrend {
    std::vector<double> times;
    std::vector<cimcall::experiments::DriftPoint> series;
    std::vector<cimcall::experiments::SensitivityRow> day;  ///< all-digital, all-analog, first layer digital
    bool non_increasing = true;  ///< no step up larger than the band
    bool first_layer_helps = true;
};

inline DriftTrend drift_trend(const Fixture& f, const std::vector<cimcall::pipeline::SquiggleRead>& reads) {
    namespace ex = cimcall::experiments;
    using cimcall::config::SeedStream;
    const auto& c = f.config;
    DriftTrend r;
    r.times = {c.device.t0_s, 3600.0, 86400.0, 864000.0};
    const auto cal = cimcall::analog::calibrate(f.graph, ex::calibration_chunks(reads, c.pipeline.plan, c.analog.calibration_chunks));
    const auto mapping = cimcall::config::build_mapping(c, f.graph);
    const auto system = cimcall::analog::program_network(f.graph, mapping, c.device, cal,
                                                         cimcall::config::component_seed(c, SeedStream::Programming),
                                                         0.0, c.analog.options);
    r.series = ex::drift_sweep(system, reads, c.pipeline.plan, c.decoder, r.times,
                               cimcall::config::component_seed(c, SeedStream::Inference));
    for (std::size_t i = 1; i < r.series.size(); ++i) {
        r.non_increasing = r.non_increasing && r.series[i].accuracy <= r.series[i - 1].accuracy + kDriftBand;
    }
    ex::AnalogSetup setup;
    setup.arch = c.arch;
    setup.device = c.device;
    setup.options = c.analog.options;
    setup.plan = c.pipeline.plan;
    setup.decoder = c.decoder;
    setup.seed = cimcall::config::component_seed(c, SeedStream::Programming);
    r.day = ex::layer_sensitivity_sweep(f.graph, reads, cal, setup, 86400.0, {f.graph.compute_layers().front()});
    r.first_layer_helps = testsupport::paired_not_worse(r.day[2].per_read, r.day[1].per_read);
    return r;
}

/// Reference inference, full decode and stitching on noise-free reads.
inline cimcall::experiments::Evaluation noise_free_identity(const Fixture& f, int n_reads, int bases,
                                                            std::uint64_t seed) {
    namespace ex = cimcall::experiments;
    const auto reads = noise_free_reads(f.pore, n_reads, bases, seed);
    return ex::evaluate(reads, f.config.pipeline.plan, f.spf(), ex::reference_infer(f.graph),
                        {ex::DecoderKind::Full, {}});
}

}  // namespace toy

#endif  // CIMCALL_TESTS_TOY_HPP
