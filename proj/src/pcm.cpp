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

#include "cimcall/pcm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cimcall/kernels.hpp"

namespace cimcall::pcm {

void DeviceParams::validate() const {
    if (!(g_max_us > 0.0)) throw ConfigError("device.g_max_us must be > 0");
    if (!(sigma_prog_us >= 0.0)) throw ConfigError("device.sigma_prog_us must be >= 0");
    if (!(sigma_read_us >= 0.0)) throw ConfigError("device.sigma_read_us must be >= 0");
    if (!(drift_nu >= 0.0)) throw ConfigError("device.drift_nu must be >= 0");
    if (!(t0_s > 0.0)) throw ConfigError("device.t0_s must be > 0");
    if (adc_bits < 2 || adc_bits > 16) throw ConfigError("device.adc_bits out of range [2, 16]");
    if (input_bits < 2 || input_bits > 8) throw ConfigError("device.input_bits out of range [2, 8]");
}

ProgrammedTile::ProgrammedTile()
    : col_scale(kTileDim, 1.0f),
      col_offset(kTileDim, 0.0f),
      cells_(static_cast<std::size_t>(kTileDim) * kTileDim) {}

std::size_t ProgrammedTile::index(int row, int col) {
    if (row < 0 || row >= kTileDim || col < 0 || col >= kTileDim) {
        throw Error("tile cell (" + std::to_string(row) + ", " + std::to_string(col) + ") out of range");
    }
    return static_cast<std::size_t>(row) * kTileDim + static_cast<std::size_t>(col);
}

void ProgrammedTile::seal() {
    // Cells at zero conductance contribute nothing whatever their age, so
    // only conducting cells need to agree on the programming time.
    differential_.resize(cells_.size());
    bool first = true;
    t_common_ = 0.0;
    for (std::size_t i = 0; i < cells_.size(); ++i) {
        const auto& c = cells_[i];
        differential_[i] = c.g_plus - c.g_minus;
        if (c.g_plus == 0.0f && c.g_minus == 0.0f) continue;
        if (first) {
            t_common_ = c.t_programmed;
            first = false;
        } else if (c.t_programmed != t_common_ && !std::isnan(t_common_)) {
            t_common_ = std::numeric_limits<double>::quiet_NaN();
        }
    }
    sealed_ = true;
}

ConductancePair map_weight_to_conductance(double w, double w_max, const DeviceParams& params,
                                          SaturationCounter* saturation) {
    if (!(w_max > 0.0)) throw Error("w_max must be > 0");
    if (std::abs(w) > w_max) {
        if (saturation) ++saturation->clipped;
        w = std::clamp(w, -w_max, w_max);
    }
    const double g = std::abs(w) / w_max * params.g_max_us;
    ConductancePair pair;
    if (w > 0.0) pair.g_plus = static_cast<float>(g);
    if (w < 0.0) pair.g_minus = static_cast<float>(g);
    return pair;
}

double decode_weight(const ConductancePair& pair, double w_max, const DeviceParams& params) {
    return (static_cast<double>(pair.g_plus) - pair.g_minus) * (w_max / params.g_max_us);
}

ConductancePair apply_programming_noise(const ConductancePair& pair, const DeviceParams& params,
                                        Rng& rng) {
    if (params.sigma_prog_us == 0.0) return pair;
    std::normal_distribution<double> noise(0.0, params.sigma_prog_us);
    auto perturb = [&](float g) -> float {
        if (g == 0.0f) return 0.0f;  // RESET devices stay off
        return static_cast<float>(std::clamp(g + noise(rng), 0.0, params.g_max_us));
    };
    ConductancePair out = pair;
    out.g_plus = perturb(pair.g_plus);
    out.g_minus = perturb(pair.g_minus);
    return out;
}

double drift_factor(double t_programmed, double t_now, const DeviceParams& params) {
    if (t_now < t_programmed) {
        throw Error("read time " + std::to_string(t_now) + " precedes programming time " +
                    std::to_string(t_programmed));
    }
    if (params.drift_nu == 0.0) return 1.0;
    const double elapsed = std::max(t_now - t_programmed, params.t0_s);
    return std::pow(elapsed / params.t0_s, -params.drift_nu);
}

ConductancePair apply_drift(const ConductancePair& pair, double t_now, const DeviceParams& params) {
    const double f = drift_factor(pair.t_programmed, t_now, params);
    ConductancePair out = pair;
    out.g_plus = static_cast<float>(pair.g_plus * f);
    out.g_minus = static_cast<float>(pair.g_minus * f);
    return out;
}

namespace {

using AccumulateFn = void (*)(const kernels::CrossbarRegion&, std::span<const std::int8_t>,
                              std::span<double>);

std::vector<int> vmm_impl(AccumulateFn accumulate, const ProgrammedTile& tile, int row_begin,
                          int col_begin, int n_cols, std::span<const std::int8_t> input,
                          const DeviceParams& params, std::uint64_t read_key, double t_now) {
    const int n_rows = static_cast<int>(input.size());
    if (row_begin < 0 || col_begin < 0 || n_cols < 0 || row_begin + n_rows > kTileDim ||
        col_begin + n_cols > kTileDim) {
        throw Error("analog_vmm: region exceeds tile bounds");
    }
    std::vector<double> acc(static_cast<std::size_t>(n_cols));
    accumulate({&tile, row_begin, col_begin, n_cols, t_now, &params}, input, acc);

    // Per-cell Gaussian read noise summed over a column is itself Gaussian
    // with std sigma_read * ||x||_2, so one draw per column suffices.
    double norm = 0.0;
    if (params.sigma_read_us > 0.0) {
        for (auto x : input) norm += static_cast<double>(x) * x;
        norm = std::sqrt(norm);
    }

    std::vector<int> out(static_cast<std::size_t>(n_cols));
    const int lo = params.adc_min();
    const int hi = params.adc_max();
    for (int j = 0; j < n_cols; ++j) {
        double v = acc[j];
        if (norm > 0.0) {
            SplitMix64 gen(derive_seed(read_key, static_cast<std::uint64_t>(col_begin + j)));
            std::normal_distribution<double> z(0.0, 1.0);
            v += params.sigma_read_us * norm * z(gen);
        }
        v = v / params.g_max_us * tile.col_scale[col_begin + j] + tile.col_offset[col_begin + j];
        const double r = std::nearbyint(v);
        out[j] = static_cast<int>(std::clamp(r, static_cast<double>(lo), static_cast<double>(hi)));
    }
    return out;
}

}  // namespace

std::vector<int> analog_vmm(const ProgrammedTile& tile, std::span<const std::int8_t> input,
                            const DeviceParams& params, std::uint64_t read_key, double t_now) {
    if (static_cast<int>(input.size()) != tile.rows_used) {
        throw Error("analog_vmm: input length " + std::to_string(input.size()) +
                    " does not match rows_used " + std::to_string(tile.rows_used));
    }
    return analog_vmm(tile, 0, 0, tile.cols_used, input, params, read_key, t_now);
}

std::vector<int> analog_vmm(const ProgrammedTile& tile, int row_begin, int col_begin, int n_cols,
                            std::span<const std::int8_t> input, const DeviceParams& params,
                            std::uint64_t read_key, double t_now) {
    return vmm_impl(&kernels::omp::crossbar_accumulate, tile, row_begin, col_begin, n_cols, input,
                    params, read_key, t_now);
}

std::vector<int> analog_vmm_serial(const ProgrammedTile& tile, int row_begin, int col_begin,
                                   int n_cols, std::span<const std::int8_t> input,
                                   const DeviceParams& params, std::uint64_t read_key,
                                   double t_now) {
    return vmm_impl(&kernels::serial::crossbar_accumulate, tile, row_begin, col_begin, n_cols,
                    input, params, read_key, t_now);
}

}  // namespace cimcall::pcm
