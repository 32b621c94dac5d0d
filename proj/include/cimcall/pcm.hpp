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
 * @file pcm.hpp
 * @brief PCM unit-cell physics and the analog crossbar VMM.
 *
 * Signed weights are stored on differential conductance pairs. A pair is
 * programmed once (programming noise), decays as a power law in time
 * (drift), and is read with fresh Gaussian read noise on every VMM. The
 * crossbar takes signed 8-bit PWM inputs and produces signed 10-bit ADC
 * codes per column after the per-column affine correction.
 */

#ifndef CIMCALL_PCM_HPP
#define CIMCALL_PCM_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cimcall/common.hpp"

namespace cimcall::pcm {

inline constexpr int kTileDim = 512;

struct DeviceParams {
    double g_max_us = 25.0;      ///< max cell conductance, microsiemens
    double sigma_prog_us = 1.0;  ///< programming noise std-dev, microsiemens
    double sigma_read_us = 0.1;  ///< read noise std-dev, microsiemens
    double drift_nu = 0.06;      ///< drift exponent
    double t0_s = 20.0;          ///< drift reference time, seconds
    int adc_bits = 10;
    int input_bits = 8;

    /// Throws ConfigError on a violated invariant.
    void validate() const;

    int adc_min() const { return -(1 << (adc_bits - 1)); }
    int adc_max() const { return (1 << (adc_bits - 1)) - 1; }
    int input_min() const { return -(1 << (input_bits - 1)); }
    int input_max() const { return (1 << (input_bits - 1)) - 1; }

    bool operator==(const DeviceParams&) const = default;
};

struct ConductancePair {
    float g_plus = 0.0f;   // microsiemens
    float g_minus = 0.0f;  // microsiemens
    double t_programmed = 0.0;
};

/// Counts weights that exceeded w_max and were clipped.
struct SaturationCounter {
    std::size_t clipped = 0;
};

/// One 512x512 crossbar. Cells are row-major; rows are inputs (word lines),
/// columns are outputs (bit lines).
class ProgrammedTile {
public:
    ProgrammedTile();

    /// Mutable access unseals the tile.
    ConductancePair& at(int row, int col) {
        sealed_ = false;
        return cells_[index(row, col)];
    }
    const ConductancePair& at(int row, int col) const { return cells_[index(row, col)]; }

    std::span<const ConductancePair> cells() const { return cells_; }

    /// Caches g_plus - g_minus per cell once programming is finished. Reads
    /// of a sealed tile whose cells share one programming time take a dense
    /// path; the cache is dropped on the next mutable at().
    void seal();
    bool sealed() const { return sealed_; }
    /// Row-major g_plus - g_minus; valid while sealed().
    std::span<const float> differential() const { return differential_; }
    /// Shared programming time of all cells, or NaN if they differ.
    double common_programming_time() const { return t_common_; }

    std::vector<float> col_scale;
    std::vector<float> col_offset;
    int rows_used = 0;
    int cols_used = 0;

private:
    static std::size_t index(int row, int col);
    std::vector<ConductancePair> cells_;
    std::vector<float> differential_;
    double t_common_ = 0.0;
    bool sealed_ = false;
};

/// Differential one-sided encoding: positive weights go on g_plus only,
/// negative on g_minus only. Values beyond +-w_max clip.
ConductancePair map_weight_to_conductance(double w, double w_max, const DeviceParams& params,
                                          SaturationCounter* saturation = nullptr);

/// Noise-free decode of a pair back into weight units.
double decode_weight(const ConductancePair& pair, double w_max, const DeviceParams& params);

ConductancePair apply_programming_noise(const ConductancePair& pair, const DeviceParams& params,
                                        Rng& rng);

/// Multiplicative power-law decay factor ((t_now - t_programmed) / t0)^-nu.
/// Elapsed times shorter than t0 are treated as t0.
double drift_factor(double t_programmed, double t_now, const DeviceParams& params);

ConductancePair apply_drift(const ConductancePair& pair, double t_now, const DeviceParams& params);

/// Analog VMM over rows [row_begin, row_begin + input.size()) and columns
/// [col_begin, col_begin + n_cols) of the tile. The read noise for column j
/// is drawn from a stream keyed by (read_key, col_begin + j), so results do
/// not depend on the thread count.
///
/// The default overload spans rows_used x cols_used.
std::vector<int> analog_vmm(const ProgrammedTile& tile, std::span<const std::int8_t> input,
                            const DeviceParams& params, std::uint64_t read_key, double t_now);

std::vector<int> analog_vmm(const ProgrammedTile& tile, int row_begin, int col_begin, int n_cols,
                            std::span<const std::int8_t> input, const DeviceParams& params,
                            std::uint64_t read_key, double t_now);

/// Serial reference of the above, kept for tests and benchmarks.
std::vector<int> analog_vmm_serial(const ProgrammedTile& tile, int row_begin, int col_begin,
                                   int n_cols, std::span<const std::int8_t> input,
                                   const DeviceParams& params, std::uint64_t read_key,
                                   double t_now);

}  // namespace cimcall::pcm

#endif  // CIMCALL_PCM_HPP
