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

// Data-parallel inner loops. Every kernel has a serial reference and an
// OpenMP version; the two produce bit-identical results because each output
// element is reduced in the same order by exactly one thread.

#ifndef CIMCALL_KERNELS_HPP
#define CIMCALL_KERNELS_HPP

#include <cstdint>
#include <span>

#include "cimcall/pcm.hpp"

namespace cimcall::kernels {

struct ConvShape {
    int length = 0;  // input timesteps
    int in_channels = 0;
    int out_channels = 0;
    int kernel_width = 0;
    int stride = 1;
    int padding = 0;  // zeros on both sides

    int out_length() const { return (length + 2 * padding - kernel_width) / stride + 1; }
};

/// Crossbar region read for analog_vmm. acc[j] receives
/// sum_i input[i] * (g_plus - g_minus)(row_begin + i, col_begin + j) * drift.
struct CrossbarRegion {
    const pcm::ProgrammedTile* tile = nullptr;
    int row_begin = 0;
    int col_begin = 0;
    int n_cols = 0;
    double t_now = 0.0;
    const pcm::DeviceParams* params = nullptr;
};

namespace serial {

/// y[o] = b[o] + sum_i w[o * in + i] * x[i]. `b` may be empty.
void matvec(std::span<const float> w, std::span<const float> x, std::span<const float> b,
            std::span<float> y);

/// Time-major cross-correlation: input [length][in], weights [out][in][k],
/// output [out_length][out]. `bias` may be empty.
void conv1d(const ConvShape& shape, std::span<const float> input, std::span<const float> weights,
            std::span<const float> bias, std::span<float> output);

void crossbar_accumulate(const CrossbarRegion& region, std::span<const std::int8_t> input,
                         std::span<double> acc);

}  // namespace serial

namespace omp {

void matvec(std::span<const float> w, std::span<const float> x, std::span<const float> b,
            std::span<float> y);

void conv1d(const ConvShape& shape, std::span<const float> input, std::span<const float> weights,
            std::span<const float> bias, std::span<float> output);

void crossbar_accumulate(const CrossbarRegion& region, std::span<const std::int8_t> input,
                         std::span<double> acc);

}  // namespace omp

}  // namespace cimcall::kernels

#endif  // CIMCALL_KERNELS_HPP
