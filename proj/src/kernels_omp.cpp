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

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "cimcall/kernels.hpp"

namespace cimcall::kernels::omp {

namespace {

// Below these sizes the fork/join overhead dominates.
constexpr std::size_t kMinParallelWork = 1 << 14;

}  // namespace

void matvec(std::span<const float> w, std::span<const float> x, std::span<const float> b,
            std::span<float> y) {
    const auto in = static_cast<std::ptrdiff_t>(x.size());
    const auto out = static_cast<std::ptrdiff_t>(y.size());
    const bool par = static_cast<std::size_t>(in * out) >= kMinParallelWork;
#pragma omp parallel for schedule(static) if (par)
    for (std::ptrdiff_t o = 0; o < out; ++o) {
        const float* row = w.data() + o * in;
        float acc = b.empty() ? 0.0f : b[o];
        for (std::ptrdiff_t i = 0; i < in; ++i) acc += row[i] * x[i];
        y[o] = acc;
    }
}

void conv1d(const ConvShape& s, std::span<const float> input, std::span<const float> weights,
            std::span<const float> bias, std::span<float> output) {
    const int out_len = s.out_length();
    const std::size_t work = static_cast<std::size_t>(out_len) * s.out_channels * s.in_channels * s.kernel_width;
#pragma omp parallel for schedule(static) if (work >= kMinParallelWork)
    for (int t = 0; t < out_len; ++t) {
        const int start = t * s.stride - s.padding;
        for (int o = 0; o < s.out_channels; ++o) {
            float acc = bias.empty() ? 0.0f : bias[o];
            const float* wo = weights.data() + static_cast<std::size_t>(o) * s.in_channels * s.kernel_width;
            for (int c = 0; c < s.in_channels; ++c) {
                for (int k = 0; k < s.kernel_width; ++k) {
                    const int pos = start + k;
                    if (pos < 0 || pos >= s.length) continue;
                    acc += wo[c * s.kernel_width + k] * input[static_cast<std::size_t>(pos) * s.in_channels + c];
                }
            }
            output[static_cast<std::size_t>(t) * s.out_channels + o] = acc;
        }
    }
}

void crossbar_accumulate(const CrossbarRegion& r, std::span<const std::int8_t> input,
                         std::span<double> acc) {
    const std::size_t work = input.size() * static_cast<std::size_t>(r.n_cols);
    constexpr int kBlock = 64;
    const int n_blocks = (r.n_cols + kBlock - 1) / kBlock;
    const bool dense = r.tile->sealed() && !std::isnan(r.tile->common_programming_time());
    const double common = dense ? pcm::drift_factor(r.tile->common_programming_time(), r.t_now, *r.params) : 1.0;
#pragma omp parallel for schedule(static) if (work >= kMinParallelWork)
    for (int blk = 0; blk < n_blocks; ++blk) {
        const int j0 = blk * kBlock;
        const int j1 = std::min(r.n_cols, j0 + kBlock);
        for (int j = j0; j < j1; ++j) acc[j] = 0.0;
        if (dense) {
            const float* diff = r.tile->differential().data();
            for (std::size_t i = 0; i < input.size(); ++i) {
                const double x = input[i];
                if (x == 0.0) continue;
                const float* row = diff + static_cast<std::size_t>(r.row_begin + static_cast<int>(i)) * pcm::kTileDim +
                                   r.col_begin;
                for (int j = j0; j < j1; ++j) acc[j] += x * static_cast<double>(row[j]);
            }
            for (int j = j0; j < j1; ++j) acc[j] *= common;
            continue;
        }
        const auto* cells = r.tile->cells().data();
        double last_tp = -1.0;
        double factor = 1.0;
        for (std::size_t i = 0; i < input.size(); ++i) {
            const double x = input[i];
            if (x == 0.0) continue;
            const int row = r.row_begin + static_cast<int>(i);
            for (int j = j0; j < j1; ++j) {
                const auto& cell = cells[static_cast<std::size_t>(row) * pcm::kTileDim + r.col_begin + j];
                if (cell.t_programmed != last_tp) {
                    last_tp = cell.t_programmed;
                    factor = pcm::drift_factor(last_tp, r.t_now, *r.params);
                }
                acc[j] += x * (static_cast<double>(cell.g_plus) - cell.g_minus) * factor;
            }
        }
    }
}

}  // namespace cimcall::kernels::omp
