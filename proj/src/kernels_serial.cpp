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

#include <cmath>
#include <cstddef>
#include <vector>

#include "cimcall/kernels.hpp"

namespace cimcall::kernels::serial {

void matvec(std::span<const float> w, std::span<const float> x, std::span<const float> b,
            std::span<float> y) {
    const std::size_t in = x.size();
    for (std::size_t o = 0; o < y.size(); ++o) {
        const float* row = w.data() + o * in;
        float acc = b.empty() ? 0.0f : b[o];
        for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
        y[o] = acc;
    }
}

void conv1d(const ConvShape& s, std::span<const float> input, std::span<const float> weights,
            std::span<const float> bias, std::span<float> output) {
    const int out_len = s.out_length();
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
    for (int j = 0; j < r.n_cols; ++j) acc[j] = 0.0;
    if (r.tile->sealed() && !std::isnan(r.tile->common_programming_time())) {
        // One drift factor for the whole tile, applied after the row sums.
        const double factor = pcm::drift_factor(r.tile->common_programming_time(), r.t_now, *r.params);
        for (std::size_t i = 0; i < input.size(); ++i) {
            const double x = input[i];
            if (x == 0.0) continue;
            const float* row = r.tile->differential().data() +
                               static_cast<std::size_t>(r.row_begin + static_cast<int>(i)) * pcm::kTileDim + r.col_begin;
            for (int j = 0; j < r.n_cols; ++j) acc[j] += x * static_cast<double>(row[j]);
        }
        for (int j = 0; j < r.n_cols; ++j) acc[j] *= factor;
        return;
    }
    const auto* cells = r.tile->cells().data();
    double last_tp = -1.0;
    double factor = 1.0;
    for (std::size_t i = 0; i < input.size(); ++i) {
        const double x = input[i];
        if (x == 0.0) continue;
        const int row = r.row_begin + static_cast<int>(i);
        for (int j = 0; j < r.n_cols; ++j) {
            const auto& cell = cells[static_cast<std::size_t>(row) * pcm::kTileDim + r.col_begin + j];
            if (cell.t_programmed != last_tp) {
                last_tp = cell.t_programmed;
                factor = pcm::drift_factor(last_tp, r.t_now, *r.params);
            }
            acc[j] += x * (static_cast<double>(cell.g_plus) - cell.g_minus) * factor;
        }
    }
}

}  // namespace cimcall::kernels::serial
