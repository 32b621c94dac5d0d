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

// One-step CRF recursions shared by the full and the streaming decoders.
// Both decoders must go through these so that a LookAround window that
// reaches the end of the read reproduces the full decode bit for bit.

#ifndef CIMCALL_SRC_CRF_OPS_HPP
#define CIMCALL_SRC_CRF_OPS_HPP

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "cimcall/decoder.hpp"

namespace cimcall::decoder::detail {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

enum class Semiring { Sum, Max };

/// out(s') = (+)_{(s,d) -> s'} prev(s) (x) w(s, d)
inline void forward_step(Semiring sr, std::span<const double> prev, std::span<const double> w, int S,
                         int D, std::span<double> out) {
    std::vector<double> best(static_cast<std::size_t>(S), kNegInf);
    for (int s = 0; s < S; ++s) {
        for (int d = 0; d < D; ++d) {
            const int dst = destination(s, d, S);
            const double v = prev[s] + w[s * D + d];
            if (v > best[dst]) best[dst] = v;
        }
    }
    if (sr == Semiring::Max) {
        for (int s = 0; s < S; ++s) out[s] = best[s];
        return;
    }
    std::vector<double> acc(static_cast<std::size_t>(S), 0.0);
    for (int s = 0; s < S; ++s) {
        for (int d = 0; d < D; ++d) {
            const int dst = destination(s, d, S);
            if (best[dst] == kNegInf) continue;
            acc[dst] += std::exp(prev[s] + w[s * D + d] - best[dst]);
        }
    }
    for (int s = 0; s < S; ++s) out[s] = best[s] == kNegInf ? kNegInf : best[s] + std::log(acc[s]);
}

/// out(s) = (+)_d w(s, d) (x) next(dst(s, d))
inline void backward_step(Semiring sr, std::span<const double> next, std::span<const double> w, int S,
                          int D, std::span<double> out) {
    for (int s = 0; s < S; ++s) {
        double best = kNegInf;
        for (int d = 0; d < D; ++d) {
            const double v = w[s * D + d] + next[destination(s, d, S)];
            if (v > best) best = v;
        }
        if (sr == Semiring::Max || best == kNegInf) {
            out[s] = best;
            continue;
        }
        double acc = 0.0;
        for (int d = 0; d < D; ++d) acc += std::exp(w[s * D + d] + next[destination(s, d, S)] - best);
        out[s] = best + std::log(acc);
    }
}

/// out(s, d) = head(s) + w(s, d) + tail(dst(s, d))
inline void combine(std::span<const double> head, std::span<const double> w, std::span<const double> tail,
                    int S, int D, std::span<double> out) {
    for (int s = 0; s < S; ++s) {
        for (int d = 0; d < D; ++d) out[s * D + d] = head[s] + w[s * D + d] + tail[destination(s, d, S)];
    }
}

/// Lowest index among maxima.
inline int argmax(std::span<const double> v) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

}  // namespace cimcall::decoder::detail

#endif  // CIMCALL_SRC_CRF_OPS_HPP
