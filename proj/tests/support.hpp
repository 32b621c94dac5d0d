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

// Helpers shared by the test binaries.

#ifndef CIMCALL_TESTS_SUPPORT_HPP
#define CIMCALL_TESTS_SUPPORT_HPP

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "cimcall/common.hpp"
#include "cimcall/dnn.hpp"

namespace testsupport {

inline cimcall::dnn::TransitionFrames random_frames(int T, cimcall::Rng& rng, double scale = 2.0, int S = 4,
                                                    int D = 5) {
    cimcall::dnn::TransitionFrames f(T, S, D);
    std::normal_distribution<double> n(0.0, scale);
    for (auto& v : f.scores) v = n(rng);
    return f;
}

inline std::filesystem::path fixture_dir() { return std::filesystem::path(CIMCALL_SOURCE_DIR) / "fixtures"; }

/// Mean and sample standard deviation.
inline std::pair<double, double> mean_sd(const std::vector<double>& v) {
    double m = 0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double ss = 0;
    for (double x : v) ss += (x - m) * (x - m);
    return {m, v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0};
}

/// One-sided paired test of mean(a - b) >= 0 at 95%: rejects only when the
/// upper confidence bound of the mean difference is below zero.
inline bool paired_not_worse(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    const auto [m, sd] = mean_sd(d);
    return m + 1.645 * sd / std::sqrt(static_cast<double>(d.size())) >= 0.0;
}

}  // namespace testsupport

#endif  // CIMCALL_TESTS_SUPPORT_HPP
