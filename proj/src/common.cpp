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

#include "cimcall/common.hpp"

#include <bit>
#include <cmath>

namespace cimcall {

float round_to_half(float x) {
    const auto bits = std::bit_cast<std::uint32_t>(x);
    const std::uint32_t sign = bits & 0x80000000u;
    std::uint32_t mag = bits & 0x7fffffffu;

    if (mag >= 0x7f800000u) return x;  // inf / nan
    if (mag >= 0x477ff000u) {          // >= 65520 rounds to inf
        return std::bit_cast<float>(sign | 0x7f800000u);
    }
    if (mag < 0x38800000u) {  // half subnormal range, quantum 2^-24
        const float scaled = std::bit_cast<float>(mag) * 16777216.0f;
        const float q = std::nearbyint(scaled) / 16777216.0f;
        return std::bit_cast<float>(sign | std::bit_cast<std::uint32_t>(q));
    }
    const std::uint32_t lsb = (mag >> 13) & 1u;
    mag += 0x0fffu + lsb;
    mag &= ~0x1fffu;
    return std::bit_cast<float>(sign | mag);
}

}  // namespace cimcall
