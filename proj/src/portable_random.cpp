// Copyright (C) 2026 The fusionsearch Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except in compliance
// with the License. You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software distributed under the License
// is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express
// or implied. See the License for the specific language governing permissions and limitations under the License.

#include "fusion/portable_random.hpp"

#include <bit>
#include <cmath>

namespace fusion {

std::uint64_t fnv1a64(std::span<const float> values) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (float v : values) {
        const auto bits = std::bit_cast<std::uint32_t>(v);
        for (int shift = 0; shift < 32; shift += 8) {
            h ^= (bits >> shift) & 0xffU;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

std::uint64_t PortableRng::next() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
}

double PortableRng::uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double PortableRng::normal() noexcept {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u = 0.0, v = 0.0, s = 0.0;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * portable_log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
}

double portable_log(double x) noexcept {
    // x = m * 2^e with m in [sqrt(1/2), sqrt(2)); ln m = 2 atanh(t), t = (m - 1) / (m + 1), |t| < 0.172.
    int e = 0;
    double m = std::frexp(x, &e);  // exact, m in [0.5, 1)
    if (m < 0.70710678118654752440) {
        m *= 2.0;
        --e;
    }
    const double t = (m - 1.0) / (m + 1.0);
    const double t2 = t * t;
    // atanh series to t^29: remaining terms fall below 1e-23 relative.
    constexpr double kInverseOdd[15] = {1.0 / 1,  1.0 / 3,  1.0 / 5,  1.0 / 7,  1.0 / 9,
                                        1.0 / 11, 1.0 / 13, 1.0 / 15, 1.0 / 17, 1.0 / 19,
                                        1.0 / 21, 1.0 / 23, 1.0 / 25, 1.0 / 27, 1.0 / 29};
    double term = t;
    double sum = 0.0;
    for (double inv : kInverseOdd) {
        sum += term * inv;
        term *= t2;
    }
    constexpr double kLn2 = 0.693147180559945309417;
    return 2.0 * sum + e * kLn2;
}

}  // namespace fusion
