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

#pragma once

// Bit-reproducible hashing and random numbers.
//
// Everything here uses only integer arithmetic and IEEE-754 basic operations (+ - * / sqrt), so
// outputs are identical on every conforming platform. The standard <random> distributions and
// libm's log() carry no such guarantee.

#include <cstdint>
#include <span>
#include <string_view>

namespace fusion {

/// 64-bit FNV-1a.
[[nodiscard]] constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

[[nodiscard]] std::uint64_t fnv1a64(std::span<const float> values) noexcept;

/// SplitMix64 generator with a Marsaglia polar normal sampler.
class PortableRng {
 public:
    explicit PortableRng(std::uint64_t seed) noexcept : state_(seed) {}

    std::uint64_t next() noexcept;

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept;

    /// Standard normal draw (polar method; spare value cached).
    double normal() noexcept;

 private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// SplitMix64 finalizer, used to decorrelate seeds.
[[nodiscard]] constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Natural logarithm for x > 0 built from basic IEEE operations only.
[[nodiscard]] double portable_log(double x) noexcept;

}  // namespace fusion
