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

#include "fusion/embedding.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <thread>

#include "fusion/error.hpp"

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>
#define FUSION_HAVE_AVX2 1
#endif

namespace fusion {

namespace {

constexpr std::size_t kLanes = 32;

// Fixed 32 -> 1 reduction shared by every dot-product path.
inline double reduce_lanes(const double* acc) noexcept {
    double half[16];
    for (std::size_t i = 0; i < 16; ++i) half[i] = acc[i] + acc[i + 16];
    double quarter[8];
    for (std::size_t i = 0; i < 8; ++i) quarter[i] = half[i] + half[i + 8];
    return ((quarter[0] + quarter[4]) + (quarter[2] + quarter[6])) +
           ((quarter[1] + quarter[5]) + (quarter[3] + quarter[7]));
}

void require_same_dimension(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw DimensionMismatchError(std::string(what) + ": dimension " + std::to_string(a) + " vs " +
                                     std::to_string(b));
    }
}

std::vector<double> widen(std::span<const float> v) { return {v.begin(), v.end()}; }

}  // namespace

namespace detail {

double dot_lanes_reference(const float* row, const double* query, std::size_t dim) noexcept {
    std::array<double, kLanes> acc{};
    std::size_t i = 0;
    for (; i + kLanes <= dim; i += kLanes) {
        for (std::size_t j = 0; j < kLanes; ++j) acc[j] += static_cast<double>(row[i + j]) * query[i + j];
    }
    for (std::size_t j = 0; i < dim; ++i, ++j) acc[j] += static_cast<double>(row[i]) * query[i];
    return reduce_lanes(acc.data());
}

#ifdef FUSION_HAVE_AVX2

}  // namespace detail

namespace {

// Eight 4-wide accumulators: accumulator k, lane l holds element index 4k + l (mod 32).
// `ahead` (may be null) is prefetched alongside the loads; it is never dereferenced.
inline __attribute__((always_inline)) double dot_avx2(const float* row, const double* query, std::size_t dim,
                                                      const char* ahead) noexcept {
    __m256d s0 = _mm256_setzero_pd(), s1 = s0, s2 = s0, s3 = s0, s4 = s0, s5 = s0, s6 = s0, s7 = s0;
    std::size_t i = 0;
    for (; i + kLanes <= dim; i += kLanes) {
        if (ahead != nullptr) {
            _mm_prefetch(ahead + i * sizeof(float), _MM_HINT_T0);
            _mm_prefetch(ahead + i * sizeof(float) + 64, _MM_HINT_T0);
        }
        const float* p = row + i;
        const double* q = query + i;
        s0 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm_loadu_ps(p)), _mm256_loadu_pd(q), s0);
        s1 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm_loadu_ps(p + 4)), _mm256_loadu_pd(q + 4), s1);
        s2 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm_loadu_ps(p + 8)), _mm256_loadu_pd(q + 8), s2);
        s3 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm_loadu_ps(p + 12)), _mm256_loadu_pd(q + 12), s3);
        s4 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm_loadu_ps(p + 16)), _mm256_loadu_pd(q + 16), s4);
        s5 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm_loadu_ps(p + 20)), _mm256_loadu_pd(q + 20), s5);
        s6 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm_loadu_ps(p + 24)), _mm256_loadu_pd(q + 24), s6);
        s7 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm_loadu_ps(p + 28)), _mm256_loadu_pd(q + 28), s7);
    }
    alignas(32) double acc[kLanes];
    _mm256_store_pd(acc, s0);
    _mm256_store_pd(acc + 4, s1);
    _mm256_store_pd(acc + 8, s2);
    _mm256_store_pd(acc + 12, s3);
    _mm256_store_pd(acc + 16, s4);
    _mm256_store_pd(acc + 20, s5);
    _mm256_store_pd(acc + 24, s6);
    _mm256_store_pd(acc + 28, s7);
    for (std::size_t j = 0; i < dim; ++i, ++j) acc[j] += static_cast<double>(row[i]) * query[i];
    return reduce_lanes(acc);
}

}  // namespace

namespace detail {

double dot_lanes(const float* row, const double* query, std::size_t dim) noexcept {
    return dot_avx2(row, query, dim, nullptr);
}

bool simd_kernel_enabled() noexcept { return true; }

#else

double dot_lanes(const float* row, const double* query, std::size_t dim) noexcept {
    return dot_lanes_reference(row, query, dim);
}

bool simd_kernel_enabled() noexcept { return false; }

#endif

}  // namespace detail

Embedding Embedding::from_unit(std::vector<float> values, double tolerance) {
    if (values.empty()) throw ValidationError("embedding has dimension 0");
    double sq = 0.0;
    for (float x : values) {
        if (!std::isfinite(x)) throw ValidationError("embedding contains a non-finite value");
        sq += static_cast<double>(x) * x;
    }
    const double norm = std::sqrt(sq);
    if (std::abs(norm - 1.0) > tolerance) {
        throw NormalizationError("embedding norm " + std::to_string(norm) + " is not 1 (tolerance " +
                                 std::to_string(tolerance) + ")");
    }
    return Embedding(std::move(values));
}

std::string_view to_string(Modality m) noexcept {
    switch (m) {
        case Modality::text:
            return "text";
        case Modality::image:
            return "image";
        case Modality::sketch:
            return "sketch";
        case Modality::precomputed:
            return "precomputed";
    }
    return "unknown";
}

std::optional<Modality> parse_modality(std::string_view s) noexcept {
    if (s == "text") return Modality::text;
    if (s == "image") return Modality::image;
    if (s == "sketch") return Modality::sketch;
    if (s == "precomputed") return Modality::precomputed;
    return std::nullopt;
}

Embedding normalize(std::span<const double> v) {
    if (v.empty()) throw ValidationError("cannot normalize an empty vector");
    double sq = 0.0;
    for (double x : v) {
        if (!std::isfinite(x)) throw ValidationError("cannot normalize a vector with non-finite values");
        sq += x * x;
    }
    const double norm = std::sqrt(sq);
    if (!(norm > kEpsilonNorm)) throw ZeroNormError("vector norm is zero");
    std::vector<float> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i] / norm);
    return Embedding(std::move(out));
}

Embedding normalize(std::span<const float> v) {
    const auto wide = widen(v);
    return normalize(std::span<const double>(wide));
}

FusedQuery fuse(std::span<const WeightedInput> inputs) {
    if (inputs.empty()) throw EmptyQueryError("fusion needs at least one input");
    const std::size_t dim = inputs.front().embedding.dimension();
    std::vector<double> sum(dim, 0.0);
    std::vector<ProvenanceEntry> provenance;
    provenance.reserve(inputs.size());
    for (const auto& in : inputs) {
        require_same_dimension(in.embedding.dimension(), dim, "fuse");
        if (!std::isfinite(in.weight)) throw ValidationError("weight for '" + in.label + "' is not finite");
        const auto z = in.embedding.values();
        for (std::size_t d = 0; d < dim; ++d) sum[d] += in.weight * static_cast<double>(z[d]);
        provenance.push_back({in.label, in.weight});
    }
    try {
        return FusedQuery{normalize(std::span<const double>(sum)), std::move(provenance)};
    } catch (const ZeroNormError&) {
        throw ZeroNormError("weights cancel: the weighted sum of the inputs is zero");
    }
}

float similarity(std::span<const float> a, std::span<const float> b) {
    require_same_dimension(a.size(), b.size(), "similarity");
    const auto wide = widen(b);
    return static_cast<float>(detail::dot_lanes(a.data(), wide.data(), a.size()));
}

float similarity(const FusedQuery& query, const Embedding& features) {
    return similarity(features.values(), query.code.values());
}

void similarity_batch(const FusedQuery& query, std::span<const float> matrix, std::size_t dim,
                      std::span<float> out) {
    require_same_dimension(query.code.dimension(), dim, "similarity_batch");
    if (matrix.size() % dim != 0) throw DimensionMismatchError("matrix size is not a multiple of the dimension");
    const std::size_t rows = matrix.size() / dim;
    if (out.size() != rows) throw ValidationError("output span does not match the row count");

    const auto q = widen(query.code.values());
    const float* base = matrix.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const float* row = base + r * dim;
#if defined(FUSION_HAVE_AVX2)
        // Stream three rows ahead; the scan is bound by memory bandwidth.
        const char* ahead = reinterpret_cast<const char*>(reinterpret_cast<std::uintptr_t>(row) + 3 * dim * sizeof(float));
        out[r] = static_cast<float>(dot_avx2(row, q.data(), dim, ahead));
#else
        out[r] = static_cast<float>(detail::dot_lanes(row, q.data(), dim));
#endif
    }
}

std::vector<float> similarity_batch(const FusedQuery& query, std::span<const float> matrix, std::size_t dim) {
    if (dim == 0) throw DimensionMismatchError("dimension must be positive");
    std::vector<float> out(matrix.size() / dim);
    similarity_batch(query, matrix, dim, out);
    return out;
}

void similarity_batch_parallel(const FusedQuery& query, std::span<const float> matrix, std::size_t dim,
                               std::span<float> out, unsigned threads) {
    require_same_dimension(query.code.dimension(), dim, "similarity_batch");
    if (matrix.size() % dim != 0) throw DimensionMismatchError("matrix size is not a multiple of the dimension");
    const std::size_t rows = matrix.size() / dim;
    if (out.size() != rows) throw ValidationError("output span does not match the row count");
    threads = std::max(1u, threads);
    if (threads == 1 || rows < 2 * threads) {
        similarity_batch(query, matrix, dim, out);
        return;
    }
    const std::size_t chunk = (rows + threads - 1) / threads;
    std::vector<std::jthread> workers;
    workers.reserve(threads);
    for (std::size_t begin = 0; begin < rows; begin += chunk) {
        const std::size_t end = std::min(rows, begin + chunk);
        workers.emplace_back([&, begin, end] {
            similarity_batch(query, matrix.subspan(begin * dim, (end - begin) * dim), dim,
                             out.subspan(begin, end - begin));
        });
    }
}

}  // namespace fusion
