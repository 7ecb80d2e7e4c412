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

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fusion {

inline constexpr std::size_t kDefaultDimension = 512;

// Vectors whose L2 norm is at or below this value are treated as zero.
inline constexpr double kEpsilonNorm = 1e-12;

// Tolerance of the unit-norm invariant for in-memory embeddings.
inline constexpr double kUnitTolerance = 1e-5;

/// A finite, unit-L2-norm float32 vector. Instances can only be produced by `normalize`,
/// `fuse`, or `Embedding::from_unit`, all of which enforce the invariant.
class Embedding {
 public:
    /// Wraps values that are already unit-normalized. Throws ValidationError on
    /// non-finite values or an empty vector, NormalizationError when the norm is off by more
    /// than `tolerance`.
    static Embedding from_unit(std::vector<float> values, double tolerance = kUnitTolerance);

    [[nodiscard]] std::span<const float> values() const noexcept { return values_; }
    [[nodiscard]] std::size_t dimension() const noexcept { return values_.size(); }
    [[nodiscard]] float operator[](std::size_t i) const noexcept { return values_[i]; }

    friend bool operator==(const Embedding&, const Embedding&) = default;

 private:
    explicit Embedding(std::vector<float> values) : values_(std::move(values)) {}
    friend Embedding normalize(std::span<const double> v);

    std::vector<float> values_;
};

enum class Modality { text, image, sketch, precomputed };

[[nodiscard]] std::string_view to_string(Modality m) noexcept;
[[nodiscard]] std::optional<Modality> parse_modality(std::string_view s) noexcept;

struct WeightedInput {
    Embedding embedding;
    double weight = 1.0;
    Modality modality = Modality::precomputed;
    std::string label;
};

struct ProvenanceEntry {
    std::string label;
    double weight = 0.0;

    friend bool operator==(const ProvenanceEntry&, const ProvenanceEntry&) = default;
};

struct FusedQuery {
    Embedding code;
    std::vector<ProvenanceEntry> provenance;
};

/// L2-normalizes `v`. The norm is computed in double precision and the result rounded to float.
/// Throws ValidationError for empty or non-finite input and ZeroNormError when ||v|| <= kEpsilonNorm.
Embedding normalize(std::span<const float> v);
Embedding normalize(std::span<const double> v);

/// Weighted fusion of query inputs: normalize(sum_i weight_i * z_i).
///
/// Weights are arbitrary finite reals: they need not sum to one and may be zero or negative.
/// Zero-weight inputs contribute nothing but are still recorded in the provenance. The sum is
/// accumulated in double precision in input order.
FusedQuery fuse(std::span<const WeightedInput> inputs);

/// Cosine similarity of two unit vectors, i.e. their dot product, accumulated in double
/// precision and rounded to float.
float similarity(const FusedQuery& query, const Embedding& features);
float similarity(std::span<const float> a, std::span<const float> b);

/// Scores every row of a row-major `rows x dim` matrix against the query. `out` must hold
/// `matrix.size() / dim` elements. Element i is bit-identical to `similarity(query, row i)`.
void similarity_batch(const FusedQuery& query, std::span<const float> matrix, std::size_t dim,
                      std::span<float> out);
std::vector<float> similarity_batch(const FusedQuery& query, std::span<const float> matrix, std::size_t dim);

/// Same as `similarity_batch` with the rows split across `threads` worker threads.
void similarity_batch_parallel(const FusedQuery& query, std::span<const float> matrix, std::size_t dim,
                               std::span<float> out, unsigned threads);

namespace detail {

// Dot product of a float row with a double-precision query. Products are exact in double;
// they are summed into 32 lanes (lane = element index mod 32) which are then reduced by a
// fixed tree. The SIMD and scalar paths therefore agree bit-for-bit.
double dot_lanes(const float* row, const double* query, std::size_t dim) noexcept;

// Scalar reference of `dot_lanes`, always compiled without intrinsics.
double dot_lanes_reference(const float* row, const double* query, std::size_t dim) noexcept;

// True when `dot_lanes` dispatches to a SIMD kernel in this build.
bool simd_kernel_enabled() noexcept;

}  // namespace detail

}  // namespace fusion
