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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "fusion/embedding.hpp"
#include "fusion/error.hpp"
#include "test_support.hpp"

namespace fusion {
namespace {

using testing::basis;
using testing::random_unit;
using testing::random_vector;

double l2(std::span<const float> v) {
    double sq = 0.0;
    for (float x : v) sq += static_cast<double>(x) * x;
    return std::sqrt(sq);
}

void expect_near_elementwise(std::span<const float> a, std::span<const float> b, double tol) {
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "element " << i;
}

TEST(Normalize, UnitVectorUnchanged) {
    std::vector<float> v(512, 0.0f);
    v[0] = 1.0f;
    const auto e = normalize(v);
    EXPECT_EQ(e[0], 1.0f);
    for (std::size_t i = 1; i < 512; ++i) EXPECT_EQ(e[i], 0.0f);
}

TEST(Normalize, ScalingCollapses) {
    std::vector<float> v(512, 0.0f);
    v[0] = 2.0f;
    const auto e = normalize(v);
    EXPECT_EQ(e[0], 1.0f);
    EXPECT_EQ(e.dimension(), 512u);
}

TEST(Normalize, ZeroVectorThrows) {
    std::vector<float> v(512, 0.0f);
    EXPECT_THROW(normalize(v), ZeroNormError);
}

TEST(Normalize, RejectsNonFiniteAndEmpty) {
    std::vector<float> v{1.0f, std::numeric_limits<float>::quiet_NaN()};
    EXPECT_THROW(normalize(v), ValidationError);
    v[1] = std::numeric_limits<float>::infinity();
    EXPECT_THROW(normalize(v), ValidationError);
    EXPECT_THROW(normalize(std::span<const float>()), ValidationError);
}

TEST(Normalize, IdempotentAndDirectionPreserving) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 200; ++trial) {
        const auto raw = random_vector(rng, 1 + trial % 70, 0.01 + trial);
        const auto once = normalize(raw);
        const auto twice = normalize(once.values());
        expect_near_elementwise(once.values(), twice.values(), 1e-6);
        EXPECT_NEAR(l2(once.values()), 1.0, 1e-6);
        // Same direction: cosine with the raw vector is 1.
        EXPECT_NEAR(testing::naive_dot(once.values(), raw) / l2(raw), 1.0, 1e-6);
    }
}

TEST(Embedding, FromUnitEnforcesInvariant) {
    EXPECT_NO_THROW(Embedding::from_unit({0.6f, 0.8f}));
    EXPECT_THROW(Embedding::from_unit({0.5f, 0.0f}), NormalizationError);
    EXPECT_THROW(Embedding::from_unit({}), ValidationError);
    EXPECT_THROW(Embedding::from_unit({std::numeric_limits<float>::infinity()}), ValidationError);
}

TEST(Fuse, SingleInputIsIdentity) {
    std::mt19937_64 rng(2);
    const auto z = random_unit(rng, 64);
    const WeightedInput in{z, 1.0, Modality::text, "z"};
    const auto fused = fuse(std::span(&in, 1));
    expect_near_elementwise(fused.code.values(), z.values(), 1e-6);
    ASSERT_EQ(fused.provenance.size(), 1u);
    EXPECT_EQ(fused.provenance[0], (ProvenanceEntry{"z", 1.0}));
}

TEST(Fuse, EqualWeightsOnOrthonormalPair) {
    const std::vector<WeightedInput> inputs{{basis(4, 0), 0.5, Modality::text, "e1"},
                                            {basis(4, 1), 0.5, Modality::image, "e2"}};
    const auto fused = fuse(inputs);
    const float expected = static_cast<float>(1.0 / std::sqrt(2.0));
    expect_near_elementwise(fused.code.values(), std::vector<float>{expected, expected, 0.0f, 0.0f}, 1e-6);
}

TEST(Fuse, ExactCancellationThrowsZeroNorm) {
    std::mt19937_64 rng(3);
    const auto z = random_unit(rng, 32);
    const std::vector<WeightedInput> inputs{{z, 1.0, Modality::text, "a"}, {z, -1.0, Modality::text, "b"}};
    EXPECT_THROW(fuse(inputs), ZeroNormError);
}

TEST(Fuse, ErrorPaths) {
    EXPECT_THROW(fuse({}), EmptyQueryError);
    const std::vector<WeightedInput> mismatched{{basis(4, 0), 1.0, Modality::text, "a"},
                                                {basis(5, 0), 1.0, Modality::text, "b"}};
    EXPECT_THROW(fuse(mismatched), DimensionMismatchError);
    const std::vector<WeightedInput> bad_weight{{basis(4, 0), std::numeric_limits<double>::infinity(), Modality::text, "a"}};
    EXPECT_THROW(fuse(bad_weight), ValidationError);
}

TEST(Fuse, ZeroWeightContributesNothingButStaysInProvenance) {
    const std::vector<WeightedInput> inputs{{basis(3, 0), 2.0, Modality::text, "kept"},
                                            {basis(3, 1), 0.0, Modality::sketch, "muted"}};
    const auto fused = fuse(inputs);
    expect_near_elementwise(fused.code.values(), basis(3, 0).values(), 0.0);
    ASSERT_EQ(fused.provenance.size(), 2u);
    EXPECT_EQ(fused.provenance[1], (ProvenanceEntry{"muted", 0.0}));
}

TEST(Fuse, MatchesNaiveOracleOnRandomFiveInputs) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> weight(-2.0, 2.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<WeightedInput> inputs;
        std::vector<std::pair<std::vector<float>, double>> raw;
        for (int i = 0; i < 5; ++i) {
            const auto z = random_unit(rng, 8);
            const double w = weight(rng);
            inputs.push_back({z, w, Modality::precomputed, "in" + std::to_string(i)});
            raw.emplace_back(std::vector<float>(z.values().begin(), z.values().end()), w);
        }
        const auto expected = testing::naive_fuse(raw);
        const auto fused = fuse(inputs);
        for (std::size_t d = 0; d < 8; ++d) EXPECT_NEAR(fused.code[d], expected[d], 1e-6);
    }
}

TEST(Fuse, PermutationScaleAndAbsorptionProperties) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> weight(-3.0, 3.0);
    std::uniform_real_distribution<double> scale(0.01, 100.0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + trial % 6;
        std::vector<WeightedInput> inputs;
        for (std::size_t i = 0; i < n; ++i) inputs.push_back({random_unit(rng, 16), weight(rng), Modality::text, "x"});
        const auto base = fuse(inputs);

        auto shuffled = inputs;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        expect_near_elementwise(fuse(shuffled).code.values(), base.code.values(), 1e-6);

        const double c = scale(rng);
        auto scaled = inputs;
        for (auto& in : scaled) in.weight *= c;
        expect_near_elementwise(fuse(scaled).code.values(), base.code.values(), 1e-6);
    }

    for (double alpha : {0.25, 1.0, 7.5}) {
        const auto z = random_unit(rng, 16);
        const WeightedInput pos{z, alpha, Modality::text, "p"};
        const WeightedInput neg{z, -alpha, Modality::text, "n"};
        expect_near_elementwise(fuse(std::span(&pos, 1)).code.values(), z.values(), 1e-6);
        std::vector<float> minus(z.values().begin(), z.values().end());
        for (auto& x : minus) x = -x;
        expect_near_elementwise(fuse(std::span(&neg, 1)).code.values(), minus, 1e-6);
    }
}

TEST(Similarity, IdentityOrthogonalAntipodal) {
    const auto q = testing::as_query(basis(8, 2));
    EXPECT_NEAR(similarity(q, basis(8, 2)), 1.0, 1e-6);
    EXPECT_NEAR(similarity(q, basis(8, 5)), 0.0, 1e-6);
    EXPECT_NEAR(similarity(q, basis(8, 2, -1.0f)), -1.0, 1e-6);
}

TEST(Similarity, DimensionMismatchThrows) {
    EXPECT_THROW(similarity(testing::as_query(basis(8, 0)), basis(9, 0)), DimensionMismatchError);
}

TEST(Similarity, SymmetricBoundedAndSelfOne) {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t dim = 1 + trial % 600;
        const auto a = random_unit(rng, dim);
        const auto b = random_unit(rng, dim);
        const float ab = similarity(a.values(), b.values());
        EXPECT_EQ(ab, similarity(b.values(), a.values()));
        EXPECT_GE(ab, -1.0 - 1e-6);
        EXPECT_LE(ab, 1.0 + 1e-6);
        EXPECT_NEAR(similarity(testing::as_query(a), a), 1.0, 1e-6);
    }
}

TEST(SimilarityBatch, QueryOrthogonalAntipodalRows) {
    const auto q = testing::as_query(basis(4, 1));
    const std::vector<float> matrix{0, 1, 0, 0, /**/ 1, 0, 0, 0, /**/ 0, -1, 0, 0};
    const auto scores = similarity_batch(q, matrix, 4);
    ASSERT_EQ(scores.size(), 3u);
    EXPECT_NEAR(scores[0], 1.0, 1e-6);
    EXPECT_NEAR(scores[1], 0.0, 1e-6);
    EXPECT_NEAR(scores[2], -1.0, 1e-6);
}

TEST(SimilarityBatch, EmptyMatrixGivesEmptyResult) {
    EXPECT_TRUE(similarity_batch(testing::as_query(basis(4, 0)), {}, 4).empty());
}

TEST(SimilarityBatch, DimensionErrors) {
    const auto q = testing::as_query(basis(4, 0));
    const std::vector<float> matrix(10, 0.1f);
    EXPECT_THROW(similarity_batch(q, matrix, 4), DimensionMismatchError);
    EXPECT_THROW(similarity_batch(q, std::vector<float>(8, 0.0f), 8), DimensionMismatchError);
}

TEST(SimilarityBatch, MatchesScalarRowWise) {
    std::mt19937_64 rng(7);
    const std::size_t n = 100, dim = 16;
    std::vector<float> matrix;
    std::vector<Embedding> rows;
    for (std::size_t i = 0; i < n; ++i) {
        rows.push_back(random_unit(rng, dim));
        matrix.insert(matrix.end(), rows.back().values().begin(), rows.back().values().end());
    }
    const auto q = testing::as_query(random_unit(rng, dim));
    const auto scores = similarity_batch(q, matrix, dim);
    for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(scores[i], similarity(q, rows[i])) << "row " << i;
}

TEST(SimilarityBatch, ParallelIsBitIdentical) {
    std::mt19937_64 rng(8);
    const std::size_t n = 1001, dim = 40;
    std::vector<float> matrix;
    for (std::size_t i = 0; i < n; ++i) {
        const auto e = random_unit(rng, dim);
        matrix.insert(matrix.end(), e.values().begin(), e.values().end());
    }
    const auto q = testing::as_query(random_unit(rng, dim));
    const auto serial = similarity_batch(q, matrix, dim);
    for (unsigned threads : {1u, 2u, 3u, 8u}) {
        std::vector<float> parallel(n);
        similarity_batch_parallel(q, matrix, dim, parallel, threads);
        EXPECT_EQ(parallel, serial) << threads << " threads";
    }
}

TEST(DotKernel, SimdAndReferenceAgreeBitForBit) {
    std::mt19937_64 rng(9);
    for (std::size_t dim = 1; dim <= 130; ++dim) {
        const auto row = random_vector(rng, dim);
        const auto qf = random_vector(rng, dim);
        const std::vector<double> q(qf.begin(), qf.end());
        EXPECT_EQ(detail::dot_lanes(row.data(), q.data(), dim), detail::dot_lanes_reference(row.data(), q.data(), dim))
            << "dim " << dim;
    }
}

TEST(Modality, RoundTripsNames) {
    for (auto m : {Modality::text, Modality::image, Modality::sketch, Modality::precomputed}) {
        EXPECT_EQ(parse_modality(to_string(m)), m);
    }
    EXPECT_FALSE(parse_modality("audio").has_value());
}

}  // namespace
}  // namespace fusion
