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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <set>

#include "fusion/error.hpp"
#include "fusion/index.hpp"
#include "test_support.hpp"

namespace fusion {
namespace {

using testing::as_query;
using testing::basis;
using testing::random_records;
using testing::random_unit;

// Unit vector in the (e0, e1) plane whose dot product with e0 is `cosine`.
Embedding at_cosine(std::size_t dim, double cosine) {
    std::vector<double> v(dim, 0.0);
    v[0] = cosine;
    v[1] = std::sqrt(1.0 - cosine * cosine);
    return normalize(std::span<const double>(v));
}

TEST(IndexBuild, CountsRecordsAndAssets) {
    std::vector<ViewRecord> records;
    for (const char* asset : {"a", "b"}) {
        for (const char* view : {"front", "back", "perspective"}) {
            records.push_back({asset, view, "c", basis(4, 0)});
        }
    }
    const auto index = Index::build(records, 4);
    EXPECT_EQ(index.stats().record_count, 6u);
    EXPECT_EQ(index.stats().asset_count, 2u);
    EXPECT_EQ(index.stats().dimension, 4u);
}

TEST(IndexBuild, EmptyIndexIsValid) {
    const auto index = Index::build({}, 8);
    EXPECT_EQ(index.stats().record_count, 0u);
    EXPECT_EQ(index.stats().asset_count, 0u);
    EXPECT_TRUE(index.collection_ids().empty());
}

TEST(IndexBuild, RejectsDimensionMismatchAndDuplicates) {
    EXPECT_THROW(Index::build({{"a", "front", "c", basis(3, 0)}}, 4), DimensionMismatchError);
    EXPECT_THROW(Index::build({{"a", "front", "c", basis(4, 0)}, {"a", "front", "c", basis(4, 1)}}, 4),
                 DuplicateRecordError);
    EXPECT_NO_THROW(Index::build({{"a", "front", "c", basis(4, 0)}, {"a", "front", "d", basis(4, 1)}}, 4));
}

TEST(IndexSearch, BestViewPerAssetWins) {
    const std::size_t dim = 8;
    const std::vector<ViewRecord> records{{"A", "front", "c", at_cosine(dim, 0.9)},
                                          {"A", "back", "c", at_cosine(dim, 0.8)},
                                          {"A", "perspective", "c", at_cosine(dim, 0.7)},
                                          {"B", "front", "c", at_cosine(dim, 0.85)}};
    const auto index = Index::build(records, dim);
    const auto result = index.search(as_query(basis(dim, 0)), 2, "c");
    ASSERT_EQ(result.matches.size(), 2u);
    EXPECT_EQ(result.matches[0].asset_id, "A");
    EXPECT_EQ(result.matches[0].best_view, "front");
    EXPECT_NEAR(result.matches[0].score, 0.9, 1e-6);
    EXPECT_EQ(result.matches[1].asset_id, "B");
    EXPECT_NEAR(result.matches[1].score, 0.85, 1e-6);
    EXPECT_GE(result.scan_micros, 1);
}

TEST(IndexSearch, KLargerThanAssetCountTruncates) {
    std::mt19937_64 rng(11);
    const auto records = random_records(rng, 3, 8, 3);
    const auto index = Index::build(records, 8);
    EXPECT_EQ(index.search(as_query(random_unit(rng, 8)), 50, "c").matches.size(), 3u);
}

TEST(IndexSearch, EqualScoresBreakTiesByAssetId) {
    const std::vector<ViewRecord> records{{"zeta", "front", "c", basis(4, 0)},
                                          {"alpha", "front", "c", basis(4, 0)},
                                          {"mid", "front", "c", basis(4, 0)}};
    const auto index = Index::build(records, 4);
    const auto result = index.search(as_query(basis(4, 0)), 3, "c");
    ASSERT_EQ(result.matches.size(), 3u);
    EXPECT_EQ(result.matches[0].asset_id, "alpha");
    EXPECT_EQ(result.matches[1].asset_id, "mid");
    EXPECT_EQ(result.matches[2].asset_id, "zeta");
}

TEST(IndexSearch, EqualViewScoresPreferCanonicalViewOrder) {
    const std::vector<ViewRecord> records{{"a", "side", "c", basis(4, 0)},
                                          {"a", "perspective", "c", basis(4, 0)},
                                          {"a", "back", "c", basis(4, 0)}};
    const auto index = Index::build(records, 4);
    EXPECT_EQ(index.search(as_query(basis(4, 0)), 1, "c").matches[0].best_view, "back");
}

TEST(IndexSearch, ErrorPaths) {
    const auto index = Index::build({{"a", "front", "c", basis(4, 0)}}, 4);
    EXPECT_THROW((void)index.search(as_query(basis(4, 0)), 0, "c"), ValidationError);
    EXPECT_THROW((void)index.search(as_query(basis(4, 0)), 1, "missing"), UnknownCollectionError);
    EXPECT_THROW((void)index.search(as_query(basis(5, 0)), 1, "c"), DimensionMismatchError);
}

TEST(IndexSearch, MatchesNaiveOracleOnRandomCollection) {
    std::mt19937_64 rng(12);
    const auto records = random_records(rng, 200, 16, 3);
    const auto index = Index::build(records, 16);
    for (int q = 0; q < 20; ++q) {
        const auto query = random_unit(rng, 16);
        EXPECT_EQ(index.search(as_query(query), 7, "c").matches, testing::naive_search(records, query, 7, "c"));
    }
}

TEST(IndexSearch, CollectionsArePartitioned) {
    std::mt19937_64 rng(13);
    auto records = random_records(rng, 20, 8, 3, "left");
    const auto right = random_records(rng, 15, 8, 2, "right");
    records.insert(records.end(), right.begin(), right.end());
    std::shuffle(records.begin(), records.end(), rng);
    const auto index = Index::build(records, 8);

    EXPECT_EQ(index.collection_ids(), (std::vector<std::string>{"left", "right"}));
    EXPECT_EQ(index.collection_stats("left").asset_count, 20u);
    EXPECT_EQ(index.collection_stats("right").asset_count, 15u);
    // Asset ids overlap between the two collections; the global count is distinct ids.
    EXPECT_EQ(index.stats().asset_count, 20u);

    const auto query = random_unit(rng, 8);
    for (const char* c : {"left", "right"}) {
        const auto result = index.search(as_query(query), 100, c);
        for (const auto& m : result.matches) EXPECT_EQ(m.collection_id, c);
        EXPECT_EQ(result.matches, testing::naive_search(records, query, 100, c));
    }
}

TEST(IndexSearch, RecordsRoundTripInPackedOrder) {
    std::mt19937_64 rng(14);
    const auto records = random_records(rng, 10, 8, 3);
    const auto index = Index::build(records, 8);
    const auto packed = index.records();
    ASSERT_EQ(packed.size(), records.size());
    for (std::size_t i = 0; i < packed.size(); ++i) {
        EXPECT_EQ(packed[i].row_index, i);
        const auto match = std::find_if(records.begin(), records.end(), [&](const ViewRecord& r) {
            return r.asset_id == packed[i].asset_id && r.view == packed[i].view;
        });
        ASSERT_NE(match, records.end());
        EXPECT_EQ(match->embedding, packed[i].embedding);
    }
}

TEST(IndexStats, LastScanMicrosTracksSearches) {
    const auto index = Index::build({{"a", "front", "c", basis(4, 0)}}, 4);
    EXPECT_EQ(index.stats().last_scan_micros, 0);
    const auto result = index.search(as_query(basis(4, 0)), 1, "c");
    EXPECT_EQ(index.stats().last_scan_micros, result.scan_micros);
}

// Properties over hand-rolled random collections.

TEST(IndexProperty, DedupSoundAndComplete) {
    std::mt19937_64 rng(15);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t assets = 1 + trial % 40;
        const std::size_t dim = 4 + trial % 13;
        const auto records = random_records(rng, assets, dim, 5);
        const auto index = Index::build(records, dim);
        const auto query = random_unit(rng, dim);
        const std::size_t k = 1 + trial % 12;
        const auto matches = index.search(as_query(query), k, "c").matches;

        EXPECT_EQ(matches.size(), std::min(k, assets));
        std::set<std::string> ids;
        for (const auto& m : matches) {
            EXPECT_TRUE(ids.insert(m.asset_id).second) << "duplicate asset " << m.asset_id;
            float best = -2.0f;
            for (const auto& r : records) {
                if (r.asset_id == m.asset_id) best = std::max(best, testing::naive_dot(r.embedding.values(), query.values()));
            }
            EXPECT_EQ(m.score, best);
        }
        for (std::size_t i = 1; i < matches.size(); ++i) EXPECT_GE(matches[i - 1].score, matches[i].score);
    }
}

TEST(IndexProperty, SearchIsDeterministic) {
    std::mt19937_64 rng(16);
    const auto records = random_records(rng, 50, 32, 3);
    const auto index = Index::build(records, 32);
    auto shuffled = records;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto rebuilt = Index::build(shuffled, 32);
    for (int q = 0; q < 10; ++q) {
        const auto query = as_query(random_unit(rng, 32));
        const auto first = index.search(query, 10, "c").matches;
        EXPECT_EQ(index.search(query, 10, "c").matches, first);
        EXPECT_EQ(index.search(query, 10, "c", 4).matches, first);
        EXPECT_EQ(rebuilt.search(query, 10, "c").matches, first);
    }
}

double min_search_millis(const Index& index, const FusedQuery& query, int runs) {
    double best = 1e30;
    for (int i = 0; i < runs; ++i) {
        const auto start = std::chrono::steady_clock::now();
        (void)index.search(query, 5, "c");
        best = std::min(best, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
    }
    return best;
}

TEST(IndexScaling, LatencyGrowsLinearlyWithRecordCount) {
    // Per-record cost at N and 4N should agree within 30%. Minimum of runs filters scheduler noise.
    const std::size_t dim = 128;
    std::mt19937_64 rng(17);
    std::vector<ViewRecord> records;
    const std::size_t small = 20000, large = 80000;
    for (std::size_t i = 0; i < large; ++i) {
        records.push_back({"asset" + std::to_string(i), "front", "c", random_unit(rng, dim)});
    }
    const auto query = as_query(random_unit(rng, dim));
    const auto big = Index::build(records, dim);
    records.erase(records.begin() + small, records.end());
    const auto little = Index::build(records, dim);

    const double per_small = min_search_millis(little, query, 15) / small;
    const double per_large = min_search_millis(big, query, 15) / large;
    const double ratio = per_large / per_small;
    EXPECT_GT(ratio, 0.7) << "per-record cost small=" << per_small << " large=" << per_large;
    EXPECT_LT(ratio, 1.3) << "per-record cost small=" << per_small << " large=" << per_large;
}

}  // namespace
}  // namespace fusion
