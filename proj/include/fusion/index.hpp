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

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fusion/embedding.hpp"

namespace fusion {

inline constexpr std::size_t kDefaultTopK = 5;

namespace views {
inline constexpr std::string_view front = "front";
inline constexpr std::string_view back = "back";
inline constexpr std::string_view perspective = "perspective";
}  // namespace views

// Canonical ordering of view names: front, back, perspective, then custom views by name.
[[nodiscard]] int view_rank(std::string_view view) noexcept;
[[nodiscard]] bool view_less(std::string_view a, std::string_view b) noexcept;

/// One embedding of one rendered view of one asset.
struct ViewRecord {
    std::string asset_id;
    std::string view;
    std::string collection_id;
    Embedding embedding;
    // Position in the packed matrix; assigned by the index, ignored on input.
    std::size_t row_index = 0;
};

struct ScoredMatch {
    std::string asset_id;
    float score = 0.0f;
    std::string best_view;
    std::string collection_id;

    friend bool operator==(const ScoredMatch&, const ScoredMatch&) = default;
};

struct IndexStats {
    std::size_t record_count = 0;
    std::size_t asset_count = 0;
    std::size_t dimension = 0;
    std::int64_t last_scan_micros = 0;
};

struct SearchResult {
    std::vector<ScoredMatch> matches;
    // Wall time of the scan, dedup and top-k selection for this call.
    std::int64_t scan_micros = 0;
};

/// Immutable exact-scan index over view records.
///
/// Records are packed into one contiguous row-major matrix, grouped by collection so that a
/// search touches exactly one contiguous block. A search scores every row of the requested
/// collection, keeps the best view per asset, and returns the top-k assets by score
/// (ties: ascending asset_id). Any number of threads may search concurrently.
class Index {
 public:
    /// Throws DimensionMismatchError or DuplicateRecordError (same asset, view and collection).
    static Index build(std::vector<ViewRecord> records, std::size_t dimension);

    Index(Index&& other) noexcept;
    Index& operator=(Index&&) = delete;
    Index(const Index&) = delete;
    Index& operator=(const Index&) = delete;

    /// Throws ValidationError when k == 0, UnknownCollectionError, DimensionMismatchError.
    SearchResult search(const FusedQuery& query, std::size_t k, std::string_view collection_id,
                        unsigned threads = 1) const;

    [[nodiscard]] IndexStats stats() const noexcept;
    [[nodiscard]] IndexStats collection_stats(std::string_view collection_id) const;

    [[nodiscard]] std::size_t dimension() const noexcept { return dimension_; }
    [[nodiscard]] bool has_collection(std::string_view collection_id) const noexcept;
    [[nodiscard]] std::vector<std::string> collection_ids() const;

    /// Reconstructs the stored records in packed order.
    [[nodiscard]] std::vector<ViewRecord> records() const;

 private:
    struct CollectionBlock {
        std::size_t row_begin = 0;
        std::size_t row_end = 0;
        // Sorted ascending; an asset's ordinal is its position here.
        std::vector<std::string> asset_ids;
    };

    Index() = default;

    std::size_t dimension_ = 0;
    std::vector<float> matrix_;
    std::vector<std::uint32_t> row_asset_;  // ordinal within the row's collection
    std::vector<std::uint32_t> row_view_;   // index into view_names_
    std::vector<std::string> view_names_;
    std::map<std::string, CollectionBlock, std::less<>> collections_;
    std::size_t asset_count_ = 0;
    mutable std::atomic<std::int64_t> last_scan_micros_{0};
};

inline Index build_index(std::vector<ViewRecord> records, std::size_t dimension) {
    return Index::build(std::move(records), dimension);
}

}  // namespace fusion
