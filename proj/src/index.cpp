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

#include "fusion/index.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <set>
#include <tuple>

#include "fusion/error.hpp"

namespace fusion {

int view_rank(std::string_view view) noexcept {
    if (view == views::front) return 0;
    if (view == views::back) return 1;
    if (view == views::perspective) return 2;
    return 3;
}

bool view_less(std::string_view a, std::string_view b) noexcept {
    return std::forward_as_tuple(view_rank(a), a) < std::forward_as_tuple(view_rank(b), b);
}

Index::Index(Index&& other) noexcept
    : dimension_(other.dimension_),
      matrix_(std::move(other.matrix_)),
      row_asset_(std::move(other.row_asset_)),
      row_view_(std::move(other.row_view_)),
      view_names_(std::move(other.view_names_)),
      collections_(std::move(other.collections_)),
      asset_count_(other.asset_count_),
      last_scan_micros_(other.last_scan_micros_.load()) {}

Index Index::build(std::vector<ViewRecord> records, std::size_t dimension) {
    if (dimension == 0) throw DimensionMismatchError("index dimension must be positive");
    for (const auto& r : records) {
        if (r.embedding.dimension() != dimension) {
            throw DimensionMismatchError("record " + r.asset_id + "/" + r.view + " has dimension " +
                                         std::to_string(r.embedding.dimension()) + ", index expects " +
                                         std::to_string(dimension));
        }
    }

    // Canonical packed order: collection, asset, view. Duplicates become adjacent.
    std::stable_sort(records.begin(), records.end(), [](const ViewRecord& a, const ViewRecord& b) {
        if (a.collection_id != b.collection_id) return a.collection_id < b.collection_id;
        if (a.asset_id != b.asset_id) return a.asset_id < b.asset_id;
        return view_less(a.view, b.view);
    });
    for (std::size_t i = 1; i < records.size(); ++i) {
        const auto& a = records[i - 1];
        const auto& b = records[i];
        if (a.collection_id == b.collection_id && a.asset_id == b.asset_id && a.view == b.view) {
            throw DuplicateRecordError("duplicate record (" + b.asset_id + ", " + b.view + ", " + b.collection_id +
                                       ")");
        }
    }

    Index index;
    index.dimension_ = dimension;
    index.matrix_.resize(records.size() * dimension);
    index.row_asset_.resize(records.size());
    index.row_view_.resize(records.size());

    std::map<std::string, std::uint32_t, std::less<>> view_ids;
    std::set<std::string, std::less<>> all_assets;
    for (std::size_t row = 0; row < records.size(); ++row) {
        const auto& r = records[row];
        auto& block = index.collections_[r.collection_id];
        if (block.asset_ids.empty() && block.row_end == 0) {
            block.row_begin = row;
        }
        block.row_end = row + 1;
        if (block.asset_ids.empty() || block.asset_ids.back() != r.asset_id) block.asset_ids.push_back(r.asset_id);
        index.row_asset_[row] = static_cast<std::uint32_t>(block.asset_ids.size() - 1);

        auto [it, inserted] = view_ids.try_emplace(r.view, static_cast<std::uint32_t>(index.view_names_.size()));
        if (inserted) index.view_names_.push_back(r.view);
        index.row_view_[row] = it->second;

        all_assets.insert(r.asset_id);
        std::copy(r.embedding.values().begin(), r.embedding.values().end(),
                  index.matrix_.begin() + static_cast<std::ptrdiff_t>(row * dimension));
    }
    index.asset_count_ = all_assets.size();
    return index;
}

SearchResult Index::search(const FusedQuery& query, std::size_t k, std::string_view collection_id,
                           unsigned threads) const {
    if (k == 0) throw ValidationError("k must be at least 1");
    if (query.code.dimension() != dimension_) {
        throw DimensionMismatchError("query dimension " + std::to_string(query.code.dimension()) +
                                     " does not match index dimension " + std::to_string(dimension_));
    }
    const auto it = collections_.find(collection_id);
    if (it == collections_.end()) throw UnknownCollectionError("unknown collection '" + std::string(collection_id) + "'");
    const CollectionBlock& block = it->second;

    const auto start = std::chrono::steady_clock::now();

    const std::size_t rows = block.row_end - block.row_begin;
    std::vector<float> scores(rows);
    similarity_batch_parallel(query, std::span<const float>(matrix_).subspan(block.row_begin * dimension_, rows * dimension_),
                              dimension_, scores, threads);

    // Per-asset maximum; on equal scores the earlier (canonical view order) row wins.
    const std::size_t assets = block.asset_ids.size();
    std::vector<float> best(assets, -std::numeric_limits<float>::infinity());
    std::vector<std::size_t> best_row(assets, std::numeric_limits<std::size_t>::max());
    for (std::size_t r = 0; r < rows; ++r) {
        const std::uint32_t a = row_asset_[block.row_begin + r];
        if (best_row[a] == std::numeric_limits<std::size_t>::max() || scores[r] > best[a]) {
            best[a] = scores[r];
            best_row[a] = r;
        }
    }

    std::vector<std::uint32_t> order(assets);
    for (std::uint32_t a = 0; a < assets; ++a) order[a] = a;
    const std::size_t take = std::min(k, assets);
    // Ordinals follow ascending asset_id, so comparing them breaks ties by asset_id.
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                      [&](std::uint32_t a, std::uint32_t b) { return best[a] > best[b] || (best[a] == best[b] && a < b); });

    SearchResult result;
    result.matches.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        const std::uint32_t a = order[i];
        result.matches.push_back(ScoredMatch{block.asset_ids[a], best[a],
                                             view_names_[row_view_[block.row_begin + best_row[a]]], it->first});
    }

    const auto elapsed = std::chrono::steady_clock::now() - start;
    const auto nanos = std::chrono::duration_cast<std::chrono::nanoseconds>(elapsed).count();
    result.scan_micros = std::max<std::int64_t>(1, (nanos + 999) / 1000);
    last_scan_micros_.store(result.scan_micros, std::memory_order_relaxed);
    return result;
}

IndexStats Index::stats() const noexcept {
    return IndexStats{row_asset_.size(), asset_count_, dimension_, last_scan_micros_.load(std::memory_order_relaxed)};
}

IndexStats Index::collection_stats(std::string_view collection_id) const {
    const auto it = collections_.find(collection_id);
    if (it == collections_.end()) throw UnknownCollectionError("unknown collection '" + std::string(collection_id) + "'");
    return IndexStats{it->second.row_end - it->second.row_begin, it->second.asset_ids.size(), dimension_,
                      last_scan_micros_.load(std::memory_order_relaxed)};
}

bool Index::has_collection(std::string_view collection_id) const noexcept {
    return collections_.find(collection_id) != collections_.end();
}

std::vector<std::string> Index::collection_ids() const {
    std::vector<std::string> ids;
    ids.reserve(collections_.size());
    for (const auto& [id, block] : collections_) ids.push_back(id);
    return ids;
}

std::vector<ViewRecord> Index::records() const {
    std::vector<ViewRecord> out;
    out.reserve(row_asset_.size());
    for (const auto& [id, block] : collections_) {
        for (std::size_t row = block.row_begin; row < block.row_end; ++row) {
            const auto first = matrix_.begin() + static_cast<std::ptrdiff_t>(row * dimension_);
            // Stored rows already passed the unit check on the way in.
            out.push_back(ViewRecord{block.asset_ids[row_asset_[row]], view_names_[row_view_[row]], id,
                                     Embedding::from_unit(std::vector<float>(first, first + static_cast<std::ptrdiff_t>(dimension_)),
                                                          1e-4),
                                     row});
        }
    }
    return out;
}

}  // namespace fusion
