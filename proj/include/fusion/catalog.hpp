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

// On-disk collections.
//
// A collection `<id>` lives in one directory as three files:
//
//   <id>.manifest     UTF-8 text: `key = value` header lines, then an `[entries]` section holding a
//                     tab-separated table (asset_id, view, byte_offset, thumbnail_path, mesh_path).
//   <id>.f32          little-endian float32, row-major, no header; row i starts at byte 4*D*i.
//   <id>.assets.tsv   tab-separated asset metadata (asset_id, category, display_name,
//                     thumbnail_path, mesh_path) with a header row.
//
// Raw imports read a directory of `<asset_id>__<view>.vec` files (whitespace-separated decimals,
// one vector per file) plus an optional `metadata.tsv` in the asset-table layout above.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fusion/index.hpp"

namespace fusion {

inline constexpr int kFormatVersion = 1;

// Catalog rows are re-verified against this looser tolerance to absorb float32 rounding.
inline constexpr double kStoredUnitTolerance = 1e-4;

enum class RenderStyle { textured, untextured, untextured_smoothed };

[[nodiscard]] std::string_view to_string(RenderStyle s) noexcept;
[[nodiscard]] std::optional<RenderStyle> parse_render_style(std::string_view s) noexcept;

struct ManifestEntry {
    std::string asset_id;
    std::string view;
    std::uint64_t byte_offset = 0;
    std::string thumbnail_path;
    std::string mesh_path;

    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct CollectionManifest {
    std::string collection_id;
    std::size_t dimension = 0;
    RenderStyle render_style = RenderStyle::textured;
    std::size_t record_count = 0;
    std::vector<ManifestEntry> entries;
    int format_version = kFormatVersion;

    friend bool operator==(const CollectionManifest&, const CollectionManifest&) = default;
};

struct AssetMeta {
    std::string asset_id;
    std::string category;
    std::string display_name;
    std::string thumbnail_path;
    std::string mesh_path;

    friend bool operator==(const AssetMeta&, const AssetMeta&) = default;
};

struct LoadedCollection {
    CollectionManifest manifest;
    std::vector<ViewRecord> records;
};

struct ImportResult {
    CollectionManifest manifest;
    std::vector<ViewRecord> records;
    std::vector<AssetMeta> assets;
    std::filesystem::path manifest_path;
};

[[nodiscard]] std::filesystem::path manifest_path(const std::filesystem::path& dir, std::string_view collection_id);
[[nodiscard]] std::filesystem::path vector_path(const std::filesystem::path& dir, std::string_view collection_id);
[[nodiscard]] std::filesystem::path assets_path(const std::filesystem::path& dir, std::string_view collection_id);

// Collection ids double as file stems: [A-Za-z0-9_.-]+, not starting with '.'.
[[nodiscard]] bool valid_collection_id(std::string_view id) noexcept;

/// Writes the manifest and vector file of a collection into `dir`. Entry offsets in the manifest
/// must be canonical (4*D*i). `vectors` is row-major N x D. Throws NormalizationError when a
/// row is not unit-norm within 1e-4, ValidationError on inconsistent arguments, IoError.
void write_collection(const std::filesystem::path& dir, const CollectionManifest& manifest,
                      std::span<const float> vectors);

/// Reads a collection back. Throws FormatVersionError, CorruptFileError, NormalizationError, IoError.
LoadedCollection read_collection(const std::filesystem::path& manifest_file);

/// Builds a manifest with canonical offsets for the given entries.
CollectionManifest make_manifest(std::string collection_id, std::size_t dimension, RenderStyle style,
                                 std::vector<ManifestEntry> entries);

void write_assets(const std::filesystem::path& file, std::span<const AssetMeta> assets);
std::vector<AssetMeta> read_assets(const std::filesystem::path& file);

/// Imports a directory of raw per-view vectors: normalizes each vector, writes the canonical
/// collection files (plus the asset table) into `out_dir`. Throws ZeroNormError naming the
/// asset and file of a zero vector, DimensionMismatchError, CorruptFileError for unparsable
/// files, IoError when the input directory is missing.
ImportResult import_raw(const std::filesystem::path& input_dir, const std::string& collection_id,
                        RenderStyle style, const std::filesystem::path& out_dir);

}  // namespace fusion
