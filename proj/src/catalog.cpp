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

#include "fusion/catalog.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "fusion/error.hpp"

namespace fusion {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kEntriesSection = "[entries]";
constexpr std::string_view kEntriesHeader = "asset_id\tview\tbyte_offset\tthumbnail_path\tmesh_path";
constexpr std::string_view kAssetsHeader = "asset_id\tcategory\tdisplay_name\tthumbnail_path\tmesh_path";
constexpr std::string_view kMetadataFile = "metadata.tsv";

std::string read_text(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot open " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Writes to a sibling temp file and renames it into place.
void write_file_atomically(const fs::path& file, std::string_view bytes) {
    fs::path tmp = file;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot create " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, file, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        parts.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return parts;
}

std::vector<std::string_view> lines_of(std::string_view text) {
    auto lines = split(text, '\n');
    for (auto& l : lines) {
        if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    }
    if (!lines.empty() && lines.back().empty()) lines.pop_back();
    return lines;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && ptr == end;
}

void require_plain_field(std::string_view value, std::string_view what) {
    if (value.find_first_of("\t\r\n") != std::string_view::npos) {
        throw ValidationError(std::string(what) + " must not contain tabs or newlines: '" + std::string(value) + "'");
    }
}

std::uint32_t to_le_bits(float x) {
    auto bits = std::bit_cast<std::uint32_t>(x);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
    return bits;
}

float from_le_bits(std::uint32_t bits) {
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
    return std::bit_cast<float>(bits);
}

double row_norm(std::span<const float> row) {
    double sq = 0.0;
    for (float x : row) sq += static_cast<double>(x) * x;
    return std::sqrt(sq);
}

}  // namespace

std::string_view to_string(RenderStyle s) noexcept {
    switch (s) {
        case RenderStyle::textured:
            return "textured";
        case RenderStyle::untextured:
            return "untextured";
        case RenderStyle::untextured_smoothed:
            return "untextured_smoothed";
    }
    return "unknown";
}

std::optional<RenderStyle> parse_render_style(std::string_view s) noexcept {
    if (s == "textured") return RenderStyle::textured;
    if (s == "untextured") return RenderStyle::untextured;
    if (s == "untextured_smoothed") return RenderStyle::untextured_smoothed;
    return std::nullopt;
}

fs::path manifest_path(const fs::path& dir, std::string_view collection_id) {
    return dir / (std::string(collection_id) + ".manifest");
}

fs::path vector_path(const fs::path& dir, std::string_view collection_id) {
    return dir / (std::string(collection_id) + ".f32");
}

fs::path assets_path(const fs::path& dir, std::string_view collection_id) {
    return dir / (std::string(collection_id) + ".assets.tsv");
}

bool valid_collection_id(std::string_view id) noexcept {
    if (id.empty() || id.front() == '.') return false;
    return std::all_of(id.begin(), id.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-' ||
               c == '.';
    });
}

CollectionManifest make_manifest(std::string collection_id, std::size_t dimension, RenderStyle style,
                                 std::vector<ManifestEntry> entries) {
    CollectionManifest m;
    m.collection_id = std::move(collection_id);
    m.dimension = dimension;
    m.render_style = style;
    m.record_count = entries.size();
    for (std::size_t i = 0; i < entries.size(); ++i) entries[i].byte_offset = 4ULL * dimension * i;
    m.entries = std::move(entries);
    return m;
}

void write_collection(const fs::path& dir, const CollectionManifest& manifest, std::span<const float> vectors) {
    if (!valid_collection_id(manifest.collection_id)) {
        throw ValidationError("invalid collection id '" + manifest.collection_id + "'");
    }
    if (manifest.format_version != kFormatVersion) {
        throw FormatVersionError("cannot write format version " + std::to_string(manifest.format_version));
    }
    const std::size_t dim = manifest.dimension;
    if (dim == 0) throw ValidationError("manifest dimension must be positive");
    if (manifest.record_count != manifest.entries.size()) {
        throw ValidationError("record_count does not match the number of entries");
    }
    if (vectors.size() != manifest.record_count * dim) {
        throw DimensionMismatchError("vector matrix holds " + std::to_string(vectors.size()) + " floats, expected " +
                                     std::to_string(manifest.record_count * dim));
    }
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        const auto& e = manifest.entries[i];
        if (e.asset_id.empty()) throw ValidationError("entry " + std::to_string(i) + " has an empty asset_id");
        if (e.view.empty()) throw ValidationError("entry " + std::to_string(i) + " has an empty view");
        require_plain_field(e.asset_id, "asset_id");
        require_plain_field(e.view, "view");
        require_plain_field(e.thumbnail_path, "thumbnail_path");
        require_plain_field(e.mesh_path, "mesh_path");
        if (e.byte_offset != 4ULL * dim * i) {
            throw ValidationError("entry " + std::to_string(i) + " does not carry the canonical byte offset");
        }
        const double norm = row_norm(vectors.subspan(i * dim, dim));
        if (!(std::abs(norm - 1.0) <= kStoredUnitTolerance)) {
            throw NormalizationError("row " + std::to_string(i) + " (" + e.asset_id + "/" + e.view + ") has norm " +
                                     std::to_string(norm));
        }
    }

    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

    std::string bytes(vectors.size() * 4, '\0');
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        const std::uint32_t bits = to_le_bits(vectors[i]);
        std::memcpy(bytes.data() + 4 * i, &bits, 4);
    }
    write_file_atomically(vector_path(dir, manifest.collection_id), bytes);

    std::ostringstream text;
    text << "# fusionsearch collection manifest\n"
         << "format_version = " << manifest.format_version << '\n'
         << "collection_id = " << manifest.collection_id << '\n'
         << "dimension = " << dim << '\n'
         << "render_style = " << to_string(manifest.render_style) << '\n'
         << "record_count = " << manifest.record_count << '\n'
         << '\n'
         << kEntriesSection << '\n'
         << kEntriesHeader << '\n';
    for (const auto& e : manifest.entries) {
        text << e.asset_id << '\t' << e.view << '\t' << e.byte_offset << '\t' << e.thumbnail_path << '\t'
             << e.mesh_path << '\n';
    }
    // Manifest last: its presence marks the collection complete.
    write_file_atomically(manifest_path(dir, manifest.collection_id), text.str());
}

LoadedCollection read_collection(const fs::path& manifest_file) {
    const std::string text = read_text(manifest_file);
    const auto lines = lines_of(text);
    const std::string name = manifest_file.filename().string();

    std::map<std::string, std::string, std::less<>> header;
    std::size_t line_no = 0;
    for (; line_no < lines.size(); ++line_no) {
        const auto line = trim(lines[line_no]);
        if (line.empty() || line.front() == '#') continue;
        if (line == kEntriesSection) break;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw CorruptFileError(name + ": malformed header line " + std::to_string(line_no + 1));
        }
        header.emplace(std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))));
    }

    const auto field = [&](std::string_view key) -> const std::string& {
        const auto it = header.find(key);
        if (it == header.end()) throw CorruptFileError(name + ": missing '" + std::string(key) + "'");
        return it->second;
    };

    CollectionManifest m;
    if (!parse_number(field("format_version"), m.format_version)) {
        throw CorruptFileError(name + ": unreadable format_version");
    }
    if (m.format_version != kFormatVersion) {
        throw FormatVersionError(name + ": unsupported format version " + std::to_string(m.format_version));
    }
    m.collection_id = field("collection_id");
    if (!valid_collection_id(m.collection_id)) throw CorruptFileError(name + ": invalid collection_id");
    if (!parse_number(field("dimension"), m.dimension) || m.dimension == 0) {
        throw CorruptFileError(name + ": invalid dimension");
    }
    const auto style = parse_render_style(field("render_style"));
    if (!style) throw CorruptFileError(name + ": unknown render_style '" + field("render_style") + "'");
    m.render_style = *style;
    if (!parse_number(field("record_count"), m.record_count)) throw CorruptFileError(name + ": invalid record_count");

    if (line_no >= lines.size()) throw CorruptFileError(name + ": missing [entries] section");
    ++line_no;
    if (line_no >= lines.size() || lines[line_no] != kEntriesHeader) {
        throw CorruptFileError(name + ": missing entries table header");
    }
    ++line_no;
    for (; line_no < lines.size(); ++line_no) {
        if (lines[line_no].empty()) continue;
        const auto cols = split(lines[line_no], '\t');
        if (cols.size() != 5) throw CorruptFileError(name + ": bad entry on line " + std::to_string(line_no + 1));
        ManifestEntry e{std::string(cols[0]), std::string(cols[1]), 0, std::string(cols[3]), std::string(cols[4])};
        if (e.asset_id.empty() || e.view.empty() || !parse_number(cols[2], e.byte_offset)) {
            throw CorruptFileError(name + ": bad entry on line " + std::to_string(line_no + 1));
        }
        m.entries.push_back(std::move(e));
    }
    if (m.entries.size() != m.record_count) {
        throw CorruptFileError(name + ": record_count " + std::to_string(m.record_count) + " but " +
                               std::to_string(m.entries.size()) + " entries");
    }

    const fs::path vec_file = vector_path(manifest_file.parent_path(), m.collection_id);
    const std::string bytes = read_text(vec_file);
    const std::uint64_t row_bytes = 4ULL * m.dimension;
    if (bytes.size() != m.record_count * row_bytes) {
        throw CorruptFileError(vec_file.filename().string() + ": size " + std::to_string(bytes.size()) +
                               " bytes, expected " + std::to_string(m.record_count * row_bytes));
    }

    LoadedCollection out;
    out.records.reserve(m.record_count);
    for (std::size_t i = 0; i < m.entries.size(); ++i) {
        const auto& e = m.entries[i];
        if (e.byte_offset % row_bytes != 0 || e.byte_offset + row_bytes > bytes.size() ||
            (i > 0 && e.byte_offset <= m.entries[i - 1].byte_offset)) {
            throw CorruptFileError(name + ": invalid byte offset for entry " + std::to_string(i));
        }
        std::vector<float> row(m.dimension);
        for (std::size_t d = 0; d < m.dimension; ++d) {
            std::uint32_t bits = 0;
            std::memcpy(&bits, bytes.data() + e.byte_offset + 4 * d, 4);
            row[d] = from_le_bits(bits);
        }
        try {
            out.records.push_back(ViewRecord{e.asset_id, e.view, m.collection_id,
                                             Embedding::from_unit(std::move(row), kStoredUnitTolerance), i});
        } catch (const NormalizationError& err) {
            throw NormalizationError(name + ": entry " + std::to_string(i) + ": " + err.what());
        } catch (const ValidationError& err) {
            throw CorruptFileError(name + ": entry " + std::to_string(i) + ": " + err.what());
        }
    }
    out.manifest = std::move(m);
    return out;
}

void write_assets(const fs::path& file, std::span<const AssetMeta> assets) {
    std::ostringstream text;
    text << kAssetsHeader << '\n';
    for (const auto& a : assets) {
        require_plain_field(a.asset_id, "asset_id");
        require_plain_field(a.category, "category");
        require_plain_field(a.display_name, "display_name");
        require_plain_field(a.thumbnail_path, "thumbnail_path");
        require_plain_field(a.mesh_path, "mesh_path");
        text << a.asset_id << '\t' << a.category << '\t' << a.display_name << '\t' << a.thumbnail_path << '\t'
             << a.mesh_path << '\n';
    }
    write_file_atomically(file, text.str());
}

std::vector<AssetMeta> read_assets(const fs::path& file) {
    const std::string text = read_text(file);
    const auto lines = lines_of(text);
    const std::string name = file.filename().string();
    if (lines.empty() || lines.front() != kAssetsHeader) throw CorruptFileError(name + ": missing header row");

    std::vector<AssetMeta> assets;
    std::set<std::string, std::less<>> seen;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        auto cols = split(lines[i], '\t');
        if (cols.size() > 5 || cols.front().empty()) {
            throw CorruptFileError(name + ": bad row on line " + std::to_string(i + 1));
        }
        cols.resize(5);
        AssetMeta a{std::string(cols[0]), std::string(cols[1]), std::string(cols[2]), std::string(cols[3]),
                    std::string(cols[4])};
        if (!seen.insert(a.asset_id).second) {
            throw CorruptFileError(name + ": duplicate asset_id '" + a.asset_id + "'");
        }
        assets.push_back(std::move(a));
    }
    return assets;
}

ImportResult import_raw(const fs::path& input_dir, const std::string& collection_id, RenderStyle style,
                        const fs::path& out_dir) {
    if (!valid_collection_id(collection_id)) throw ValidationError("invalid collection id '" + collection_id + "'");
    std::error_code ec;
    if (!fs::is_directory(input_dir, ec)) throw IoError("input directory not found: " + input_dir.string());

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(input_dir, ec)) {
        if (entry.is_regular_file() && entry.path().extension() == ".vec") files.push_back(entry.path());
    }
    if (ec) throw IoError("cannot list " + input_dir.string() + ": " + ec.message());
    if (files.empty()) throw ValidationError("no .vec files in " + input_dir.string());
    std::sort(files.begin(), files.end());

    std::map<std::string, AssetMeta, std::less<>> meta;
    const fs::path meta_file = input_dir / kMetadataFile;
    if (fs::exists(meta_file)) {
        for (auto& a : read_assets(meta_file)) meta.emplace(a.asset_id, std::move(a));
    }

    struct Raw {
        std::string asset_id;
        std::string view;
        Embedding embedding;
    };
    std::vector<Raw> raws;
    std::size_t dim = 0;
    for (const auto& file : files) {
        const std::string fname = file.filename().string();
        const std::string stem = file.stem().string();
        const auto sep = stem.rfind("__");
        if (sep == std::string::npos || sep == 0 || sep + 2 >= stem.size()) {
            throw CorruptFileError(fname + ": file name must be <asset_id>__<view>.vec");
        }
        std::string asset_id = stem.substr(0, sep);
        std::string view = stem.substr(sep + 2);

        const std::string text = read_text(file);
        std::vector<float> values;
        std::size_t pos = 0;
        while (pos < text.size()) {
            const auto start = text.find_first_not_of(" \t\r\n", pos);
            if (start == std::string::npos) break;
            auto end = text.find_first_of(" \t\r\n", start);
            if (end == std::string::npos) end = text.size();
            double v = 0.0;
            if (!parse_number(std::string_view(text).substr(start, end - start), v)) {
                throw CorruptFileError(fname + ": unparsable number '" + text.substr(start, end - start) + "'");
            }
            values.push_back(static_cast<float>(v));
            pos = end;
        }
        if (values.empty()) throw CorruptFileError(fname + ": empty vector");
        if (dim == 0) dim = values.size();
        if (values.size() != dim) {
            throw DimensionMismatchError(fname + ": dimension " + std::to_string(values.size()) + ", expected " +
                                         std::to_string(dim));
        }
        try {
            raws.push_back(Raw{asset_id, view, normalize(values)});
        } catch (const ZeroNormError&) {
            throw ZeroNormError("zero vector for asset '" + asset_id + "' (view '" + view + "') in file " + fname);
        } catch (const ValidationError& err) {
            throw CorruptFileError(fname + ": " + err.what());
        }
    }

    std::sort(raws.begin(), raws.end(), [](const Raw& a, const Raw& b) {
        if (a.asset_id != b.asset_id) return a.asset_id < b.asset_id;
        return view_less(a.view, b.view);
    });

    ImportResult result;
    std::vector<ManifestEntry> entries;
    std::vector<float> matrix;
    matrix.reserve(raws.size() * dim);
    for (const auto& r : raws) {
        auto it = meta.try_emplace(r.asset_id, AssetMeta{r.asset_id, "", r.asset_id, "", ""}).first;
        if (it->second.display_name.empty()) it->second.display_name = r.asset_id;
        if (result.assets.empty() || result.assets.back().asset_id != r.asset_id) {
            result.assets.push_back(it->second);
        }
        entries.push_back(ManifestEntry{r.asset_id, r.view, 0, it->second.thumbnail_path, it->second.mesh_path});
        matrix.insert(matrix.end(), r.embedding.values().begin(), r.embedding.values().end());
    }
    result.manifest = make_manifest(collection_id, dim, style, std::move(entries));

    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
    write_assets(assets_path(out_dir, collection_id), result.assets);
    write_collection(out_dir, result.manifest, matrix);

    result.records.reserve(raws.size());
    for (std::size_t i = 0; i < raws.size(); ++i) {
        result.records.push_back(ViewRecord{raws[i].asset_id, raws[i].view, collection_id, std::move(raws[i].embedding), i});
    }
    result.manifest_path = manifest_path(out_dir, collection_id);
    return result;
}

}  // namespace fusion
