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

#include "fusion/service.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>

#include <httplib.h>

#include "fusion/base64.hpp"
#include "fusion/error.hpp"
#include "fusion/portable_random.hpp"

namespace fusion {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t micros_since(Clock::time_point start) {
    return std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - start).count();
}

HttpResponse error_response(int status, std::string_view code, const std::string& message) {
    return HttpResponse{status, json{{"error", {{"code", code}, {"message", message}}}}};
}

// Validation failures carry the HTTP status they map to.
struct BadRequest {
    int status;
    std::string code;
    std::string message;
};

EncoderGateway make_gateway(const EncoderConfig& config, std::unique_ptr<EncoderBackend> backend) {
    if (backend) return EncoderGateway(config, std::move(backend));
    return EncoderGateway(config);
}

std::string opaque_error_id() {
    static std::atomic<std::uint64_t> counter{0};
    const auto now = static_cast<std::uint64_t>(std::chrono::system_clock::now().time_since_epoch().count());
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(mix64(now ^ mix64(++counter))));
    return buf;
}

std::map<std::string, AssetMeta, std::less<>> index_assets(std::vector<AssetMeta> assets) {
    std::map<std::string, AssetMeta, std::less<>> out;
    for (auto& a : assets) {
        auto id = a.asset_id;
        out.emplace(std::move(id), std::move(a));
    }
    return out;
}

struct ParsedInput {
    Modality modality = Modality::text;
    double weight = 1.0;
    std::string label;
    std::optional<RawInput> raw;
    std::optional<Embedding> embedding;
};

ParsedInput parse_input(const json& in, std::size_t position, std::size_t dimension) {
    const auto bad = [&](const std::string& msg) {
        return BadRequest{400, "invalid_request", "inputs[" + std::to_string(position) + "]: " + msg};
    };
    if (!in.is_object()) throw bad("must be an object");

    ParsedInput out;
    if (!in.contains("modality") || !in["modality"].is_string()) throw bad("missing modality");
    const auto modality = parse_modality(in["modality"].get<std::string>());
    if (!modality) throw bad("unknown modality '" + in["modality"].get<std::string>() + "'");
    out.modality = *modality;

    if (in.contains("weight")) {
        if (!in["weight"].is_number()) throw bad("weight must be a number");
        out.weight = in["weight"].get<double>();
        if (!std::isfinite(out.weight)) throw bad("weight must be finite");
    }
    if (in.contains("label")) {
        if (!in["label"].is_string()) throw bad("label must be a string");
        out.label = in["label"].get<std::string>();
    } else {
        out.label = std::string(to_string(out.modality)) + " " + std::to_string(position + 1);
    }

    if (out.modality == Modality::precomputed) {
        if (!in.contains("embedding") || !in["embedding"].is_array()) throw bad("precomputed input needs an embedding array");
        const auto& arr = in["embedding"];
        if (arr.size() != dimension) {
            throw bad("embedding has " + std::to_string(arr.size()) + " values, expected " + std::to_string(dimension));
        }
        std::vector<double> values;
        values.reserve(arr.size());
        for (const auto& x : arr) {
            if (!x.is_number()) throw bad("embedding values must be numbers");
            values.push_back(x.get<double>());
        }
        try {
            out.embedding = normalize(std::span<const double>(values));
        } catch (const ZeroNormError&) {
            throw bad("embedding is a zero vector");
        } catch (const ValidationError& e) {
            throw bad(e.what());
        }
        return out;
    }

    if (!in.contains("payload") || !in["payload"].is_string()) throw bad("missing payload");
    RawInput raw;
    raw.modality = out.modality;
    raw.label = out.label;
    if (out.modality == Modality::text) {
        raw.payload = in["payload"].get<std::string>();
    } else {
        auto decoded = base64_decode(in["payload"].get<std::string>());
        if (!decoded) throw bad("payload is not valid base64");
        raw.payload = std::move(*decoded);
        if (in.contains("media_type") && in["media_type"].is_string()) raw.media_type = in["media_type"].get<std::string>();
    }
    if (raw.payload.empty()) throw bad("payload is empty");
    out.raw = std::move(raw);
    return out;
}

}  // namespace

Service::Service(ServiceConfig config, std::unique_ptr<EncoderBackend> backend)
    : config_(std::move(config)), encoder_(make_gateway(config_.encoder, std::move(backend))), started_(Clock::now()) {
    std::error_code ec;
    fs::create_directories(config_.data_dir / "static", ec);

    std::vector<fs::path> manifests;
    for (const auto& entry : fs::directory_iterator(config_.data_dir, ec)) {
        if (entry.is_regular_file() && entry.path().extension() == ".manifest") manifests.push_back(entry.path());
    }
    std::sort(manifests.begin(), manifests.end());

    std::vector<ViewRecord> records;
    std::map<std::string, CollectionInfo, std::less<>> collections;
    std::size_t dimension = config_.encoder.dimension;
    for (const auto& path : manifests) {
        auto loaded = read_collection(path);
        if (loaded.manifest.dimension != dimension) {
            throw DimensionMismatchError(path.filename().string() + ": dimension " +
                                         std::to_string(loaded.manifest.dimension) + " does not match " +
                                         std::to_string(dimension));
        }
        CollectionInfo info{loaded.manifest, {}};
        const auto assets_file = assets_path(config_.data_dir, loaded.manifest.collection_id);
        if (fs::exists(assets_file)) info.assets = index_assets(read_assets(assets_file));
        std::move(loaded.records.begin(), loaded.records.end(), std::back_inserter(records));
        collections.emplace(info.manifest.collection_id, std::move(info));
    }
    auto snap = std::make_shared<Snapshot>(Snapshot{Index::build(std::move(records), dimension), std::move(collections)});
    publish(std::move(snap));
}

std::shared_ptr<const Service::Snapshot> Service::snapshot() const {
    std::lock_guard lock(snapshot_mutex_);
    return snapshot_;
}

void Service::publish(std::shared_ptr<const Snapshot> next) {
    std::lock_guard lock(snapshot_mutex_);
    snapshot_ = std::move(next);
}

HttpResponse Service::query(const json& request) {
    const auto total_start = Clock::now();
    const auto snap = snapshot();
    try {
        if (!request.is_object()) throw BadRequest{400, "invalid_request", "request body must be a JSON object"};
        if (!request.contains("inputs") || !request["inputs"].is_array()) {
            throw BadRequest{400, "invalid_request", "inputs must be an array"};
        }
        const auto& inputs = request["inputs"];
        if (inputs.empty() || inputs.size() > kMaxQueryInputs) {
            throw BadRequest{400, "invalid_request",
                             "a query needs between 1 and " + std::to_string(kMaxQueryInputs) + " inputs"};
        }
        std::size_t k = kDefaultTopK;
        if (request.contains("k")) {
            if (!request["k"].is_number_integer()) throw BadRequest{400, "invalid_request", "k must be an integer"};
            const auto raw_k = request["k"].get<std::int64_t>();
            if (raw_k < 1 || raw_k > static_cast<std::int64_t>(kMaxTopK)) {
                throw BadRequest{400, "invalid_request", "k must be in [1, " + std::to_string(kMaxTopK) + "]"};
            }
            k = static_cast<std::size_t>(raw_k);
        }
        std::string collection_id = config_.default_collection;
        if (request.contains("collection_id")) {
            if (!request["collection_id"].is_string()) {
                throw BadRequest{400, "invalid_request", "collection_id must be a string"};
            }
            collection_id = request["collection_id"].get<std::string>();
        }
        if (collection_id.empty()) throw BadRequest{400, "invalid_request", "collection_id is required"};
        const auto info = snap->collections.find(collection_id);
        if (info == snap->collections.end() || !snap->index.has_collection(collection_id)) {
            throw BadRequest{404, "unknown_collection", "unknown collection '" + collection_id + "'"};
        }

        std::vector<ParsedInput> parsed;
        parsed.reserve(inputs.size());
        for (std::size_t i = 0; i < inputs.size(); ++i) parsed.push_back(parse_input(inputs[i], i, snap->index.dimension()));

        const auto encode_start = Clock::now();
        std::vector<WeightedInput> weighted;
        weighted.reserve(parsed.size());
        for (auto& p : parsed) {
            Embedding e = p.embedding ? std::move(*p.embedding) : encoder_.encode(*p.raw);
            weighted.push_back(WeightedInput{std::move(e), p.weight, p.modality, p.label});
        }
        const auto encode_micros = micros_since(encode_start);

        const auto fuse_start = Clock::now();
        FusedQuery fused = [&] {
            try {
                return fuse(weighted);
            } catch (const ZeroNormError&) {
                throw BadRequest{400, "weights_cancel", "weights cancel: the weighted inputs sum to zero, adjust weights"};
            }
        }();
        const auto fuse_micros = micros_since(fuse_start);

        const auto result = snap->index.search(fused, k, collection_id);

        json matches = json::array();
        for (const auto& m : result.matches) {
            json match{{"asset_id", m.asset_id}, {"score", m.score}, {"best_view", m.best_view},
                       {"display_name", m.asset_id}, {"category", ""}, {"thumbnail_path", ""}};
            if (const auto a = info->second.assets.find(m.asset_id); a != info->second.assets.end()) {
                match["display_name"] = a->second.display_name;
                match["category"] = a->second.category;
                match["thumbnail_path"] = a->second.thumbnail_path;
                if (!a->second.thumbnail_path.empty()) match["thumbnail_url"] = "/static/" + a->second.thumbnail_path;
            }
            matches.push_back(std::move(match));
        }
        json provenance = json::array();
        for (const auto& p : fused.provenance) provenance.push_back({{"label", p.label}, {"weight", p.weight}});

        return HttpResponse{200, json{{"collection_id", collection_id},
                                      {"k", k},
                                      {"matches", std::move(matches)},
                                      {"fused_provenance", std::move(provenance)},
                                      {"timing",
                                       {{"encode_micros", encode_micros},
                                        {"fuse_micros", fuse_micros},
                                        {"scan_micros", result.scan_micros},
                                        {"total_micros", micros_since(total_start)}}}}};
    } catch (const BadRequest& e) {
        return error_response(e.status, e.code, e.message);
    } catch (const UnknownCollectionError& e) {
        return error_response(404, "unknown_collection", e.what());
    } catch (const EncoderUnavailableError& e) {
        return error_response(502, "encoder_unavailable", e.what());
    } catch (const EncoderProtocolError& e) {
        return error_response(502, "encoder_protocol", e.what());
    } catch (const InputTooLargeError& e) {
        return error_response(400, "input_too_large", e.what());
    } catch (const ValidationError& e) {
        return error_response(400, "invalid_request", e.what());
    } catch (const DimensionMismatchError& e) {
        return error_response(400, "dimension_mismatch", e.what());
    } catch (const std::exception& e) {
        const auto id = opaque_error_id();
        std::cerr << "query failed [" << id << "]: " << e.what() << '\n';
        return error_response(500, "internal", "internal error " + id);
    }
}

HttpResponse Service::import_collection(const json& request) {
    try {
        if (!request.is_object()) throw BadRequest{400, "invalid_request", "request body must be a JSON object"};
        const auto get_string = [&](const char* key) -> std::string {
            if (!request.contains(key) || !request[key].is_string()) {
                throw BadRequest{400, "invalid_request", std::string(key) + " must be a string"};
            }
            return request[key].get<std::string>();
        };
        const fs::path input_dir = get_string("input_dir");
        const std::string collection_id = get_string("collection_id");
        if (!valid_collection_id(collection_id)) {
            throw BadRequest{400, "invalid_request", "invalid collection_id '" + collection_id + "'"};
        }
        RenderStyle style = RenderStyle::textured;
        if (request.contains("render_style")) {
            const auto parsed = parse_render_style(get_string("render_style"));
            if (!parsed) throw BadRequest{400, "invalid_request", "unknown render_style"};
            style = *parsed;
        }

        std::lock_guard writer(import_mutex_);
        const auto current = snapshot();
        if (current->collections.contains(collection_id)) {
            throw BadRequest{409, "collection_exists", "collection '" + collection_id + "' already exists"};
        }

        // Stage outside the live file set; publish the files only once the import is valid.
        const fs::path staging = config_.data_dir / (".staging-" + collection_id);
        std::error_code ec;
        fs::remove_all(staging, ec);
        ImportResult imported = [&] {
            try {
                return import_raw(input_dir, collection_id, style, staging);
            } catch (const Error& e) {
                fs::remove_all(staging, ec);
                throw BadRequest{422, "import_failed", e.what()};
            }
        }();
        if (imported.manifest.dimension != current->index.dimension()) {
            fs::remove_all(staging, ec);
            throw BadRequest{422, "dimension_mismatch",
                             "collection dimension " + std::to_string(imported.manifest.dimension) +
                                 " does not match the service dimension " + std::to_string(current->index.dimension())};
        }

        auto records = current->index.records();
        const std::size_t imported_records = imported.records.size();
        std::move(imported.records.begin(), imported.records.end(), std::back_inserter(records));
        auto collections = current->collections;
        collections.emplace(collection_id, CollectionInfo{imported.manifest, index_assets(imported.assets)});
        auto next = std::make_shared<Snapshot>(
            Snapshot{Index::build(std::move(records), current->index.dimension()), std::move(collections)});

        for (const auto& file : {vector_path(staging, collection_id), assets_path(staging, collection_id),
                                 manifest_path(staging, collection_id)}) {
            fs::rename(file, config_.data_dir / file.filename(), ec);
            if (ec) throw IoError("cannot move " + file.string() + ": " + ec.message());
        }
        fs::remove_all(staging, ec);

        const auto stats = next->index.collection_stats(collection_id);
        publish(std::move(next));
        return HttpResponse{200, json{{"collection_id", collection_id},
                                      {"render_style", to_string(style)},
                                      {"record_count", imported_records},
                                      {"asset_count", stats.asset_count},
                                      {"dimension", stats.dimension}}};
    } catch (const BadRequest& e) {
        return error_response(e.status, e.code, e.message);
    } catch (const std::exception& e) {
        const auto id = opaque_error_id();
        std::cerr << "import failed [" << id << "]: " << e.what() << '\n';
        return error_response(500, "internal", "internal error " + id);
    }
}

HttpResponse Service::collections() const {
    const auto snap = snapshot();
    json out = json::array();
    for (const auto& [id, info] : snap->collections) {
        const auto stats = snap->index.collection_stats(id);
        out.push_back({{"collection_id", id},
                       {"render_style", to_string(info.manifest.render_style)},
                       {"record_count", stats.record_count},
                       {"asset_count", stats.asset_count},
                       {"dimension", stats.dimension}});
    }
    return HttpResponse{200, std::move(out)};
}

HttpResponse Service::asset(std::string_view asset_id) const {
    const auto snap = snapshot();
    for (const auto& [id, info] : snap->collections) {
        const auto it = info.assets.find(asset_id);
        if (it == info.assets.end()) continue;
        const auto& a = it->second;
        json body{{"asset_id", a.asset_id},         {"category", a.category},   {"display_name", a.display_name},
                  {"thumbnail_path", a.thumbnail_path}, {"mesh_path", a.mesh_path}, {"collection_id", id}};
        if (!a.thumbnail_path.empty()) body["thumbnail_url"] = "/static/" + a.thumbnail_path;
        return HttpResponse{200, std::move(body)};
    }
    return error_response(404, "unknown_asset", "unknown asset '" + std::string(asset_id) + "'");
}

HttpResponse Service::health() {
    const bool ok = encoder_.healthy();
    const auto uptime = std::chrono::duration<double>(Clock::now() - started_).count();
    return HttpResponse{200, json{{"status", ok ? "ok" : "degraded"},
                                  {"uptime_seconds", uptime},
                                  {"encoder_mode", to_string(encoder_.config().mode)},
                                  {"collections", snapshot()->collections.size()}}};
}

void Service::install_routes(httplib::Server& server) {
    const auto reply = [](httplib::Response& res, const HttpResponse& r) {
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json");
    };
    const auto parse_body = [](const httplib::Request& req) { return json::parse(req.body, nullptr, false); };

    server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    server.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });
    server.Post("/v1/query", [this, reply, parse_body](const httplib::Request& req, httplib::Response& res) {
        const auto body = parse_body(req);
        if (body.is_discarded()) return reply(res, error_response(400, "invalid_json", "request body is not valid JSON"));
        reply(res, query(body));
    });
    server.Post("/v1/collections/import", [this, reply, parse_body](const httplib::Request& req, httplib::Response& res) {
        const auto body = parse_body(req);
        if (body.is_discarded()) return reply(res, error_response(400, "invalid_json", "request body is not valid JSON"));
        reply(res, import_collection(body));
    });
    server.Get("/v1/collections",
               [this, reply](const httplib::Request&, httplib::Response& res) { reply(res, collections()); });
    server.Get(R"(/v1/assets/([^/]+))", [this, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, asset(req.matches[1].str()));
    });
    server.Get("/v1/health", [this, reply](const httplib::Request&, httplib::Response& res) { reply(res, health()); });
    server.set_mount_point("/static", (config_.data_dir / "static").string());
}

}  // namespace fusion
