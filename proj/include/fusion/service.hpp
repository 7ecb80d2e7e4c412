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

// HTTP/JSON query service.
//
//   POST /v1/query               encode -> fuse -> search
//   POST /v1/collections/import  import a raw vector directory as a new collection
//   GET  /v1/collections         collection summaries
//   GET  /v1/assets/{asset_id}   asset metadata
//   GET  /v1/health              status, uptime, encoder mode
//   GET  /static/...             files under <data_dir>/static (thumbnails)
//
// Errors are returned as {"error": {"code": ..., "message": ...}}.

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>

#include <json.hpp>

#include "fusion/catalog.hpp"
#include "fusion/encoder.hpp"
#include "fusion/index.hpp"

namespace httplib {
class Server;
}

namespace fusion {

inline constexpr std::size_t kMaxQueryInputs = 16;
inline constexpr std::size_t kMaxTopK = 100;

struct ServiceConfig {
    std::filesystem::path data_dir = "data";
    EncoderConfig encoder;
    // Used when a query omits collection_id.
    std::string default_collection;
};

struct HttpResponse {
    int status = 200;
    nlohmann::json body;
};

class Service {
 public:
    /// Loads every collection found in `data_dir`.
    explicit Service(ServiceConfig config, std::unique_ptr<EncoderBackend> backend = nullptr);

    HttpResponse query(const nlohmann::json& request);
    HttpResponse import_collection(const nlohmann::json& request);
    [[nodiscard]] HttpResponse collections() const;
    [[nodiscard]] HttpResponse asset(std::string_view asset_id) const;
    [[nodiscard]] HttpResponse health();

    /// Registers the /v1 routes and the /static mount on `server`.
    void install_routes(httplib::Server& server);

    [[nodiscard]] EncoderGateway& encoder() noexcept { return encoder_; }
    [[nodiscard]] const ServiceConfig& config() const noexcept { return config_; }

    struct CollectionInfo {
        CollectionManifest manifest;
        std::map<std::string, AssetMeta, std::less<>> assets;
    };

    // Immutable view of everything a query reads; replaced wholesale on import.
    struct Snapshot {
        Index index;
        std::map<std::string, CollectionInfo, std::less<>> collections;
    };

    [[nodiscard]] std::shared_ptr<const Snapshot> snapshot() const;

 private:
    void publish(std::shared_ptr<const Snapshot> next);

    ServiceConfig config_;
    EncoderGateway encoder_;
    std::chrono::steady_clock::time_point started_;

    mutable std::mutex snapshot_mutex_;
    std::shared_ptr<const Snapshot> snapshot_;
    // Single-writer path for imports.
    std::mutex import_mutex_;
};

}  // namespace fusion
