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

#include "fusion/encoder.hpp"

#include <cmath>
#include <cstdlib>
#include <algorithm>

#include <httplib.h>
#include <json.hpp>

#include "fusion/base64.hpp"
#include "fusion/error.hpp"
#include "fusion/portable_random.hpp"

namespace fusion {

using json = nlohmann::json;

std::string_view to_string(EncoderMode m) noexcept { return m == EncoderMode::mock ? "mock" : "remote"; }

EncoderConfig EncoderConfig::with_environment() const {
    EncoderConfig out = *this;
    if (const char* mode = std::getenv("FUSION_ENCODER_MODE"); mode != nullptr && *mode != '\0') {
        const std::string_view m(mode);
        if (m == "mock") {
            out.mode = EncoderMode::mock;
        } else if (m == "remote") {
            out.mode = EncoderMode::remote;
        } else {
            throw ValidationError("FUSION_ENCODER_MODE must be 'mock' or 'remote', got '" + std::string(m) + "'");
        }
    }
    if (const char* endpoint = std::getenv("FUSION_ENCODER_ENDPOINT"); endpoint != nullptr && *endpoint != '\0') {
        out.endpoint = endpoint;
    }
    return out;
}

void EncoderConfig::validate() const {
    if (timeout.count() <= 0) throw ValidationError("encoder timeout must be positive");
    if (dimension == 0) throw ValidationError("encoder dimension must be positive");
    if (max_in_flight <= 0) throw ValidationError("encoder in-flight limit must be positive");
    if (mode == EncoderMode::remote && endpoint.empty()) throw ValidationError("remote encoder needs an endpoint");
}

std::vector<float> MockEncoder::encode(const RawInput& input) {
    PortableRng rng(fnv1a64(input.payload) ^ mix64(seed_));
    std::vector<float> v(dimension_);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    return v;
}

RemoteEncoder::RemoteEncoder(std::string endpoint, std::chrono::milliseconds timeout, std::size_t dimension)
    : timeout_(timeout), dimension_(dimension) {
    const auto scheme = endpoint.find("://");
    const auto slash = endpoint.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    origin_ = endpoint.substr(0, slash);
    path_ = slash == std::string::npos ? "/encode" : endpoint.substr(slash);
}

std::vector<float> RemoteEncoder::encode(const RawInput& input) {
    httplib::Client client(origin_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);

    json body{{"modality", std::string(to_string(input.modality))}};
    if (input.modality == Modality::text) {
        body["payload"] = input.payload;
    } else {
        body["payload"] = base64_encode(input.payload);
        body["encoding"] = "base64";
        if (!input.media_type.empty()) body["media_type"] = input.media_type;
    }

    const auto res = client.Post(path_, body.dump(), "application/json");
    if (!res) {
        throw EncoderUnavailableError("encoder at " + origin_ + path_ + " unreachable: " + httplib::to_string(res.error()));
    }
    if (res->status >= 500) {
        throw EncoderUnavailableError("encoder returned HTTP " + std::to_string(res->status));
    }
    if (res->status != 200) throw EncoderProtocolError("encoder returned HTTP " + std::to_string(res->status));

    const json reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.is_object() || !reply.contains("vector") || !reply["vector"].is_array()) {
        throw EncoderProtocolError("encoder reply is not {\"vector\": [...]}");
    }
    const auto& arr = reply["vector"];
    if (arr.size() != dimension_) {
        throw EncoderProtocolError("encoder returned " + std::to_string(arr.size()) + " values, expected " +
                                   std::to_string(dimension_));
    }
    std::vector<float> v;
    v.reserve(dimension_);
    for (const auto& x : arr) {
        if (!x.is_number()) throw EncoderProtocolError("encoder reply contains a non-number");
        v.push_back(x.get<float>());
    }
    return v;
}

bool RemoteEncoder::healthy() {
    httplib::Client client(origin_);
    const auto probe = std::min(timeout_, std::chrono::milliseconds(1000));
    client.set_connection_timeout(probe);
    client.set_read_timeout(probe);
    // Any HTTP answer counts: the probe only checks that the service is reachable.
    return static_cast<bool>(client.Get("/"));
}

namespace {

std::unique_ptr<EncoderBackend> make_backend(const EncoderConfig& config) {
    config.validate();
    if (config.mode == EncoderMode::mock) return std::make_unique<MockEncoder>(config.dimension, config.mock_seed);
    return std::make_unique<RemoteEncoder>(config.endpoint, config.timeout, config.dimension);
}

}  // namespace

EncoderGateway::EncoderGateway(EncoderConfig config) : EncoderGateway(config, make_backend(config)) {}

EncoderGateway::EncoderGateway(EncoderConfig config, std::unique_ptr<EncoderBackend> backend)
    : config_(std::move(config)), backend_(std::move(backend)), in_flight_(std::max<std::ptrdiff_t>(1, config_.max_in_flight)) {
    config_.validate();
    if (!backend_) throw ValidationError("encoder backend is null");
}

void EncoderGateway::validate(const RawInput& input) const {
    if (input.modality == Modality::precomputed) {
        throw ValidationError("precomputed inputs carry their own embedding and are not encoded");
    }
    if (input.payload.empty()) {
        throw ValidationError(std::string(to_string(input.modality)) + " payload is empty");
    }
    if (input.modality != Modality::text && input.payload.size() > config_.max_payload_bytes) {
        throw InputTooLargeError(std::string(to_string(input.modality)) + " payload of " +
                                 std::to_string(input.payload.size()) + " bytes exceeds the limit of " +
                                 std::to_string(config_.max_payload_bytes));
    }
}

std::optional<Embedding> EncoderGateway::cache_lookup(const std::string& key) {
    std::lock_guard lock(cache_mutex_);
    const auto it = cache_.find(key);
    if (it == cache_.end()) return std::nullopt;
    lru_.splice(lru_.begin(), lru_, it->second);
    return it->second->second;
}

void EncoderGateway::cache_store(const std::string& key, const Embedding& value) {
    if (config_.cache_capacity == 0) return;
    std::lock_guard lock(cache_mutex_);
    if (const auto it = cache_.find(key); it != cache_.end()) {
        lru_.splice(lru_.begin(), lru_, it->second);
        return;
    }
    lru_.emplace_front(key, value);
    cache_.emplace(key, lru_.begin());
    while (cache_.size() > config_.cache_capacity) {
        cache_.erase(lru_.back().first);
        lru_.pop_back();
    }
}

Embedding EncoderGateway::encode(const RawInput& input) {
    validate(input);
    std::string key;
    key.reserve(input.payload.size() + 1);
    key += static_cast<char>('0' + static_cast<int>(input.modality));
    key += input.payload;
    if (auto hit = cache_lookup(key)) {
        ++cache_hits_;
        return std::move(*hit);
    }

    std::vector<float> raw;
    {
        in_flight_.acquire();
        struct Release {
            std::counting_semaphore<>& s;
            ~Release() { s.release(); }
        } release{in_flight_};
        ++backend_calls_;
        raw = backend_->encode(input);
    }
    if (raw.size() != config_.dimension) {
        throw EncoderProtocolError("encoder produced " + std::to_string(raw.size()) + " values, expected " +
                                   std::to_string(config_.dimension));
    }
    Embedding embedding = [&] {
        try {
            return normalize(raw);
        } catch (const ZeroNormError&) {
            throw EncoderProtocolError("encoder produced a zero vector");
        } catch (const ValidationError&) {
            throw EncoderProtocolError("encoder produced non-finite values");
        }
    }();
    cache_store(key, embedding);
    return embedding;
}

std::vector<Embedding> EncoderGateway::encode_batch(std::span<const RawInput> inputs) {
    std::vector<Embedding> out;
    out.reserve(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        try {
            out.push_back(encode(inputs[i]));
        } catch (const Error& e) {
            throw BatchEncodeError(i, std::current_exception(), e.what());
        }
    }
    return out;
}

bool EncoderGateway::healthy() { return backend_->healthy(); }

}  // namespace fusion
