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

// Encoder gateway: turns raw query inputs (text, image bytes, sketch bytes) into embeddings.
//
// Two backends exist. The remote backend POSTs to a CLIP-style encoding service:
//
//   request   {"modality": "text", "payload": "a tall chair"}
//             {"modality": "image"|"sketch", "payload": "<base64>", "encoding": "base64",
//              "media_type": "image/png"}
//   response  {"vector": [d0, d1, ...]}      exactly `dimension` finite numbers
//
// The mock backend derives a pseudo-random unit vector from the payload: seed =
// fnv1a64(payload) ^ mix64(mock_seed), SplitMix64 stream, `dimension` polar-method normal draws,
// then normalization. Equal (payload, seed) pairs give bit-identical vectors on every platform.
//
// The gateway validates inputs, normalizes every backend reply and caches embeddings in a
// bounded LRU keyed by (modality, payload), so re-running a query with different weights does
// not re-encode anything.

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fusion/embedding.hpp"

namespace fusion {

struct RawInput {
    Modality modality = Modality::text;
    // UTF-8 text, or the raw bytes of an image/sketch.
    std::string payload;
    std::string media_type;
    std::string label;
};

enum class EncoderMode { mock, remote };

[[nodiscard]] std::string_view to_string(EncoderMode m) noexcept;

struct EncoderConfig {
    EncoderMode mode = EncoderMode::mock;
    std::string endpoint;  // e.g. http://127.0.0.1:9000/encode
    std::chrono::milliseconds timeout{5000};
    std::size_t dimension = kDefaultDimension;
    std::uint64_t mock_seed = 0;
    std::size_t max_payload_bytes = 8u << 20;
    std::size_t cache_capacity = 4096;
    std::ptrdiff_t max_in_flight = 8;

    /// Applies FUSION_ENCODER_MODE and FUSION_ENCODER_ENDPOINT when they are set.
    [[nodiscard]] EncoderConfig with_environment() const;

    /// Throws ValidationError on a non-positive timeout or dimension, or a remote config without endpoint.
    void validate() const;
};

class EncoderBackend {
 public:
    virtual ~EncoderBackend() = default;
    // Returns a raw (not necessarily normalized) vector.
    virtual std::vector<float> encode(const RawInput& input) = 0;
    [[nodiscard]] virtual bool healthy() = 0;
};

class MockEncoder final : public EncoderBackend {
 public:
    MockEncoder(std::size_t dimension, std::uint64_t seed) : dimension_(dimension), seed_(seed) {}
    std::vector<float> encode(const RawInput& input) override;
    bool healthy() override { return true; }

 private:
    std::size_t dimension_;
    std::uint64_t seed_;
};

class RemoteEncoder final : public EncoderBackend {
 public:
    RemoteEncoder(std::string endpoint, std::chrono::milliseconds timeout, std::size_t dimension);
    std::vector<float> encode(const RawInput& input) override;
    bool healthy() override;

 private:
    std::string origin_;  // scheme://host:port
    std::string path_;
    std::chrono::milliseconds timeout_;
    std::size_t dimension_;
};

class EncoderGateway {
 public:
    explicit EncoderGateway(EncoderConfig config);
    // Custom backend (tests); `config` still governs validation, dimension and caching.
    EncoderGateway(EncoderConfig config, std::unique_ptr<EncoderBackend> backend);

    /// Throws ValidationError / InputTooLargeError for invalid inputs, EncoderUnavailableError,
    /// EncoderProtocolError for bad backend replies.
    Embedding encode(const RawInput& input);

    /// Element-wise encode; the first failure is rethrown as BatchEncodeError carrying its index.
    std::vector<Embedding> encode_batch(std::span<const RawInput> inputs);

    [[nodiscard]] bool healthy();
    [[nodiscard]] const EncoderConfig& config() const noexcept { return config_; }

    // Number of requests that reached the backend (cache misses).
    [[nodiscard]] std::uint64_t backend_calls() const noexcept { return backend_calls_.load(); }
    [[nodiscard]] std::uint64_t cache_hits() const noexcept { return cache_hits_.load(); }

 private:
    void validate(const RawInput& input) const;
    std::optional<Embedding> cache_lookup(const std::string& key);
    void cache_store(const std::string& key, const Embedding& value);

    EncoderConfig config_;
    std::unique_ptr<EncoderBackend> backend_;
    std::counting_semaphore<> in_flight_;

    std::mutex cache_mutex_;
    std::list<std::pair<std::string, Embedding>> lru_;  // front = most recent
    std::unordered_map<std::string, std::list<std::pair<std::string, Embedding>>::iterator> cache_;

    std::atomic<std::uint64_t> backend_calls_{0};
    std::atomic<std::uint64_t> cache_hits_{0};
};

}  // namespace fusion
