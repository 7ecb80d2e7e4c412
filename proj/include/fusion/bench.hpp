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

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "fusion/index.hpp"

namespace fusion {

struct BenchConfig {
    std::size_t n = 100000;
    std::size_t dim = kDefaultDimension;
    std::size_t queries = 100;
    std::uint64_t seed = 42;
    std::size_t k = kDefaultTopK;
    unsigned threads = 1;
    std::size_t views_per_asset = 3;
    // Untimed queries run before measurement.
    std::size_t warmup = 3;
};

struct BenchReport {
    BenchConfig config;
    double p50_ms = 0.0;
    double p95_ms = 0.0;
    double p99_ms = 0.0;
    double mean_ms = 0.0;
    double max_ms = 0.0;
    // Bytes of the scanned matrix divided by the p50 latency.
    double effective_gbps = 0.0;
    std::uint64_t dataset_checksum = 0;
    double generate_ms = 0.0;
    double build_ms = 0.0;
    double total_ms = 0.0;
    std::vector<double> latencies_ms;
};

/// Seeded dataset: n unit vectors (SplitMix64 + polar normals, normalized), grouped into assets
/// of `views_per_asset` consecutive rows. Returns the packed row-major matrix.
std::vector<float> generate_bench_dataset(const BenchConfig& config);

/// Nearest-rank percentile of unsorted samples.
double percentile(std::vector<double> samples, double p);

/// Generates the dataset, builds an index and times `queries` random fused queries. Only the
/// index search (scan, dedup, top-k) is timed.
BenchReport run_bench(const BenchConfig& config);

nlohmann::json to_json(const BenchReport& report);

}  // namespace fusion
