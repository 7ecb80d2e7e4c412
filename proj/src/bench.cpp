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

#include "fusion/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "fusion/error.hpp"
#include "fusion/portable_random.hpp"

namespace fusion {

namespace {

using Clock = std::chrono::steady_clock;

double millis_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string view_name(std::size_t v) {
    switch (v) {
        case 0:
            return std::string(views::front);
        case 1:
            return std::string(views::back);
        case 2:
            return std::string(views::perspective);
        default:
            return "view" + std::to_string(v);
    }
}

std::vector<double> random_unit(PortableRng& rng, std::size_t dim) {
    std::vector<double> v(dim);
    double sq = 0.0;
    for (auto& x : v) {
        x = rng.normal();
        sq += x * x;
    }
    const double norm = std::sqrt(sq);
    for (auto& x : v) x /= norm;
    return v;
}

}  // namespace

std::vector<float> generate_bench_dataset(const BenchConfig& config) {
    if (config.dim == 0) throw ValidationError("bench dimension must be positive");
    PortableRng rng(mix64(config.seed));
    std::vector<float> matrix;
    matrix.reserve(config.n * config.dim);
    for (std::size_t i = 0; i < config.n; ++i) {
        const auto row = random_unit(rng, config.dim);
        for (double x : row) matrix.push_back(static_cast<float>(x));
    }
    return matrix;
}

double percentile(std::vector<double> samples, double p) {
    if (samples.empty()) return 0.0;
    std::sort(samples.begin(), samples.end());
    const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(samples.size())));
    return samples[std::clamp<std::size_t>(rank, 1, samples.size()) - 1];
}

BenchReport run_bench(const BenchConfig& config) {
    if (config.queries == 0) throw ValidationError("bench needs at least one query");
    if (config.k == 0) throw ValidationError("k must be at least 1");
    const std::size_t views_per_asset = std::max<std::size_t>(1, config.views_per_asset);
    const auto total_start = Clock::now();

    BenchReport report;
    report.config = config;

    auto start = Clock::now();
    std::vector<float> matrix = generate_bench_dataset(config);
    report.dataset_checksum = fnv1a64(std::span<const float>(matrix));
    report.generate_ms = millis_since(start);

    start = Clock::now();
    std::vector<ViewRecord> records;
    records.reserve(config.n);
    char asset[32];
    for (std::size_t i = 0; i < config.n; ++i) {
        std::snprintf(asset, sizeof asset, "asset%08zu", i / views_per_asset);
        const auto first = matrix.begin() + static_cast<std::ptrdiff_t>(i * config.dim);
        records.push_back(ViewRecord{asset, view_name(i % views_per_asset), "bench",
                                     Embedding::from_unit(std::vector<float>(first, first + static_cast<std::ptrdiff_t>(config.dim)),
                                                          1e-4),
                                     i});
    }
    std::vector<float>().swap(matrix);
    const Index index = Index::build(std::move(records), config.dim);
    report.build_ms = millis_since(start);

    // Queries fuse two random directions, the second with a random signed weight.
    PortableRng rng(mix64(config.seed ^ 0x5155455259ULL));
    const auto make_query = [&] {
        const auto a = random_unit(rng, config.dim);
        const auto b = random_unit(rng, config.dim);
        const double w = 2.0 * rng.uniform() - 1.0;
        std::vector<WeightedInput> inputs;
        inputs.push_back({normalize(std::span<const double>(a)), 1.0, Modality::precomputed, "a"});
        inputs.push_back({normalize(std::span<const double>(b)), w, Modality::precomputed, "b"});
        return fuse(inputs);
    };

    for (std::size_t i = 0; i < config.warmup; ++i) (void)index.search(make_query(), config.k, "bench", config.threads);

    report.latencies_ms.reserve(config.queries);
    for (std::size_t q = 0; q < config.queries; ++q) {
        const FusedQuery query = make_query();
        const auto result = index.search(query, config.k, "bench", config.threads);
        report.latencies_ms.push_back(static_cast<double>(result.scan_micros) / 1000.0);
    }

    report.p50_ms = percentile(report.latencies_ms, 50);
    report.p95_ms = percentile(report.latencies_ms, 95);
    report.p99_ms = percentile(report.latencies_ms, 99);
    report.max_ms = *std::max_element(report.latencies_ms.begin(), report.latencies_ms.end());
    report.mean_ms = std::accumulate(report.latencies_ms.begin(), report.latencies_ms.end(), 0.0) /
                     static_cast<double>(report.latencies_ms.size());
    const double bytes = static_cast<double>(config.n) * static_cast<double>(config.dim) * sizeof(float);
    report.effective_gbps = report.p50_ms > 0.0 ? bytes / (report.p50_ms * 1e6) : 0.0;
    report.total_ms = millis_since(total_start);
    return report;
}

nlohmann::json to_json(const BenchReport& report) {
    char checksum[17];
    std::snprintf(checksum, sizeof checksum, "%016llx", static_cast<unsigned long long>(report.dataset_checksum));
    return nlohmann::json{
        {"n", report.config.n},
        {"dim", report.config.dim},
        {"queries", report.config.queries},
        {"seed", report.config.seed},
        {"k", report.config.k},
        {"threads", report.config.threads},
        {"views_per_asset", report.config.views_per_asset},
        {"scan_ms", {{"p50", report.p50_ms}, {"p95", report.p95_ms}, {"p99", report.p99_ms}, {"mean", report.mean_ms},
                     {"max", report.max_ms}}},
        {"effective_gbps", report.effective_gbps},
        {"dataset_checksum", checksum},
        {"generate_ms", report.generate_ms},
        {"build_ms", report.build_ms},
        {"total_ms", report.total_ms},
    };
}

}  // namespace fusion
