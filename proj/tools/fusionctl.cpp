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

// fusionctl: import collections, run one-shot queries, benchmark the scan, serve the HTTP API.
//
// Exit codes: 0 ok, 1 usage error, 2 input not found, 3 catalog error, 4 weights cancel,
// 5 encoder failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <httplib.h>

#include "fusion/bench.hpp"
#include "fusion/catalog.hpp"
#include "fusion/encoder.hpp"
#include "fusion/error.hpp"
#include "fusion/service.hpp"

namespace fs = std::filesystem;

namespace {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kNotFound = 2,
    kCatalog = 3,
    kWeightsCancel = 4,
    kEncoder = 5,
};

std::string env_or(const char* name, std::string fallback) {
    const char* v = std::getenv(name);
    return v != nullptr && *v != '\0' ? std::string(v) : std::move(fallback);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw fusion::IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// "@file" reads whitespace-separated numbers from a file; otherwise a comma/space separated list.
std::vector<double> parse_embedding_arg(const std::string& arg) {
    std::string text = arg;
    if (!arg.empty() && arg.front() == '@') text = read_file(arg.substr(1));
    for (auto& c : text) {
        if (c == ',') c = ' ';
    }
    std::istringstream in(text);
    std::vector<double> values;
    std::string token;
    while (in >> token) {
        try {
            std::size_t used = 0;
            values.push_back(std::stod(token, &used));
            if (used != token.size()) throw std::invalid_argument(token);
        } catch (const std::exception&) {
            throw fusion::ValidationError("invalid number '" + token + "' in --embedding");
        }
    }
    if (values.empty()) throw fusion::ValidationError("--embedding is empty");
    return values;
}

struct EncoderFlags {
    std::string mode = "mock";
    std::string endpoint;
    std::uint64_t seed = 0;
    int timeout_ms = 5000;

    fusion::EncoderConfig config(std::size_t dimension) const {
        fusion::EncoderConfig c;
        c.mode = mode == "remote" ? fusion::EncoderMode::remote : fusion::EncoderMode::mock;
        c.endpoint = endpoint;
        c.mock_seed = seed;
        c.timeout = std::chrono::milliseconds(timeout_ms);
        c.dimension = dimension;
        return c;
    }
};

void add_encoder_flags(CLI::App* cmd, EncoderFlags& flags) {
    cmd->add_option("--encoder-mode", flags.mode, "mock or remote")
        ->check(CLI::IsMember({"mock", "remote"}))
        ->envname("FUSION_ENCODER_MODE")
        ->capture_default_str();
    cmd->add_option("--encoder-endpoint", flags.endpoint, "Remote encoder URL")->envname("FUSION_ENCODER_ENDPOINT");
    cmd->add_option("--mock-seed", flags.seed, "Seed of the mock encoder")->capture_default_str();
    cmd->add_option("--encoder-timeout-ms", flags.timeout_ms, "Remote encoder timeout")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
}

// --- import -------------------------------------------------------------------------------

struct ImportArgs {
    std::string input_dir;
    std::string collection_id;
    std::string render_style = "textured";
    std::string data_dir;
};

int cmd_import(const ImportArgs& args) {
    if (!fs::is_directory(args.input_dir)) {
        std::cerr << "error: input directory not found: " << args.input_dir << '\n';
        return kNotFound;
    }
    const auto style = fusion::parse_render_style(args.render_style);
    if (!style) {
        std::cerr << "error: unknown render style '" << args.render_style << "'\n";
        return kUsage;
    }
    if (fs::exists(fusion::manifest_path(args.data_dir, args.collection_id))) {
        std::cerr << "error: collection '" << args.collection_id << "' already exists in " << args.data_dir << '\n';
        return kCatalog;
    }
    try {
        const auto result = fusion::import_raw(args.input_dir, args.collection_id, *style, args.data_dir);
        std::cout << "imported collection '" << args.collection_id << "' (" << args.render_style << ", dimension "
                  << result.manifest.dimension << "): " << result.manifest.record_count << " records, "
                  << result.assets.size() << " assets\n";
        return kOk;
    } catch (const fusion::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kCatalog;
    }
}

// --- query --------------------------------------------------------------------------------

struct QueryArgs {
    std::string data_dir;
    std::string collection;
    int k = static_cast<int>(fusion::kDefaultTopK);
    std::vector<std::string> texts, images, sketches, embeddings;
    std::vector<double> weights;
    EncoderFlags encoder;
};

struct PendingInput {
    fusion::Modality modality;
    std::string value;
    double weight = 1.0;
};

int cmd_query(const QueryArgs& args, const std::vector<PendingInput>& pending) {
    if (args.k < 1 || args.k > static_cast<int>(fusion::kMaxTopK)) {
        std::cerr << "error: --k must be in [1, " << fusion::kMaxTopK << "]\n";
        return kUsage;
    }
    if (pending.empty()) {
        std::cerr << "error: at least one of --text/--image/--sketch/--embedding is required\n";
        return kUsage;
    }
    if (pending.size() > fusion::kMaxQueryInputs) {
        std::cerr << "error: at most " << fusion::kMaxQueryInputs << " inputs per query\n";
        return kUsage;
    }
    if (args.collection.empty()) {
        std::cerr << "error: --collection is required\n";
        return kUsage;
    }

    const auto manifest = fusion::manifest_path(args.data_dir, args.collection);
    if (!fs::exists(manifest)) {
        std::cerr << "error: collection '" << args.collection << "' not found in " << args.data_dir << '\n';
        return kNotFound;
    }

    try {
        auto loaded = fusion::read_collection(manifest);
        const std::size_t dim = loaded.manifest.dimension;
        const auto index = fusion::Index::build(std::move(loaded.records), dim);

        fusion::EncoderGateway gateway(args.encoder.config(dim));
        std::vector<fusion::WeightedInput> inputs;
        for (const auto& p : pending) {
            const std::string label = std::string(fusion::to_string(p.modality)) + ":" + p.value;
            if (p.modality == fusion::Modality::precomputed) {
                const auto values = parse_embedding_arg(p.value);
                if (values.size() != dim) {
                    throw fusion::DimensionMismatchError("--embedding has " + std::to_string(values.size()) +
                                                         " values, collection dimension is " + std::to_string(dim));
                }
                try {
                    inputs.push_back({fusion::normalize(std::span<const double>(values)), p.weight, p.modality, label});
                } catch (const fusion::ZeroNormError&) {
                    throw fusion::ValidationError("--embedding is a zero vector");
                }
                continue;
            }
            fusion::RawInput raw{p.modality, p.modality == fusion::Modality::text ? p.value : read_file(p.value), "",
                                 label};
            inputs.push_back({gateway.encode(raw), p.weight, p.modality, label});
        }

        const auto fused = fusion::fuse(inputs);
        const auto result = index.search(fused, static_cast<std::size_t>(args.k), args.collection);
        std::printf("rank\tasset_id\tscore\tbest_view\n");
        for (std::size_t i = 0; i < result.matches.size(); ++i) {
            const auto& m = result.matches[i];
            std::printf("%zu\t%s\t%.6f\t%s\n", i + 1, m.asset_id.c_str(), static_cast<double>(m.score),
                        m.best_view.c_str());
        }
        return kOk;
    } catch (const fusion::ZeroNormError& e) {
        std::cerr << "error: weights cancel: the weighted inputs sum to zero, adjust --weight values\n";
        return kWeightsCancel;
    } catch (const fusion::EncoderUnavailableError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kEncoder;
    } catch (const fusion::EncoderProtocolError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kEncoder;
    } catch (const fusion::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const fusion::InputTooLargeError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const fusion::DimensionMismatchError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const fusion::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNotFound;
    } catch (const fusion::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kCatalog;
    }
}

// Pairs each --weight with the input flag that precedes it on the command line.
std::vector<PendingInput> collect_inputs(CLI::App* query, const QueryArgs& args) {
    std::vector<PendingInput> out;
    std::size_t text_i = 0, image_i = 0, sketch_i = 0, emb_i = 0, weight_i = 0;
    for (const CLI::Option* opt : query->parse_order()) {
        const std::string name = opt->get_name();
        if (name == "--text") {
            out.push_back({fusion::Modality::text, args.texts.at(text_i++)});
        } else if (name == "--image") {
            out.push_back({fusion::Modality::image, args.images.at(image_i++)});
        } else if (name == "--sketch") {
            out.push_back({fusion::Modality::sketch, args.sketches.at(sketch_i++)});
        } else if (name == "--embedding") {
            out.push_back({fusion::Modality::precomputed, args.embeddings.at(emb_i++)});
        } else if (name == "--weight") {
            if (out.empty()) throw CLI::ValidationError("--weight", "must follow an input flag");
            out.back().weight = args.weights.at(weight_i++);
        }
    }
    return out;
}

// --- bench --------------------------------------------------------------------------------

int cmd_bench(const fusion::BenchConfig& config, bool as_json) {
    const auto report = fusion::run_bench(config);
    if (as_json) {
        std::cout << fusion::to_json(report).dump(2) << '\n';
        return kOk;
    }
    std::printf("bench: n=%zu dim=%zu queries=%zu k=%zu threads=%u seed=%llu simd=%s\n", config.n, config.dim,
                config.queries, config.k, config.threads, static_cast<unsigned long long>(config.seed),
                fusion::detail::simd_kernel_enabled() ? "avx2" : "scalar");
    std::printf("dataset checksum   %016llx\n", static_cast<unsigned long long>(report.dataset_checksum));
    std::printf("generate           %.1f ms\n", report.generate_ms);
    std::printf("build              %.1f ms\n", report.build_ms);
    std::printf("scan p50           %.3f ms\n", report.p50_ms);
    std::printf("scan p95           %.3f ms\n", report.p95_ms);
    std::printf("scan p99           %.3f ms\n", report.p99_ms);
    std::printf("scan mean          %.3f ms\n", report.mean_ms);
    std::printf("effective bw       %.2f GB/s\n", report.effective_gbps);
    std::printf("total              %.1f ms\n", report.total_ms);
    return kOk;
}

// --- serve --------------------------------------------------------------------------------

struct ServeArgs {
    std::string bind = "127.0.0.1";
    int port = 8080;
    std::string data_dir;
    std::string default_collection;
    std::size_t dimension = fusion::kDefaultDimension;
    EncoderFlags encoder;
};

int cmd_serve(const ServeArgs& args) {
    fusion::ServiceConfig config;
    config.data_dir = args.data_dir;
    config.default_collection = args.default_collection;
    config.encoder = args.encoder.config(args.dimension);
    try {
        fusion::Service service(config);
        httplib::Server server;
        service.install_routes(server);
        std::cout << "fusionctl serve: http://" << args.bind << ":" << args.port << " (data " << args.data_dir
                  << ", encoder " << args.encoder.mode << ")" << std::endl;
        if (!server.listen(args.bind, args.port)) {
            std::cerr << "error: cannot listen on " << args.bind << ":" << args.port << '\n';
            return kUsage;
        }
        return kOk;
    } catch (const fusion::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kCatalog;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fusionsearch: weighted multi-input embedding retrieval over 3D asset collections"};
    app.require_subcommand(1);
    const std::string default_data_dir = env_or("FUSION_DATA_DIR", "data");

    ImportArgs import_args;
    import_args.data_dir = default_data_dir;
    auto* import = app.add_subcommand("import", "Import a directory of <asset_id>__<view>.vec files");
    import->add_option("--input-dir", import_args.input_dir, "Directory of raw vectors")->required();
    import->add_option("--collection-id", import_args.collection_id, "New collection id")->required();
    import->add_option("--render-style", import_args.render_style, "textured, untextured or untextured_smoothed")
        ->capture_default_str();
    import->add_option("--data-dir", import_args.data_dir, "Catalog directory")->capture_default_str();

    QueryArgs query_args;
    query_args.data_dir = default_data_dir;
    query_args.collection = env_or("FUSION_DEFAULT_COLLECTION", "");
    auto* query = app.add_subcommand("query", "Run one weighted query and print the ranked matches");
    query->add_option("--data-dir", query_args.data_dir, "Catalog directory")->capture_default_str();
    query->add_option("--collection", query_args.collection, "Collection to search");
    query->add_option("--k", query_args.k, "Number of assets to return")->capture_default_str();
    query->add_option("--text", query_args.texts, "Text input (repeatable)");
    query->add_option("--image", query_args.images, "Image file input (repeatable)");
    query->add_option("--sketch", query_args.sketches, "Sketch file input (repeatable)");
    query->add_option("--embedding", query_args.embeddings, "Precomputed embedding: comma list or @file");
    query->add_option("--weight", query_args.weights, "Weight of the preceding input (default 1.0)");
    add_encoder_flags(query, query_args.encoder);

    fusion::BenchConfig bench_config;
    bool bench_json = false;
    auto* bench = app.add_subcommand("bench", "Benchmark the exact scan on a seeded random dataset");
    bench->add_option("--n", bench_config.n, "Number of stored vectors")->capture_default_str();
    bench->add_option("--dim", bench_config.dim, "Dimension")->check(CLI::PositiveNumber)->capture_default_str();
    bench->add_option("--queries", bench_config.queries, "Timed queries")->check(CLI::PositiveNumber)->capture_default_str();
    bench->add_option("--seed", bench_config.seed, "Dataset seed")->capture_default_str();
    bench->add_option("--k", bench_config.k, "Top-k per query")->check(CLI::PositiveNumber)->capture_default_str();
    bench->add_option("--threads", bench_config.threads, "Scan threads")->check(CLI::PositiveNumber)->capture_default_str();
    bench->add_option("--views", bench_config.views_per_asset, "Views per asset")->check(CLI::PositiveNumber)->capture_default_str();
    bench->add_flag("--json", bench_json, "Machine-readable output");

    ServeArgs serve_args;
    serve_args.data_dir = default_data_dir;
    serve_args.default_collection = env_or("FUSION_DEFAULT_COLLECTION", "");
    auto* serve = app.add_subcommand("serve", "Run the HTTP API");
    serve->add_option("--bind", serve_args.bind, "Bind address")->envname("FUSION_BIND")->capture_default_str();
    serve->add_option("--port", serve_args.port, "Port")->envname("FUSION_PORT")->capture_default_str();
    serve->add_option("--data-dir", serve_args.data_dir, "Catalog directory")->capture_default_str();
    serve->add_option("--default-collection", serve_args.default_collection, "Collection used when a query names none");
    serve->add_option("--dim", serve_args.dimension, "Embedding dimension")->check(CLI::PositiveNumber)->capture_default_str();
    add_encoder_flags(serve, serve_args.encoder);

    std::vector<PendingInput> pending;
    try {
        app.parse(argc, argv);
        if (query->parsed()) pending = collect_inputs(query, query_args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    if (import->parsed()) return cmd_import(import_args);
    if (query->parsed()) return cmd_query(query_args, pending);
    if (bench->parsed()) return cmd_bench(bench_config, bench_json);
    if (serve->parsed()) return cmd_serve(serve_args);
    return kUsage;
}
