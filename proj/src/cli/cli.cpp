#include "mrgen/cli.hpp"

#include "mrgen/atlas.hpp"
#include "mrgen/dataset.hpp"
#include "mrgen/errors.hpp"
#include "mrgen/parallel.hpp"
#include "mrgen/service.hpp"
#include "mrgen/training.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <csignal>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace mrgen::cli {

namespace {

using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'");
    out << bytes;
    if (!out) throw Error("failed writing '" + path + "'");
}

std::string file_digest(const std::string& path) { return hex_digest(fnv1a(read_file(path))); }

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::stringstream in(text);
    for (std::string item; std::getline(in, item, sep);)
        if (!item.empty()) out.push_back(item);
    return out;
}

std::uint64_t parse_u64(const std::string& text) {
    std::uint64_t v = 0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || end != text.data() + text.size()) throw ValidationError("'" + text + "' is not a seed");
    return v;
}

/// "1,2,7-9" -> {1, 2, 7, 8, 9}
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> out;
    for (const auto& item : split(text, ',')) {
        if (const auto dash = item.find('-'); dash != std::string::npos && dash > 0) {
            const auto lo = parse_u64(item.substr(0, dash)), hi = parse_u64(item.substr(dash + 1));
            if (hi < lo || hi - lo >= 100000) throw ValidationError("bad seed range '" + item + "'");
            for (auto s = lo; s <= hi; ++s) out.push_back(s);
        } else {
            out.push_back(parse_u64(item));
        }
    }
    if (out.empty()) throw ValidationError("no seeds given");
    return out;
}

std::vector<Method> parse_methods(const std::string& text) {
    if (text == "all") return {kAllMethods.begin(), kAllMethods.end()};
    std::vector<Method> out;
    for (const auto& item : split(text, ',')) out.push_back(parse_method(item));
    if (out.empty()) throw ValidationError("no methods given");
    return out;
}

std::vector<DistanceSpec> parse_distances(const std::string& text) {
    if (text == "all") return all_distance_specs();
    std::vector<DistanceSpec> out;
    for (const auto& item : split(text, ',')) out.push_back(DistanceSpec::parse(item));
    if (out.empty()) throw ValidationError("no distances given");
    return out;
}

LatentPoint parse_z(const std::string& text) {
    const auto parts = split(text, ',');
    if (parts.size() != 2) throw ValidationError("--z expects x,y");
    LatentPoint z{};
    for (int i = 0; i < 2; ++i) {
        const auto& s = parts[i];
        const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), z[i]);
        if (ec != std::errc() || end != s.data() + s.size() || !std::isfinite(z[i])) {
            throw ValidationError("--z component '" + s + "' is not a finite number");
        }
    }
    return z;
}

DistanceSpec parse_distance_flags(const std::string& distance, const std::string& variant) {
    if (distance.find(':') != std::string::npos) return DistanceSpec::parse(distance);
    DistanceSpec spec;
    spec.metric = parse_metric(distance);
    if (spec.metric != Metric::ShortestPath) spec.variant = parse_variant(variant);
    return spec;
}

struct Manifest {
    std::string path;
    ordered_json doc;

    Manifest(const std::string& command, const std::vector<std::string>& args) {
        doc["command"] = command;
        doc["arguments"] = std::vector<std::string>(args.begin() + 1, args.end());
        doc["seeds"] = ordered_json::object();
        doc["started"] = utc_now();
        doc["inputs"] = ordered_json::object();
        doc["outputs"] = ordered_json::object();
    }
    void input(const std::string& file) { doc["inputs"][file] = file_digest(file); }
    void output(const std::string& file) { doc["outputs"][file] = file_digest(file); }
    void log(const std::string& file) { doc["logs"].push_back(file); }
    void write() {
        doc["finished"] = utc_now();
        write_file(path, doc.dump(2) + "\n");
    }
};

struct ModelFlags {
    std::string decoder = "sinkhorn";
    ModelConfig config;

    void add(CLI::App* app) {
        app->add_option("--decoder", decoder, "sinkhorn | softsort")->capture_default_str();
        app->add_option("--epochs", config.epochs)->capture_default_str();
        app->add_option("--lr", config.learning_rate)->capture_default_str();
        app->add_option("--tau", config.tau)->capture_default_str();
        app->add_option("--lambda", config.lambda)->capture_default_str();
        app->add_option("--batch", config.batch_size)->capture_default_str();
        app->add_option("--seed", config.seed)->capture_default_str();
        app->add_option("--sinkhorn-iters", config.sinkhorn_iters)->capture_default_str();
        app->add_option("--projections", config.sw_projections, "sliced-Wasserstein directions")
            ->capture_default_str();
    }
    ModelConfig resolve(const Graph& g) {
        config.n = g.node_count();
        config.decoder = parse_decoder(decoder);
        config.validate();
        return config;
    }
};

std::atomic<Service*> g_serving{nullptr};

void stop_serving(int) {
    if (auto* s = g_serving.load()) s->stop();
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Matrix reordering corpus, generative model and latent atlas", "mrgen"};
    app.require_subcommand(1);
    std::string manifest_path;
    std::size_t workers = default_workers();

    auto common = [&](CLI::App* sub) {
        sub->add_option("--manifest", manifest_path, "run manifest path");
        sub->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    };

    // dataset
    std::string graph_path, dataset_path, checkpoint_path, out_path;
    std::string methods = "all", distances = "all", seeds = "1-20";
    std::size_t subsample_count = 0;
    std::uint64_t subsample_seed = 0;
    auto* dataset_cmd = app.add_subcommand("dataset", "graph -> JSON-lines reordering corpus");
    dataset_cmd->add_option("graph", graph_path, "edge list")->required();
    dataset_cmd->add_option("--methods", methods, "comma list or 'all'")->capture_default_str();
    dataset_cmd->add_option("--distances", distances, "metric:variant list, 'shortestpath' or 'all'")
        ->capture_default_str();
    dataset_cmd->add_option("--seeds", seeds, "comma list with a-b ranges")->capture_default_str();
    dataset_cmd->add_option("--subsample", subsample_count, "keep this many records (0 keeps all)");
    dataset_cmd->add_option("--subsample-seed", subsample_seed)->capture_default_str();
    dataset_cmd->add_option("--out", out_path)->required();
    common(dataset_cmd);

    // train
    ModelFlags model_flags;
    std::string history_path;
    std::size_t log_every = 50;
    auto* train_cmd = app.add_subcommand("train", "corpus -> checkpoint");
    train_cmd->add_option("graph", graph_path)->required();
    train_cmd->add_option("dataset", dataset_path)->required();
    model_flags.add(train_cmd);
    train_cmd->add_option("--out", out_path, "checkpoint path")->required();
    train_cmd->add_option("--history", history_path, "loss CSV (default <out>.history.csv)");
    train_cmd->add_option("--log-every", log_every, "epochs between progress lines (0 silences)");
    common(train_cmd);

    // evaluate
    EvaluateOptions eval;
    auto* eval_cmd = app.add_subcommand("evaluate", "repeated k-fold cross-validation -> CSV");
    eval_cmd->add_option("graph", graph_path)->required();
    eval_cmd->add_option("dataset", dataset_path)->required();
    model_flags.add(eval_cmd);
    eval_cmd->add_option("--folds", eval.folds)->capture_default_str();
    eval_cmd->add_option("--trials", eval.trials)->capture_default_str();
    eval_cmd->add_option("--first-trial-seed", eval.first_trial_seed)->capture_default_str();
    eval_cmd->add_option("--out", out_path, "report CSV")->required();
    common(eval_cmd);

    // grid
    std::size_t k = 8, scale = 4;
    auto* grid_cmd = app.add_subcommand("grid", "checkpoint -> k x k PNG grid and manifest");
    grid_cmd->add_option("graph", graph_path)->required();
    grid_cmd->add_option("checkpoint", checkpoint_path)->required();
    grid_cmd->add_option("--k", k)->capture_default_str()->check(CLI::Range(1, 1024));
    grid_cmd->add_option("--scale", scale, "pixels per cell")->capture_default_str()->check(CLI::Range(1, 64));
    grid_cmd->add_option("--out", out_path, "output directory")->required();
    common(grid_cmd);

    // heatmap
    std::string metric = "ar", distance = "shortestpath", variant = "raw";
    std::size_t res = 16;
    auto* heatmap_cmd = app.add_subcommand("heatmap", "checkpoint -> quality-metric heatmap JSON and PNG");
    heatmap_cmd->add_option("graph", graph_path)->required();
    heatmap_cmd->add_option("checkpoint", checkpoint_path)->required();
    heatmap_cmd->add_option("--metric", metric, "ar | bar | cor")->capture_default_str();
    heatmap_cmd->add_option("--distance", distance)->capture_default_str();
    heatmap_cmd->add_option("--variant", variant, "raw | selfloops")->capture_default_str();
    heatmap_cmd->add_option("--res", res)->capture_default_str()->check(CLI::Range(2, 4096));
    heatmap_cmd->add_option("--out", out_path, "output prefix")->required();
    common(heatmap_cmd);

    // decode
    std::string z_text;
    auto* decode_cmd = app.add_subcommand("decode", "checkpoint + latent point -> order JSON and PNG");
    decode_cmd->add_option("graph", graph_path)->required();
    decode_cmd->add_option("checkpoint", checkpoint_path)->required();
    decode_cmd->add_option("--z", z_text, "x,y")->required();
    decode_cmd->add_option("--scale", scale, "pixels per cell")->capture_default_str()->check(CLI::Range(1, 64));
    decode_cmd->add_option("--out", out_path, "output prefix")->required();
    common(decode_cmd);

    // serve
    std::string host = "127.0.0.1", static_dir;
    int port = 8080;
    auto* serve_cmd = app.add_subcommand("serve", "checkpoint -> HTTP API");
    serve_cmd->add_option("graph", graph_path)->required();
    serve_cmd->add_option("checkpoint", checkpoint_path)->required();
    serve_cmd->add_option("--port", port)->capture_default_str()->check(CLI::Range(0, 65535));
    serve_cmd->add_option("--host", host)->capture_default_str();
    serve_cmd->add_option("--static", static_dir, "UI bundle directory served at /");
    common(serve_cmd);

    // replay
    std::string replay_path;
    auto* replay_cmd = app.add_subcommand("replay", "re-run a manifest and compare output digests");
    replay_cmd->add_option("manifest", replay_path)->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return 0;
        }
        app.exit(e, out, err);
        return 2;
    }

    try {
        if (replay_cmd->parsed()) {
            const auto recorded = ordered_json::parse(read_file(replay_path));
            std::vector<std::string> again{args.front()};
            for (const auto& a : recorded.at("arguments")) again.push_back(a.get<std::string>());
            if (const int code = run(again, out, err); code != 0) return code;
            int mismatches = 0;
            for (const auto& [file, digest] : recorded.at("outputs").items()) {
                const auto now = file_digest(file);
                if (now != digest.get<std::string>()) {
                    err << "mismatch: " << file << " " << digest.get<std::string>() << " -> " << now << "\n";
                    ++mismatches;
                }
            }
            if (mismatches) return 1;
            out << "replay reproduced " << recorded.at("outputs").size() << " outputs\n";
            return 0;
        }

        const auto graph = read_edge_list_file(graph_path);
        auto* sub = app.get_subcommands().front();
        Manifest manifest(sub->get_name(), args);
        manifest.input(graph_path);

        if (sub == dataset_cmd) {
            const auto seed_list = parse_seeds(seeds);
            BuildReport report;
            auto dataset = build_dataset(graph, parse_methods(methods), parse_distances(distances), seed_list,
                                         &report, workers);
            out << "jobs " << report.jobs << ", records " << report.raw_records << ", unique " << dataset.size()
                << ", failed " << report.failures.size() << "\n";
            for (const auto& f : report.failures) err << "job failed: " << f << "\n";
            if (subsample_count > 0) {
                dataset = subsample(dataset, subsample_count, subsample_seed);
                out << "kept " << dataset.size() << " records\n";
            }
            write_dataset(dataset, out_path);
            manifest.doc["seeds"] = {{"seeds", seed_list}, {"subsample_seed", subsample_seed}};
            manifest.doc["summary"] = {{"jobs", report.jobs},
                                       {"raw_records", report.raw_records},
                                       {"failures", report.failures.size()},
                                       {"records", dataset.size()}};
            manifest.output(out_path);
            manifest.path = manifest_path.empty() ? out_path + ".manifest.json" : manifest_path;
        } else if (sub == train_cmd) {
            const auto dataset = read_dataset(dataset_path);
            manifest.input(dataset_path);
            const auto config = model_flags.resolve(graph);
            TrainOptions opts;
            opts.on_epoch = [&](const EpochLog& log) {
                if (log_every && (log.epoch % log_every == 0 || log.epoch == 1)) {
                    out << "epoch " << log.epoch << " L_X " << log.reconstruction << " L_Z " << log.latent << "\n";
                }
            };
            const auto result = train(graph, dataset, config, opts);
            save_checkpoint(result.checkpoint, out_path);
            const auto history = history_path.empty() ? out_path + ".history.csv" : history_path;
            write_file(history, history_csv(result.history));
            manifest.doc["seeds"] = {{"model", config.seed}};
            manifest.output(out_path);
            manifest.log(history);
            manifest.path = manifest_path.empty() ? out_path + ".manifest.json" : manifest_path;
        } else if (sub == eval_cmd) {
            const auto dataset = read_dataset(dataset_path);
            manifest.input(dataset_path);
            const auto config = model_flags.resolve(graph);
            eval.on_fold = [&](const FoldResult& f) {
                out << "trial " << f.trial << " fold " << f.fold << " train " << f.train_error << " test "
                    << f.test_error << "\n";
            };
            const auto report = evaluate(graph, dataset, config, eval);
            write_file(out_path, report.csv());
            out << "mean held-out error " << report.grand_mean << "\n";
            std::vector<std::uint64_t> trial_seeds;
            for (std::size_t t = 0; t < eval.trials; ++t) trial_seeds.push_back(eval.first_trial_seed + t);
            manifest.doc["seeds"] = {{"model", config.seed}, {"trials", trial_seeds}};
            manifest.output(out_path);
            manifest.path = manifest_path.empty() ? out_path + ".manifest.json" : manifest_path;
        } else {
            const auto checkpoint = load_checkpoint(checkpoint_path, graph);
            manifest.input(checkpoint_path);
            const auto a = adjacency(graph);
            if (sub == grid_cmd) {
                const auto grid = build_grid(checkpoint.model, a, k, scale, workers);
                fs::create_directories(out_path);
                for (const auto& cell : grid.cells) {
                    const auto file = (fs::path(out_path) / cell_image_name(cell.row, cell.col)).string();
                    write_file(file, cell.png);
                    manifest.output(file);
                }
                const auto index = (fs::path(out_path) / "manifest.json").string();
                write_file(index, grid.manifest_json() + "\n");
                manifest.output(index);
                out << grid.cells.size() << " views written to " << out_path << "\n";
                manifest.path =
                    manifest_path.empty() ? (fs::path(out_path) / "run.manifest.json").string() : manifest_path;
            } else if (sub == heatmap_cmd) {
                const auto spec = parse_distance_flags(distance, variant);
                const auto h = build_heatmap(checkpoint.model, graph, parse_quality_metric(metric), spec, res, workers);
                write_file(out_path + ".json", h.json() + "\n");
                write_file(out_path + ".png", h.png());
                manifest.output(out_path + ".json");
                manifest.output(out_path + ".png");
                const auto [lo, hi] = std::minmax_element(h.raw.begin(), h.raw.end());
                out << res << "x" << res << " " << metric << " heatmap, raw range [" << *lo << ", " << *hi << "]\n";
                manifest.path = manifest_path.empty() ? out_path + ".manifest.json" : manifest_path;
            } else if (sub == decode_cmd) {
                const auto z = parse_z(z_text);
                const auto decoded = decode(checkpoint.model, a, z);
                ordered_json doc{{"z", {z[0], z[1]}},
                                 {"order", decoded.order.order()},
                                 {"edge_count", decoded.matrix.edge_count()}};
                write_file(out_path + ".json", doc.dump() + "\n");
                write_file(out_path + ".png", render_matrix(decoded.matrix, scale));
                manifest.output(out_path + ".json");
                manifest.output(out_path + ".png");
                out << doc.dump() << "\n";
                manifest.path = manifest_path.empty() ? out_path + ".manifest.json" : manifest_path;
            } else if (sub == serve_cmd) {
                manifest.path = manifest_path.empty() ? checkpoint_path + ".serve.manifest.json" : manifest_path;
                manifest.doc["listen"] = {{"host", host}, {"port", port}};
                manifest.write();
                ServiceOptions options;
                options.static_dir = static_dir;
                options.workers = workers;
                Service service(graph, checkpoint, options);
                const int bound = service.start(host, port);
                out << "serving " << graph.name() << " on http://" << host << ":" << bound << "\n" << std::flush;
                g_serving = &service;
                std::signal(SIGINT, stop_serving);
                std::signal(SIGTERM, stop_serving);
                service.wait();
                g_serving = nullptr;
                return 0;
            }
        }
        manifest.write();
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace mrgen::cli
