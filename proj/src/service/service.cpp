#include "mrgen/service.hpp"

#include "mrgen/atlas.hpp"
#include "mrgen/errors.hpp"

#include "httplib.h"
#include "json.hpp"

#include <charconv>
#include <cmath>
#include <mutex>
#include <shared_mutex>
#include <thread>

namespace mrgen {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr double kLatentLimit = 3.0;
constexpr std::size_t kMaxGrid = 32;
constexpr std::size_t kMaxRes = 256;

struct BadRequest : Error {
    using Error::Error;
};

HttpReply json_reply(int status, const ordered_json& doc) { return {status, "application/json", doc.dump()}; }

HttpReply error_reply(int status, const std::string& message) {
    return json_reply(status, ordered_json{{"error", message}});
}

const std::string& require(const QueryParams& q, const std::string& key) {
    auto it = q.find(key);
    if (it == q.end() || it->second.empty()) throw BadRequest("missing parameter '" + key + "'");
    return it->second;
}

double parse_real(const QueryParams& q, const std::string& key) {
    const auto& text = require(q, key);
    double v = 0.0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || end != text.data() + text.size() || !std::isfinite(v)) {
        throw BadRequest("parameter '" + key + "' is not a finite number");
    }
    return v;
}

std::size_t parse_count(const QueryParams& q, const std::string& key, std::size_t lo, std::size_t hi) {
    const auto& text = require(q, key);
    std::size_t v = 0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || end != text.data() + text.size() || v < lo || v > hi) {
        throw BadRequest("parameter '" + key + "' must be an integer in [" + std::to_string(lo) + ", " +
                         std::to_string(hi) + "]");
    }
    return v;
}

struct HeatmapRequest {
    QualityMetric metric;
    DistanceSpec distance;
    std::size_t res;

    std::string key() const {
        return std::string(to_string(metric)) + "|" + distance.token() + "|" + std::to_string(res);
    }
};

HeatmapRequest parse_heatmap(const QueryParams& q) {
    try {
        HeatmapRequest r{parse_quality_metric(require(q, "metric")), {}, parse_count(q, "res", 2, kMaxRes)};
        const auto& distance = require(q, "distance");
        if (distance.find(':') != std::string::npos) {
            r.distance = DistanceSpec::parse(distance);
        } else {
            r.distance.metric = parse_metric(distance);
            auto it = q.find("variant");
            if (r.distance.metric != Metric::ShortestPath && it != q.end() && !it->second.empty())
                r.distance.variant = parse_variant(it->second);
        }
        return r;
    } catch (const BadRequest&) {
        throw;
    } catch (const Error& e) {
        throw BadRequest(e.what());
    }
}

} // namespace

std::string base64_encode(std::string_view bytes) {
    static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    for (std::size_t i = 0; i < bytes.size(); i += 3) {
        std::uint32_t v = std::uint32_t(static_cast<unsigned char>(bytes[i])) << 16;
        if (i + 1 < bytes.size()) v |= std::uint32_t(static_cast<unsigned char>(bytes[i + 1])) << 8;
        if (i + 2 < bytes.size()) v |= static_cast<unsigned char>(bytes[i + 2]);
        out.push_back(kAlphabet[(v >> 18) & 63]);
        out.push_back(kAlphabet[(v >> 12) & 63]);
        out.push_back(i + 1 < bytes.size() ? kAlphabet[(v >> 6) & 63] : '=');
        out.push_back(i + 2 < bytes.size() ? kAlphabet[v & 63] : '=');
    }
    return out;
}

bool is_local_origin(std::string_view origin) {
    for (std::string_view scheme : {"http://", "https://"}) {
        if (!origin.starts_with(scheme)) continue;
        auto host = origin.substr(scheme.size());
        for (std::string_view name : {"localhost", "127.0.0.1"}) {
            if (!host.starts_with(name)) continue;
            auto rest = host.substr(name.size());
            if (rest.empty()) return true;
            if (rest.front() != ':' || rest.size() == 1) return false;
            return std::all_of(rest.begin() + 1, rest.end(), [](char c) { return c >= '0' && c <= '9'; });
        }
    }
    return false;
}

struct Service::Impl {
    Impl(Graph g, Checkpoint ck, ServiceOptions opts)
        : graph(std::move(g)), a(adjacency(graph)), checkpoint(std::move(ck)), options(std::move(opts)),
          digest(hex_digest(checkpoint_digest(checkpoint))) {
        if (checkpoint.graph_digest != graph.digest() || checkpoint.model.config().n != graph.node_count()) {
            throw ValidationError("checkpoint was trained on graph " + hex_digest(checkpoint.graph_digest) +
                                  ", not " + hex_digest(graph.digest()));
        }
        auto degrees = a.row_sums();
        std::sort(degrees.begin(), degrees.end());
        degree_multiset = std::move(degrees);
    }

    HttpReply info() const {
        const auto& c = checkpoint.model.config();
        return json_reply(200, ordered_json{{"graph",
                                             {{"name", graph.name()},
                                              {"n", graph.node_count()},
                                              {"m", graph.edge_count()}}},
                                            {"decoder", to_string(c.decoder)},
                                            {"tau", c.tau},
                                            {"checkpoint_digest", digest}});
    }

    HttpReply decode_at(const QueryParams& q) const {
        const double x = parse_real(q, "x"), y = parse_real(q, "y");
        if (std::abs(x) > kLatentLimit || std::abs(y) > kLatentLimit) {
            throw BadRequest("latent point outside [-3, 3]^2");
        }
        const auto decoded = decode(checkpoint.model, a, {x, y});
        auto degrees = decoded.matrix.row_sums();
        std::sort(degrees.begin(), degrees.end());
        if (degrees != degree_multiset || !is_bijection(decoded.order.order())) {
            return error_reply(500, "decoded view failed the structure check");
        }
        return json_reply(200, ordered_json{{"z", {x, y}},
                                            {"order", decoded.order.order()},
                                            {"matrix_png_base64", base64_encode(render_matrix(decoded.matrix, 1))},
                                            {"edge_count", decoded.matrix.edge_count()}});
    }

    // Readers share the lock; a finished value is published under the
    // exclusive lock, so no reader sees a partial entry.
    template <class T, class Build>
    std::shared_ptr<const T> cached(std::map<std::string, std::shared_ptr<const T>>& entries, const std::string& key,
                                    Build&& build) const {
        {
            std::shared_lock lock(mutex);
            if (auto it = entries.find(key); it != entries.end()) return it->second;
        }
        auto value = std::make_shared<const T>(build());
        std::unique_lock lock(mutex);
        if (auto it = entries.find(key); it != entries.end()) return it->second;
        if (used < options.cache_limit) {
            entries.emplace(key, value);
            ++used;
        }
        return value;
    }

    std::shared_ptr<const AtlasGrid> grid(std::size_t k) const {
        return cached(grids, std::to_string(k),
                      [&] { return build_grid(checkpoint.model, a, k, options.thumbnail_scale, options.workers); });
    }

    HttpReply grid_manifest(const QueryParams& q) const {
        const auto k = parse_count(q, "k", 1, kMaxGrid);
        const auto g = grid(k);
        ordered_json cells = ordered_json::array();
        for (const auto& c : g->cells) {
            cells.push_back({{"row", c.row},
                             {"col", c.col},
                             {"z", {c.z[0], c.z[1]}},
                             {"order", c.order.order()},
                             {"url", "/api/grid/" + std::to_string(k) + "/" + cell_image_name(c.row, c.col)}});
        }
        return json_reply(200, ordered_json{{"k", k}, {"domain", {-1.0, 1.0}}, {"cells", std::move(cells)}});
    }

    HttpReply grid_image(std::string_view rest) const {
        const auto slash = rest.find('/');
        if (slash == std::string_view::npos) return error_reply(404, "not found");
        std::size_t k = 0;
        const auto ks = rest.substr(0, slash);
        const auto [end, ec] = std::from_chars(ks.data(), ks.data() + ks.size(), k);
        if (ec != std::errc() || end != ks.data() + ks.size() || k < 1 || k > kMaxGrid) {
            return error_reply(404, "not found");
        }
        const auto name = rest.substr(slash + 1);
        for (std::size_t r = 0; r < k; ++r)
            for (std::size_t c = 0; c < k; ++c)
                if (cell_image_name(r, c) == name) return {200, "image/png", grid(k)->cells[r * k + c].png};
        return error_reply(404, "not found");
    }

    std::shared_ptr<const MetricHeatmap> heatmap(const HeatmapRequest& r) const {
        return cached(heatmaps, r.key(), [&] {
            return build_heatmap(checkpoint.model, graph, r.metric, r.distance, r.res, options.workers);
        });
    }

    HttpReply route(std::string_view path, const QueryParams& q) const {
        if (path == "/api/info") return info();
        if (path == "/api/decode") return decode_at(q);
        if (path == "/api/grid") return grid_manifest(q);
        if (path.starts_with("/api/grid/")) return grid_image(path.substr(10));
        if (path == "/api/heatmap") return {200, "application/json", heatmap(parse_heatmap(q))->json()};
        if (path == "/api/heatmap.png") return {200, "image/png", heatmap(parse_heatmap(q))->png()};
        return error_reply(404, "not found: " + std::string(path));
    }

    Graph graph;
    AdjacencyMatrix a;
    Checkpoint checkpoint;
    ServiceOptions options;
    std::string digest;
    std::vector<std::size_t> degree_multiset;

    mutable std::shared_mutex mutex;
    mutable std::size_t used = 0;
    mutable std::map<std::string, std::shared_ptr<const AtlasGrid>> grids;
    mutable std::map<std::string, std::shared_ptr<const MetricHeatmap>> heatmaps;

    httplib::Server server;
    std::thread thread;
};

Service::Service(Graph graph, Checkpoint checkpoint, ServiceOptions options)
    : impl_(std::make_unique<Impl>(std::move(graph), std::move(checkpoint), std::move(options))) {}

Service::~Service() { stop(); }

HttpReply Service::handle(std::string_view path, const QueryParams& query) const {
    try {
        return impl_->route(path, query);
    } catch (const BadRequest& e) {
        return error_reply(400, e.what());
    } catch (const std::exception& e) {
        return error_reply(500, e.what());
    }
}

int Service::start(const std::string& host, int port) {
    auto& server = impl_->server;
    server.set_post_routing_handler([](const httplib::Request& req, httplib::Response& res) {
        const auto origin = req.get_header_value("Origin");
        if (is_local_origin(origin)) {
            res.set_header("Access-Control-Allow-Origin", origin);
            res.set_header("Vary", "Origin");
        }
    });
    server.Options(R"(/api/.*)", [](const httplib::Request& req, httplib::Response& res) {
        if (is_local_origin(req.get_header_value("Origin"))) {
            res.set_header("Access-Control-Allow-Methods", "GET, OPTIONS");
            res.set_header("Access-Control-Allow-Headers", "Content-Type");
        }
        res.status = 204;
    });
    server.Get(R"(/api/.*)", [this](const httplib::Request& req, httplib::Response& res) {
        QueryParams query;
        for (const auto& [k, v] : req.params) query.emplace(k, v);
        auto reply = handle(req.path, query);
        res.status = reply.status;
        res.set_content(std::move(reply.body), reply.content_type);
    });
    if (!impl_->options.static_dir.empty() && !server.set_mount_point("/", impl_->options.static_dir)) {
        throw ValidationError("static directory '" + impl_->options.static_dir + "' does not exist");
    }
    server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
        if (res.status == 404 && res.body.empty()) {
            res.set_content(ordered_json{{"error", "not found: " + req.path}}.dump(), "application/json");
        }
    });

    const int bound = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
    impl_->thread = std::thread([&server] { server.listen_after_bind(); });
    server.wait_until_ready();
    return bound;
}

void Service::wait() {
    if (impl_->thread.joinable()) impl_->thread.join();
}

void Service::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

std::size_t Service::cache_size() const {
    std::shared_lock lock(impl_->mutex);
    return impl_->used;
}

} // namespace mrgen
