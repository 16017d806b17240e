#pragma once

#include "mrgen/graph.hpp"
#include "mrgen/training.hpp"

#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <string_view>

namespace mrgen {

struct ServiceOptions {
    /// Directory served at "/" (the built UI bundle); empty disables the route.
    std::string static_dir;
    std::size_t workers = 1;
    /// Cached grids plus heatmaps; once full, results are computed but not kept.
    std::size_t cache_limit = 64;
    std::size_t thumbnail_scale = 4;
};

struct HttpReply {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
};

using QueryParams = std::map<std::string, std::string, std::less<>>;

/// Read-only HTTP API over one checkpoint:
///   GET /api/info
///   GET /api/decode?x=&y=
///   GET /api/grid?k=            and /api/grid/<k>/<cell image name>
///   GET /api/heatmap?metric=&distance=&variant=&res=   and /api/heatmap.png
class Service {
public:
    Service(Graph graph, Checkpoint checkpoint, ServiceOptions options = {});
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Routes one GET request. Safe to call concurrently.
    HttpReply handle(std::string_view path, const QueryParams& query) const;

    /// Binds host:port (0 picks a free port) and serves on a background
    /// thread. Returns the bound port.
    int start(const std::string& host, int port);
    /// Blocks until stop() is called.
    void wait();
    void stop();

    std::size_t cache_size() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::string base64_encode(std::string_view bytes);

/// True for http(s)://localhost[:port] and http(s)://127.0.0.1[:port].
bool is_local_origin(std::string_view origin);

} // namespace mrgen
