#include "mrgen/graph.hpp"

#include "mrgen/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace mrgen {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

bool parse_index(std::string_view token, std::size_t& out) {
    if (token.empty()) return false;
    const auto* end = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(token.data(), end, out);
    return ec == std::errc{} && ptr == end;
}

} // namespace

Graph::Graph(std::size_t n, std::vector<Edge> edges, std::string name)
    : n_(n), name_(std::move(name)) {
    for (auto& [u, v] : edges) {
        if (u == v) throw ValidationError("self-loop on node " + std::to_string(u));
        if (u >= n || v >= n) {
            throw ValidationError("edge (" + std::to_string(u) + "," + std::to_string(v) +
                                  ") out of range for n=" + std::to_string(n));
        }
        if (u > v) std::swap(u, v);
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    edges_ = std::move(edges);
}

std::vector<std::size_t> Graph::degrees() const {
    std::vector<std::size_t> deg(n_, 0);
    for (const auto& [u, v] : edges_) {
        ++deg[u];
        ++deg[v];
    }
    return deg;
}

std::vector<std::vector<std::size_t>> Graph::neighbors() const {
    std::vector<std::vector<std::size_t>> adj(n_);
    for (const auto& [u, v] : edges_) {
        adj[u].push_back(v);
        adj[v].push_back(u);
    }
    for (auto& list : adj) std::sort(list.begin(), list.end());
    return adj;
}

std::string Graph::to_edge_list() const {
    std::string out = "# nodes: " + std::to_string(n_) + "\n";
    for (const auto& [u, v] : edges_) {
        out += std::to_string(u);
        out += ' ';
        out += std::to_string(v);
        out += '\n';
    }
    return out;
}

std::uint64_t Graph::digest() const { return fnv1a(to_edge_list()); }

Graph parse_edge_list(std::string_view text, std::string name) {
    std::vector<Edge> edges;
    std::size_t n = 0;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = trim(text.substr(0, nl));
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (line.empty()) continue;
        if (line.front() == '#') {
            auto body = trim(line.substr(1));
            constexpr std::string_view key = "nodes:";
            if (body.starts_with(key)) {
                std::size_t k = 0;
                if (!parse_index(trim(body.substr(key.size())), k)) {
                    throw ParseError(line_no, "malformed node-count header");
                }
                n = std::max(n, k);
            }
            continue;
        }
        const auto sep = line.find_first_of(" \t");
        if (sep == std::string_view::npos) throw ParseError(line_no, "expected two node ids");
        std::size_t u = 0, v = 0;
        if (!parse_index(line.substr(0, sep), u) || !parse_index(trim(line.substr(sep)), v)) {
            throw ParseError(line_no, "malformed token in '" + std::string(line) + "'");
        }
        if (u == v) {
            throw ValidationError("line " + std::to_string(line_no) + ": self-loop on node " +
                                  std::to_string(u));
        }
        n = std::max({n, u + 1, v + 1});
        edges.emplace_back(u, v);
    }
    return Graph(n, std::move(edges), std::move(name));
}

Graph read_edge_list_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open graph file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    auto stem = path.substr(path.find_last_of('/') + 1);
    stem = stem.substr(0, stem.find('.'));
    return parse_edge_list(buf.str(), stem);
}

Graph path_graph(std::size_t n) {
    std::vector<Edge> edges;
    for (std::size_t i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
    return Graph(n, std::move(edges), "path" + std::to_string(n));
}

Graph complete_graph(std::size_t n) {
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) edges.emplace_back(i, j);
    return Graph(n, std::move(edges), "K" + std::to_string(n));
}

// ---------------------------------------------------------------------------

bool is_bijection(std::span<const std::size_t> order) {
    std::vector<bool> seen(order.size(), false);
    for (auto v : order) {
        if (v >= order.size() || seen[v]) return false;
        seen[v] = true;
    }
    return true;
}

Permutation::Permutation(std::vector<std::size_t> order) : order_(std::move(order)) {
    if (!is_bijection(order_)) throw ValidationError("order is not a bijection");
}

Permutation Permutation::identity(std::size_t n) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    return Permutation(std::move(order));
}

Permutation Permutation::from_matrix(std::span<const double> cells, std::size_t n) {
    if (cells.size() != n * n) throw DimensionError("permutation matrix must be n x n");
    std::vector<std::size_t> order(n);
    std::vector<int> column_hits(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        int row_hits = 0;
        for (std::size_t j = 0; j < n; ++j) {
            const double c = cells[i * n + j];
            if (c == 1.0) {
                ++row_hits;
                ++column_hits[j];
                order[i] = j;
            } else if (c != 0.0) {
                throw ValidationError("permutation matrix entries must be 0 or 1");
            }
        }
        if (row_hits != 1) throw ValidationError("row " + std::to_string(i) + " needs exactly one 1");
    }
    for (std::size_t j = 0; j < n; ++j) {
        if (column_hits[j] != 1) throw ValidationError("column " + std::to_string(j) + " needs exactly one 1");
    }
    return Permutation(std::move(order));
}

Permutation Permutation::inverse() const {
    std::vector<std::size_t> inv(order_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) inv[order_[i]] = i;
    return Permutation(std::move(inv));
}

Permutation Permutation::reversed() const {
    return Permutation(std::vector<std::size_t>(order_.rbegin(), order_.rend()));
}

std::vector<double> Permutation::to_matrix() const {
    const auto n = order_.size();
    std::vector<double> m(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) m[i * n + order_[i]] = 1.0;
    return m;
}

Permutation compose(const Permutation& outer, const Permutation& inner) {
    if (outer.size() != inner.size()) throw DimensionError("compose: size mismatch");
    std::vector<std::size_t> r(inner.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = outer[inner[i]];
    return Permutation(std::move(r));
}

// ---------------------------------------------------------------------------

std::string_view to_string(MatrixVariant v) {
    return v == MatrixVariant::Raw ? "raw" : "selfloops";
}

MatrixVariant parse_variant(std::string_view token) {
    if (token == "raw") return MatrixVariant::Raw;
    if (token == "selfloops") return MatrixVariant::SelfLoops;
    throw ValidationError("unknown matrix variant '" + std::string(token) + "'");
}

AdjacencyMatrix::AdjacencyMatrix(std::size_t n, std::vector<std::uint8_t> cells, MatrixVariant variant)
    : n_(n), cells_(std::move(cells)), variant_(variant) {
    if (cells_.size() != n * n) throw DimensionError("adjacency cells must be n x n");
    for (std::size_t i = 0; i < n; ++i) {
        const auto diag = cells_[i * n + i];
        if (diag != (variant == MatrixVariant::SelfLoops ? 1 : 0)) {
            throw ValidationError("diagonal inconsistent with matrix variant");
        }
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto c = cells_[i * n + j];
            if (c > 1) throw ValidationError("adjacency cells must be 0 or 1");
            if (c != cells_[j * n + i]) throw ValidationError("adjacency matrix is not symmetric");
        }
    }
}

std::size_t AdjacencyMatrix::ones() const {
    return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), std::uint8_t{1}));
}

std::size_t AdjacencyMatrix::edge_count() const {
    const std::size_t diag = variant_ == MatrixVariant::SelfLoops ? n_ : 0;
    return (ones() - diag) / 2;
}

std::vector<std::size_t> AdjacencyMatrix::row_sums() const {
    std::vector<std::size_t> sums(n_, 0);
    for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t j = 0; j < n_; ++j) sums[i] += cells_[i * n_ + j];
    return sums;
}

std::vector<double> AdjacencyMatrix::to_real() const {
    return std::vector<double>(cells_.begin(), cells_.end());
}

AdjacencyMatrix adjacency(const Graph& g, MatrixVariant variant) {
    const auto n = g.node_count();
    std::vector<std::uint8_t> cells(n * n, 0);
    for (const auto& [u, v] : g.edges()) {
        cells[u * n + v] = 1;
        cells[v * n + u] = 1;
    }
    if (variant == MatrixVariant::SelfLoops) {
        for (std::size_t i = 0; i < n; ++i) cells[i * n + i] = 1;
    }
    return AdjacencyMatrix(n, std::move(cells), variant);
}

AdjacencyMatrix reorder(const AdjacencyMatrix& a, const Permutation& p) {
    const auto n = a.size();
    if (p.size() != n) {
        throw DimensionError("reorder: permutation of size " + std::to_string(p.size()) +
                             " for matrix of size " + std::to_string(n));
    }
    std::vector<std::uint8_t> cells(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto src = a.row(p[i]);
        for (std::size_t j = 0; j < n; ++j) cells[i * n + j] = src[p[j]];
    }
    return AdjacencyMatrix(n, std::move(cells), a.variant());
}

bool matrices_equal(const AdjacencyMatrix& a, const AdjacencyMatrix& b) {
    if (a.size() != b.size()) throw DimensionError("matrices_equal: size mismatch");
    return a.cells() == b.cells();
}

std::string write_pgm(const AdjacencyMatrix& a, std::size_t scale) {
    if (scale == 0) throw ValidationError("scale must be >= 1");
    const auto side = a.size() * scale;
    std::string out = "P5\n" + std::to_string(side) + " " + std::to_string(side) + "\n255\n";
    out.reserve(out.size() + side * side);
    for (std::size_t y = 0; y < side; ++y)
        for (std::size_t x = 0; x < side; ++x)
            out.push_back(a(y / scale, x / scale) ? '\0' : '\xff');
    return out;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex_digest(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

std::uint64_t parse_hex_digest(std::string_view text) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v, 16);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ValidationError("malformed digest '" + std::string(text) + "'");
    }
    return v;
}

} // namespace mrgen
