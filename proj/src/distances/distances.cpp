#include "mrgen/distances.hpp"

#include "mrgen/errors.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace mrgen {

DistanceMatrix::DistanceMatrix(std::size_t n, std::vector<double> cells)
    : n_(n), cells_(std::move(cells)) {
    if (cells_.size() != n * n) throw DimensionError("distance cells must be n x n");
    for (std::size_t i = 0; i < n; ++i) {
        if (cells_[i * n + i] != 0.0) throw ValidationError("distance diagonal must be zero");
        for (std::size_t j = 0; j < n; ++j) {
            const double d = cells_[i * n + j];
            if (!std::isfinite(d) || d < 0.0) throw ValidationError("distances must be finite and >= 0");
            if (d != cells_[j * n + i]) throw ValidationError("distance matrix is not symmetric");
        }
    }
}

double DistanceMatrix::max() const {
    return cells_.empty() ? 0.0 : *std::max_element(cells_.begin(), cells_.end());
}

DistanceMatrix DistanceMatrix::permuted(const Permutation& p) const {
    if (p.size() != n_) throw DimensionError("permuted: size mismatch");
    std::vector<double> out(n_ * n_);
    for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t j = 0; j < n_; ++j) out[i * n_ + j] = cells_[p[i] * n_ + p[j]];
    DistanceMatrix d(n_, std::move(out));
    d.disconnected = disconnected;
    return d;
}

namespace {

struct MetricName {
    Metric metric;
    std::string_view token;
};

constexpr std::array<MetricName, 13> kMetricNames = {{
    {Metric::Euclidean, "euclidean"},
    {Metric::Manhattan, "manhattan"},
    {Metric::Cosine, "cosine"},
    {Metric::Dice, "dice"},
    {Metric::Hamming, "hamming"},
    {Metric::Jaccard, "jaccard"},
    {Metric::Kulsinski, "kulsinski"},
    {Metric::RogersTanimoto, "rogerstanimoto"},
    {Metric::RussellRao, "russellrao"},
    {Metric::SokalMichener, "sokalmichener"},
    {Metric::SokalSneath, "sokalsneath"},
    {Metric::Yule, "yule"},
    {Metric::ShortestPath, "shortestpath"},
}};

double ratio_or(double num, double den, double fallback) { return den == 0.0 ? fallback : num / den; }

} // namespace

std::string_view to_string(Metric m) {
    for (const auto& e : kMetricNames)
        if (e.metric == m) return e.token;
    return "unknown";
}

Metric parse_metric(std::string_view token) {
    for (const auto& e : kMetricNames)
        if (e.token == token) return e.metric;
    throw ValidationError("unknown distance metric '" + std::string(token) + "'");
}

std::string DistanceSpec::token() const {
    if (metric == Metric::ShortestPath) return "shortestpath";
    return std::string(to_string(metric)) + ":" + std::string(to_string(variant));
}

DistanceSpec DistanceSpec::parse(std::string_view token) {
    const auto colon = token.find(':');
    DistanceSpec spec;
    spec.metric = parse_metric(token.substr(0, colon));
    if (spec.metric == Metric::ShortestPath) {
        if (colon != std::string_view::npos) {
            throw ValidationError("shortestpath takes no variant");
        }
        return spec;
    }
    if (colon == std::string_view::npos) {
        throw ValidationError("distance '" + std::string(token) + "' needs a variant (raw|selfloops)");
    }
    spec.variant = parse_variant(token.substr(colon + 1));
    return spec;
}

std::vector<DistanceSpec> all_distance_specs() {
    std::vector<DistanceSpec> specs;
    for (auto variant : {MatrixVariant::Raw, MatrixVariant::SelfLoops})
        for (auto m : kVectorMetrics) specs.push_back({m, variant});
    specs.push_back({Metric::ShortestPath, MatrixVariant::Raw});
    return specs;
}

Contingency contingency(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) throw DimensionError("contingency: length mismatch");
    Contingency c;
    for (std::size_t k = 0; k < u.size(); ++k) {
        const bool a = u[k] != 0.0;
        const bool b = v[k] != 0.0;
        if (a && b) ++c.n11;
        else if (a) ++c.n10;
        else if (b) ++c.n01;
        else ++c.n00;
    }
    return c;
}

double vector_distance(std::span<const double> u, std::span<const double> v, Metric metric) {
    if (u.size() != v.size()) throw DimensionError("vector_distance: length mismatch");
    switch (metric) {
    case Metric::Euclidean: {
        double s = 0.0;
        for (std::size_t k = 0; k < u.size(); ++k) s += (u[k] - v[k]) * (u[k] - v[k]);
        return std::sqrt(s);
    }
    case Metric::Manhattan: {
        double s = 0.0;
        for (std::size_t k = 0; k < u.size(); ++k) s += std::abs(u[k] - v[k]);
        return s;
    }
    case Metric::Cosine: {
        double dot = 0.0, nu = 0.0, nv = 0.0;
        for (std::size_t k = 0; k < u.size(); ++k) {
            dot += u[k] * v[k];
            nu += u[k] * u[k];
            nv += v[k] * v[k];
        }
        if (nu == 0.0 || nv == 0.0) return 1.0;
        // Rounding can push identical vectors slightly below zero.
        return std::max(0.0, 1.0 - dot / (std::sqrt(nu) * std::sqrt(nv)));
    }
    case Metric::ShortestPath:
        throw ValidationError("shortestpath is a graph distance, not a vector metric");
    default:
        break;
    }

    const auto c = contingency(u, v);
    const double n00 = static_cast<double>(c.n00), n01 = static_cast<double>(c.n01);
    const double n10 = static_cast<double>(c.n10), n11 = static_cast<double>(c.n11);
    const double n = static_cast<double>(u.size());
    const double mismatch = n01 + n10;
    switch (metric) {
    case Metric::Dice: return ratio_or(mismatch, 2 * n11 + mismatch, 0.0);
    case Metric::Hamming: return ratio_or(mismatch, n, 0.0);
    case Metric::Jaccard: return ratio_or(mismatch, n11 + mismatch, 0.0);
    case Metric::Kulsinski: return ratio_or(mismatch - n11 + n, mismatch + n, 0.0);
    case Metric::RogersTanimoto: return ratio_or(2 * mismatch, n00 + n11 + 2 * mismatch, 0.0);
    case Metric::RussellRao: return ratio_or(n - n11, n, 0.0);
    case Metric::SokalMichener: return ratio_or(2 * mismatch, 2 * (n00 + n11) + 2 * mismatch, 0.0);
    case Metric::SokalSneath: return ratio_or(2 * mismatch, n11 + 2 * mismatch, 0.0);
    case Metric::Yule: return ratio_or(2 * n01 * n10, n00 * n11 + n01 * n10, 0.0);
    default: break;
    }
    throw ValidationError("unhandled metric");
}

DistanceMatrix pairwise(const AdjacencyMatrix& a, Metric metric) {
    const auto n = a.size();
    const auto real = a.to_real();
    std::vector<double> cells(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        std::span<const double> ri(real.data() + i * n, n);
        for (std::size_t j = i + 1; j < n; ++j) {
            std::span<const double> rj(real.data() + j * n, n);
            const double d = vector_distance(ri, rj, metric);
            cells[i * n + j] = d;
            cells[j * n + i] = d;
        }
    }
    return DistanceMatrix(n, std::move(cells));
}

DistanceMatrix shortest_path_distances(const Graph& g) {
    const auto n = g.node_count();
    const auto adj = g.neighbors();
    constexpr double kUnreached = -1.0;
    std::vector<double> cells(n * n, kUnreached);
    double max_finite = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        auto* row = cells.data() + s * n;
        row[s] = 0.0;
        std::deque<std::size_t> queue{s};
        while (!queue.empty()) {
            const auto u = queue.front();
            queue.pop_front();
            for (auto v : adj[u]) {
                if (row[v] == kUnreached) {
                    row[v] = row[u] + 1.0;
                    max_finite = std::max(max_finite, row[v]);
                    queue.push_back(v);
                }
            }
        }
    }
    bool disconnected = false;
    for (auto& c : cells) {
        if (c == kUnreached) {
            c = max_finite + 1.0;
            disconnected = true;
        }
    }
    DistanceMatrix d(n, std::move(cells));
    d.disconnected = disconnected;
    return d;
}

DistanceMatrix distance_matrix(const Graph& g, const DistanceSpec& spec) {
    if (spec.metric == Metric::ShortestPath) return shortest_path_distances(g);
    return pairwise(adjacency(g, spec.variant), spec.metric);
}

} // namespace mrgen
