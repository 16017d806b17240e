#pragma once

#include "mrgen/graph.hpp"

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mrgen {

/// Symmetric, zero-diagonal, finite non-negative n x n matrix.
class DistanceMatrix {
public:
    DistanceMatrix() = default;
    DistanceMatrix(std::size_t n, std::vector<double> cells);

    std::size_t size() const noexcept { return n_; }
    double operator()(std::size_t i, std::size_t j) const { return cells_[i * n_ + j]; }
    const std::vector<double>& cells() const noexcept { return cells_; }
    double max() const;

    /// D'(i, j) = D(order[i], order[j]).
    DistanceMatrix permuted(const Permutation& p) const;

    /// Set when some pairs were unreachable and filled with a sentinel.
    bool disconnected = false;

private:
    std::size_t n_ = 0;
    std::vector<double> cells_;
};

enum class Metric {
    Euclidean,
    Manhattan,
    Cosine,
    Dice,
    Hamming,
    Jaccard,
    Kulsinski,
    RogersTanimoto,
    RussellRao,
    SokalMichener,
    SokalSneath,
    Yule,
    ShortestPath,
};

inline constexpr std::array<Metric, 12> kVectorMetrics = {
    Metric::Euclidean,  Metric::Manhattan,      Metric::Cosine,     Metric::Dice,
    Metric::Hamming,    Metric::Jaccard,        Metric::Kulsinski,  Metric::RogersTanimoto,
    Metric::RussellRao, Metric::SokalMichener,  Metric::SokalSneath, Metric::Yule,
};

std::string_view to_string(Metric m);
Metric parse_metric(std::string_view token);

struct DistanceSpec {
    Metric metric = Metric::ShortestPath;
    MatrixVariant variant = MatrixVariant::Raw; // ignored for ShortestPath

    /// "metric:variant", or "shortestpath".
    std::string token() const;
    static DistanceSpec parse(std::string_view token);

    friend bool operator==(const DistanceSpec& a, const DistanceSpec& b) {
        return a.metric == b.metric &&
               (a.metric == Metric::ShortestPath || a.variant == b.variant);
    }
};

/// The 25 admissible specs: 12 metrics on raw, 12 on self-loop matrices, and
/// shortest paths.
std::vector<DistanceSpec> all_distance_specs();

struct Contingency {
    std::size_t n00 = 0, n01 = 0, n10 = 0, n11 = 0;
    friend bool operator==(const Contingency&, const Contingency&) = default;
};

Contingency contingency(std::span<const double> u, std::span<const double> v);

/// Distance between two feature vectors. Binary metrics treat any non-zero
/// entry as 1. Degenerate denominators resolve to fixed values (see
/// README) instead of NaN.
double vector_distance(std::span<const double> u, std::span<const double> v, Metric metric);

/// Rows of `a` are node feature vectors; diagonal forced to 0.
DistanceMatrix pairwise(const AdjacencyMatrix& a, Metric metric);

/// Unweighted hop counts. Unreachable pairs get (largest finite distance + 1)
/// and the result is flagged `disconnected`.
DistanceMatrix shortest_path_distances(const Graph& g);

DistanceMatrix distance_matrix(const Graph& g, const DistanceSpec& spec);

} // namespace mrgen
