#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mrgen {

using Edge = std::pair<std::size_t, std::size_t>;

/// Simple undirected unlabeled graph. Edges are stored once each as (u, v)
/// with u < v, sorted.
class Graph {
public:
    Graph(std::size_t n, std::vector<Edge> edges, std::string name = {});

    std::size_t node_count() const noexcept { return n_; }
    std::size_t edge_count() const noexcept { return edges_.size(); }
    const std::vector<Edge>& edges() const noexcept { return edges_; }
    const std::string& name() const noexcept { return name_; }

    std::vector<std::size_t> degrees() const;
    std::vector<std::vector<std::size_t>> neighbors() const;

    /// Canonical edge-list text: "# nodes: n" header followed by sorted "u v" lines.
    std::string to_edge_list() const;

    /// FNV-1a 64-bit hash of the canonical edge list.
    std::uint64_t digest() const;

private:
    std::size_t n_;
    std::vector<Edge> edges_;
    std::string name_;
};

/// Parses "u v" lines. Blank lines and '#' comments are skipped; a
/// "# nodes: k" comment raises the node count to at least k.
Graph parse_edge_list(std::string_view text, std::string name = {});
Graph read_edge_list_file(const std::string& path);

Graph path_graph(std::size_t n);
Graph complete_graph(std::size_t n);

/// Bijection on {0..n-1}; order()[i] is the original node placed at position i.
class Permutation {
public:
    Permutation() = default;
    explicit Permutation(std::vector<std::size_t> order);

    static Permutation identity(std::size_t n);
    /// Accepts only an exact 0/1 permutation matrix (row-major n x n).
    static Permutation from_matrix(std::span<const double> cells, std::size_t n);

    std::size_t size() const noexcept { return order_.size(); }
    std::size_t operator[](std::size_t i) const { return order_[i]; }
    const std::vector<std::size_t>& order() const noexcept { return order_; }

    Permutation inverse() const;
    Permutation reversed() const;
    /// Row-major matrix with P[i][order[i]] = 1.
    std::vector<double> to_matrix() const;

    /// positions()[node] = position of node.
    std::vector<std::size_t> positions() const { return inverse().order(); }

    friend bool operator==(const Permutation&, const Permutation&) = default;

private:
    std::vector<std::size_t> order_;
};

/// Returns r with r[i] = outer[inner[i]].
Permutation compose(const Permutation& outer, const Permutation& inner);

bool is_bijection(std::span<const std::size_t> order);

enum class MatrixVariant { Raw, SelfLoops };

std::string_view to_string(MatrixVariant v);
MatrixVariant parse_variant(std::string_view token);

/// Dense symmetric 0/1 matrix, one byte per cell, row-major.
class AdjacencyMatrix {
public:
    AdjacencyMatrix(std::size_t n, std::vector<std::uint8_t> cells,
                    MatrixVariant variant = MatrixVariant::Raw);

    std::size_t size() const noexcept { return n_; }
    MatrixVariant variant() const noexcept { return variant_; }
    std::uint8_t operator()(std::size_t i, std::size_t j) const { return cells_[i * n_ + j]; }
    std::span<const std::uint8_t> row(std::size_t i) const {
        return {cells_.data() + i * n_, n_};
    }
    const std::vector<std::uint8_t>& cells() const noexcept { return cells_; }

    /// Number of 1-cells, counting each off-diagonal pair twice.
    std::size_t ones() const;
    /// Off-diagonal 1-cell pairs.
    std::size_t edge_count() const;
    std::vector<std::size_t> row_sums() const;
    std::vector<double> to_real() const;

    friend bool operator==(const AdjacencyMatrix& a, const AdjacencyMatrix& b) {
        return a.n_ == b.n_ && a.cells_ == b.cells_;
    }

private:
    std::size_t n_;
    std::vector<std::uint8_t> cells_;
    MatrixVariant variant_;
};

AdjacencyMatrix adjacency(const Graph& g, MatrixVariant variant = MatrixVariant::Raw);

/// result(i, j) = a(order[i], order[j]), i.e. P A P^T.
AdjacencyMatrix reorder(const AdjacencyMatrix& a, const Permutation& p);

/// Cell-wise equality; throws DimensionError when sizes differ.
bool matrices_equal(const AdjacencyMatrix& a, const AdjacencyMatrix& b);

/// Binary PGM ("P5"): 0-cells white, 1-cells black, `scale` pixels per cell.
std::string write_pgm(const AdjacencyMatrix& a, std::size_t scale = 1);

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex_digest(std::uint64_t value);
std::uint64_t parse_hex_digest(std::string_view text);

} // namespace mrgen
