#pragma once

#include "mrgen/distances.hpp"
#include "mrgen/graph.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace mrgen {

enum class Method {
    Spectral,
    SpectralNorm,
    HCSingle,
    HCComplete,
    HCAverage,
    HCWard,
    OLOAverage,
    VAT,
    TSP,
    ARSA,
};

inline constexpr std::array<Method, 10> kAllMethods = {
    Method::Spectral,   Method::SpectralNorm, Method::HCSingle, Method::HCComplete, Method::HCAverage,
    Method::HCWard,     Method::OLOAverage,   Method::VAT,      Method::TSP,        Method::ARSA,
};

std::string_view to_string(Method m);
Method parse_method(std::string_view token);

struct MethodSpec {
    Method method = Method::Spectral;
    std::uint64_t seed = 0; // used by TSP and ARSA only
};

enum class Linkage { Single, Complete, Average, Ward };

/// Binary merge tree over n leaves. Leaves are nodes 0..n-1; merge k creates
/// node n + k.
struct Dendrogram {
    struct Merge {
        std::size_t left;
        std::size_t right;
        double height;
    };

    std::size_t leaves = 0;
    std::vector<Merge> merges;

    std::size_t root() const { return merges.empty() ? 0 : leaves + merges.size() - 1; }
    bool is_leaf(std::size_t node) const { return node < leaves; }
    const Merge& merge_of(std::size_t node) const { return merges[node - leaves]; }

    /// Left-to-right leaf order.
    std::vector<std::size_t> leaf_order() const;
};

struct SpectralOptions {
    double tolerance = 1e-10;
    std::size_t max_iterations = 10000;
};

/// Orders nodes by the Fiedler vector of the Laplacian of W = max(D) - D
/// (zero diagonal). Components closer than 1e-8 of the vector's scale are
/// treated as ties and ordered by node index.
Permutation spectral_order(const DistanceMatrix& d, bool normalized, const SpectralOptions& options = {});

/// Fiedler vector (unit norm, largest-magnitude entry positive).
std::vector<double> fiedler_vector(const DistanceMatrix& d, bool normalized,
                                   const SpectralOptions& options = {});

struct HierarchicalResult {
    Dendrogram tree;
    Permutation order;
};

/// Agglomerative clustering with Lance-Williams updates; ties go to the
/// lowest-index pair. Ward works on squared distances and reports heights on
/// the original scale.
HierarchicalResult hc_order(const DistanceMatrix& d, Linkage linkage);

/// Optimal leaf ordering: of the 2^(n-1) orders consistent with `tree`, one
/// minimizing the sum of adjacent distances.
Permutation olo_order(const DistanceMatrix& d, const Dendrogram& tree);

/// Prim's algorithm started from the lower index of the most distant pair.
Permutation vat_order(const DistanceMatrix& d);

/// Sum of distances between consecutive positions.
double path_length(const DistanceMatrix& d, const Permutation& p);

Permutation nearest_neighbor_path(const DistanceMatrix& d, std::size_t start);

/// First-improvement 2-opt over segment reversals of an open path.
Permutation two_opt(const DistanceMatrix& d, Permutation path);

/// Nearest neighbour from a seeded random start, then 2-opt.
Permutation tsp_order(const DistanceMatrix& d, std::uint64_t seed);

/// Sum over position pairs i < j of (n - (j - i)) * D(order[i], order[j]).
double linear_seriation(const DistanceMatrix& d, const Permutation& p);

struct AnnealingSchedule {
    /// Multiplier applied to the temperature after each stage.
    double cooling = 0.95;
    /// Stage length is moves_per_node * n.
    std::size_t moves_per_node = 100;
    /// Annealing stops once T < stop_ratio * T0.
    double stop_ratio = 1e-6;
    /// T0 is the standard deviation of the objective over this many random swaps.
    std::size_t calibration_swaps = 100;
    std::optional<double> initial_temperature;
};

/// Simulated annealing on the linear seriation criterion with random swaps
/// and segment reversals. Returns the best permutation visited.
Permutation arsa_order(const DistanceMatrix& d, std::uint64_t seed, const AnnealingSchedule& schedule = {});

Permutation run_method(const DistanceMatrix& d, const MethodSpec& spec);

} // namespace mrgen
