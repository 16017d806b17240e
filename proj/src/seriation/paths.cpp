#include "mrgen/errors.hpp"
#include "mrgen/rng.hpp"
#include "mrgen/seriation.hpp"

#include <algorithm>
#include <limits>

namespace mrgen {

Permutation vat_order(const DistanceMatrix& d) {
    const auto n = d.size();
    if (n == 0) throw ValidationError("VAT needs n >= 1");
    std::size_t start = 0;
    double far = -1.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (d(i, j) > far) {
                far = d(i, j);
                start = i;
            }

    std::vector<std::size_t> order{start};
    order.reserve(n);
    std::vector<bool> visited(n, false);
    visited[start] = true;
    std::vector<double> reach(n);
    for (std::size_t j = 0; j < n; ++j) reach[j] = d(start, j);
    while (order.size() < n) {
        std::size_t next = n;
        for (std::size_t j = 0; j < n; ++j)
            if (!visited[j] && (next == n || reach[j] < reach[next])) next = j;
        visited[next] = true;
        order.push_back(next);
        for (std::size_t j = 0; j < n; ++j) reach[j] = std::min(reach[j], d(next, j));
    }
    return Permutation(std::move(order));
}

double path_length(const DistanceMatrix& d, const Permutation& p) {
    if (p.size() != d.size()) throw DimensionError("path_length: size mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < p.size(); ++i) total += d(p[i], p[i + 1]);
    return total;
}

Permutation nearest_neighbor_path(const DistanceMatrix& d, std::size_t start) {
    const auto n = d.size();
    if (start >= n) throw ValidationError("start node out of range");
    std::vector<bool> visited(n, false);
    std::vector<std::size_t> order{start};
    order.reserve(n);
    visited[start] = true;
    while (order.size() < n) {
        const auto here = order.back();
        std::size_t next = n;
        for (std::size_t j = 0; j < n; ++j)
            if (!visited[j] && (next == n || d(here, j) < d(here, next))) next = j;
        visited[next] = true;
        order.push_back(next);
    }
    return Permutation(std::move(order));
}

Permutation two_opt(const DistanceMatrix& d, Permutation path) {
    const auto n = d.size();
    if (path.size() != n) throw DimensionError("two_opt: size mismatch");
    auto order = path.order();
    constexpr double kGain = 1e-12;
    bool improved = true;
    while (improved) {
        improved = false;
        for (std::size_t i = 0; i + 1 < n && !improved; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                // Reversing order[i..j] replaces edges (i-1, i) and (j, j+1).
                double delta = 0.0;
                if (i > 0) delta += d(order[i - 1], order[j]) - d(order[i - 1], order[i]);
                if (j + 1 < n) delta += d(order[i], order[j + 1]) - d(order[j], order[j + 1]);
                if (delta < -kGain) {
                    std::reverse(order.begin() + static_cast<std::ptrdiff_t>(i),
                                 order.begin() + static_cast<std::ptrdiff_t>(j) + 1);
                    improved = true;
                    break;
                }
            }
        }
    }
    return Permutation(std::move(order));
}

Permutation tsp_order(const DistanceMatrix& d, std::uint64_t seed) {
    const auto n = d.size();
    if (n < 2) throw ValidationError("TSP ordering needs n >= 2");
    Rng rng(seed);
    return two_opt(d, nearest_neighbor_path(d, rng.index(n)));
}

} // namespace mrgen
