#include "mrgen/model.hpp"

#include "mrgen/errors.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace mrgen {

namespace {

void check_square(std::span<const double> w, std::size_t n) {
    if (w.size() != n * n) throw DimensionError("expected " + std::to_string(n * n) + " weights");
}

} // namespace

Permutation max_weight_assignment(std::span<const double> weights, std::size_t n) {
    check_square(weights, n);
    if (n == 0) return Permutation::identity(0);
    // Shortest augmenting paths with potentials on cost = -weight; 1-based,
    // column 0 is the virtual source.
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = -weights[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> order(n);
    for (std::size_t j = 1; j <= n; ++j) order[p[j] - 1] = j - 1;
    return Permutation(std::move(order));
}

Permutation greedy_row_assignment(std::span<const double> weights, std::size_t n) {
    check_square(weights, n);
    auto row = [&](std::size_t i) { return weights.subspan(i * n, n); };
    std::vector<double> confidence(n);
    for (std::size_t i = 0; i < n; ++i) confidence[i] = *std::max_element(row(i).begin(), row(i).end());
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    std::stable_sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) { return confidence[a] > confidence[b]; });

    std::vector<char> taken(n, 0);
    std::vector<std::size_t> order(n);
    for (auto i : rows) {
        std::size_t best = n;
        for (std::size_t j = 0; j < n; ++j) {
            if (!taken[j] && (best == n || row(i)[j] > row(i)[best])) best = j;
        }
        taken[best] = 1;
        order[i] = best;
    }
    return Permutation(std::move(order));
}

Permutation harden(std::span<const double> soft, std::size_t n, DecoderKind kind) {
    return kind == DecoderKind::Sinkhorn ? max_weight_assignment(soft, n) : greedy_row_assignment(soft, n);
}

} // namespace mrgen
