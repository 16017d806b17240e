#include "mrgen/errors.hpp"
#include "mrgen/seriation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mrgen {

namespace {

double norm(const std::vector<double>& v) {
    return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

void project_out(std::vector<double>& v, const std::vector<double>& unit) {
    const double c = std::inner_product(v.begin(), v.end(), unit.begin(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= c * unit[i];
}

} // namespace

std::vector<double> fiedler_vector(const DistanceMatrix& d, bool normalized, const SpectralOptions& options) {
    const auto n = d.size();
    if (n < 2) throw ValidationError("spectral ordering needs n >= 2");

    const double top = d.max();
    std::vector<double> w(n * n, 0.0);
    std::vector<double> degree(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i != j) w[i * n + j] = top - d(i, j);
            degree[i] += w[i * n + j];
        }
    }

    // laplacian = I - S W S (normalized, S = deg^-1/2) or Deg - W.
    std::vector<double> scale(n, 1.0);
    if (normalized) {
        for (std::size_t i = 0; i < n; ++i) scale[i] = degree[i] > 0 ? 1.0 / std::sqrt(degree[i]) : 0.0;
    }
    auto apply_laplacian = [&](const std::vector<double>& x, std::vector<double>& out) {
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            const double* row = w.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) acc += row[j] * scale[j] * x[j];
            out[i] = normalized ? x[i] - scale[i] * acc : degree[i] * x[i] - acc;
        }
    };

    // Null vector: constant (unnormalized) or deg^1/2 (normalized).
    std::vector<double> null(n, 1.0);
    if (normalized) {
        for (std::size_t i = 0; i < n; ++i) null[i] = std::sqrt(degree[i]);
    }
    {
        const double nn = norm(null);
        if (nn == 0.0) {
            std::fill(null.begin(), null.end(), 1.0 / std::sqrt(static_cast<double>(n)));
        } else {
            for (auto& x : null) x /= nn;
        }
    }

    // Gershgorin bound on the spectrum; power iteration runs on shift*I - L.
    double shift = normalized ? 2.0 : 2.0 * *std::max_element(degree.begin(), degree.end());
    shift = std::max(shift, 1e-300);

    std::vector<double> v(n);
    const double mid = (static_cast<double>(n) - 1.0) / 2.0;
    for (std::size_t i = 0; i < n; ++i) {
        // Centred ramp plus a small deterministic wobble so the start vector is
        // not orthogonal to symmetric eigenvectors.
        v[i] = (static_cast<double>(i) - mid) + 0.25 * std::sin(1.0 + 2.0 * static_cast<double>(i));
    }
    project_out(v, null);
    double vn = norm(v);
    if (vn == 0.0) throw ConvergenceError(0, "degenerate start vector");
    for (auto& x : v) x /= vn;

    std::vector<double> lv(n), next(n);
    for (std::size_t iter = 1; iter <= options.max_iterations; ++iter) {
        apply_laplacian(v, lv);
        const double lambda = std::inner_product(v.begin(), v.end(), lv.begin(), 0.0);
        double residual = 0.0;
        for (std::size_t i = 0; i < n; ++i) residual += (lv[i] - lambda * v[i]) * (lv[i] - lambda * v[i]);
        if (std::sqrt(residual) <= options.tolerance * shift) break;
        if (iter == options.max_iterations) {
            throw ConvergenceError(iter, "Fiedler power iteration did not converge");
        }
        for (std::size_t i = 0; i < n; ++i) next[i] = shift * v[i] - lv[i];
        project_out(next, null);
        vn = norm(next);
        if (vn == 0.0) break; // v already spans the top eigenspace of the shifted operator
        for (std::size_t i = 0; i < n; ++i) v[i] = next[i] / vn;
    }

    std::size_t pivot = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (std::abs(v[i]) > std::abs(v[pivot])) pivot = i;
    if (v[pivot] < 0) for (auto& x : v) x = -x;
    return v;
}

Permutation spectral_order(const DistanceMatrix& d, bool normalized, const SpectralOptions& options) {
    const auto v = fiedler_vector(d, normalized, options);
    const auto n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });

    // Group runs of numerically equal components and order each by index.
    double scale = 0.0;
    for (double x : v) scale = std::max(scale, std::abs(x));
    const double tie = 1e-8 * scale;
    for (std::size_t start = 0; start < n;) {
        std::size_t end = start + 1;
        while (end < n && v[order[end]] - v[order[end - 1]] <= tie) ++end;
        std::sort(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
        start = end;
    }
    return Permutation(std::move(order));
}

} // namespace mrgen
