#include "mrgen/atlas.hpp"

#include "mrgen/errors.hpp"

#include <algorithm>
#include <cmath>

namespace mrgen {

namespace {

void check_sizes(const DistanceMatrix& d, const Permutation& p) {
    if (d.size() != p.size()) {
        throw DimensionError("distance matrix has n = " + std::to_string(d.size()) + " but the order has " +
                             std::to_string(p.size()));
    }
}

// Anti-Robinson events among triples i<j<k with k - i <= band.
std::uint64_t banded_events(const DistanceMatrix& e, std::size_t band) {
    const auto n = e.size();
    std::uint64_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = i + 2; k < n && k - i <= band; ++k) {
            const double ik = e(i, k);
            for (std::size_t j = i + 1; j < k; ++j) count += (e(i, j) > ik) + (e(j, k) > ik);
        }
    }
    return count;
}

} // namespace

std::uint64_t ar_events(const DistanceMatrix& d, const Permutation& p) {
    check_sizes(d, p);
    return banded_events(d.permuted(p), d.size());
}

BarParts bar_parts(const DistanceMatrix& d, const Permutation& p, std::optional<std::size_t> band) {
    check_sizes(d, p);
    const auto n = d.size();
    const auto b = band.value_or(n / 5);
    if (b < 1 || b >= n) {
        throw ValidationError("band " + std::to_string(b) + " out of range [1, " + std::to_string(n) + ")");
    }
    const auto e = d.permuted(p);
    BarParts parts;
    parts.violations = banded_events(e, b);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            parts.total_weight += e(i, j);
            if ((i > j ? i - j : j - i) <= b) parts.band_weight += e(i, j);
        }
    }
    return parts;
}

double bar_measure(const DistanceMatrix& d, const Permutation& p, std::optional<std::size_t> band) {
    const auto parts = bar_parts(d, p, band);
    return double(parts.violations) + parts.band_weight / (1.0 + parts.total_weight);
}

CorResult cor_measure(const DistanceMatrix& d, const Permutation& p) {
    check_sizes(d, p);
    const auto n = d.size();
    if (n < 3) throw ValidationError("cor_measure needs n >= 3");
    const auto e = d.permuted(p);
    double count = 0, sx = 0, sy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            sx += e(i, j);
            sy += double(j - i);
            count += 1;
        }
    }
    const double mx = sx / count, my = sy / count;
    double sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = e(i, j) - mx, dy = double(j - i) - my;
            sxx += dx * dx;
            syy += dy * dy;
            sxy += dx * dy;
        }
    }
    if (sxx <= 0.0 || syy <= 0.0) return {0.0, true};
    return {std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0), false};
}

std::string_view to_string(QualityMetric m) {
    switch (m) {
    case QualityMetric::AR: return "ar";
    case QualityMetric::BAR: return "bar";
    case QualityMetric::COR: return "cor";
    }
    return "?";
}

QualityMetric parse_quality_metric(std::string_view token) {
    for (auto m : {QualityMetric::AR, QualityMetric::BAR, QualityMetric::COR})
        if (to_string(m) == token) return m;
    throw ValidationError("unknown metric '" + std::string(token) + "' (expected ar, bar or cor)");
}

bool lower_is_better(QualityMetric m) { return m != QualityMetric::COR; }

double quality(QualityMetric m, const DistanceMatrix& d, const Permutation& p) {
    switch (m) {
    case QualityMetric::AR: return double(ar_events(d, p));
    case QualityMetric::BAR: return bar_measure(d, p);
    case QualityMetric::COR: return cor_measure(d, p).value;
    }
    return 0.0;
}

std::vector<double> normalize_field(const std::vector<double>& raw, bool lower_better) {
    if (raw.empty()) return {};
    const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
    const double min = *lo, range = *hi - *lo;
    std::vector<double> out(raw.size(), 0.5);
    if (!(range > 0.0)) return out;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const double v = (raw[i] - min) / range;
        out[i] = lower_better ? 1.0 - v : v;
    }
    return out;
}

} // namespace mrgen
