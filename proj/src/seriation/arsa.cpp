#include "mrgen/errors.hpp"
#include "mrgen/rng.hpp"
#include "mrgen/seriation.hpp"

#include <algorithm>
#include <cmath>
#include <utility>
#include <numeric>

namespace mrgen {

double linear_seriation(const DistanceMatrix& d, const Permutation& p) {
    const auto n = d.size();
    if (p.size() != n) throw DimensionError("linear_seriation: size mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            total += static_cast<double>(n - (j - i)) * d(p[i], p[j]);
    return total;
}

namespace {

/// Objective change from swapping the items at positions a < b.
double swap_delta(const DistanceMatrix& d, const std::vector<std::size_t>& order, std::size_t a, std::size_t b) {
    const auto x = order[a], y = order[b];
    double delta = 0.0;
    for (std::size_t o = 0; o < order.size(); ++o) {
        if (o == a || o == b) continue;
        const double da = o > a ? double(o - a) : double(a - o);
        const double db = o > b ? double(o - b) : double(b - o);
        // Weight is n - |i - j|, so moving closer raises the weight.
        delta += (da - db) * (d(x, order[o]) - d(y, order[o]));
    }
    return delta;
}

/// Objective change from reversing positions a..b (inclusive). Separations
/// inside the segment are unchanged; only segment-to-outside pairs move.
double reversal_delta(const DistanceMatrix& d, const std::vector<std::size_t>& order, std::size_t a, std::size_t b) {
    const auto n = order.size();
    double delta = 0.0;
    for (std::size_t i = a; i <= b; ++i) {
        const auto x = order[i];
        double left = 0.0, right = 0.0;
        for (std::size_t o = 0; o < a; ++o) left += d(x, order[o]);
        for (std::size_t o = b + 1; o < n; ++o) right += d(x, order[o]);
        const double shift = 2.0 * double(i) - double(a) - double(b);
        delta += shift * (left - right);
    }
    return delta;
}

} // namespace

Permutation arsa_order(const DistanceMatrix& d, std::uint64_t seed, const AnnealingSchedule& schedule) {
    const auto n = d.size();
    if (n < 2) throw ValidationError("ARSA needs n >= 2");
    if (!(schedule.cooling > 0.0 && schedule.cooling < 1.0)) throw ConfigError("cooling must lie in (0, 1)");
    if (schedule.moves_per_node == 0 || !(schedule.stop_ratio > 0.0)) throw ConfigError("invalid annealing schedule");

    Rng rng(seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    double current = linear_seriation(d, Permutation(order));

    auto random_pair = [&] {
        std::size_t a = rng.index(n), b = rng.index(n - 1);
        if (b >= a) ++b;
        if (a > b) std::swap(a, b);
        return std::pair{a, b};
    };

    double t0 = 0.0;
    if (schedule.initial_temperature) {
        t0 = *schedule.initial_temperature;
    } else {
        const std::size_t samples = std::max<std::size_t>(schedule.calibration_swaps, 2);
        double sum = 0.0, sum2 = 0.0;
        for (std::size_t s = 0; s < samples; ++s) {
            auto [a, b] = random_pair();
            const double value = current + swap_delta(d, order, a, b);
            sum += value;
            sum2 += value * value;
        }
        const double mean = sum / double(samples);
        t0 = std::sqrt(std::max(0.0, sum2 / double(samples) - mean * mean));
    }

    auto best_order = order;
    double best = current;
    if (!(t0 > 0.0)) return Permutation(std::move(best_order));

    const std::size_t stage = schedule.moves_per_node * n;
    for (double t = t0; t >= schedule.stop_ratio * t0; t *= schedule.cooling) {
        for (std::size_t move = 0; move < stage; ++move) {
            const bool swap_move = rng.uniform() < 0.5;
            auto [a, b] = random_pair();
            const double delta = swap_move ? swap_delta(d, order, a, b) : reversal_delta(d, order, a, b);
            if (delta <= 0.0 || rng.uniform() < std::exp(-delta / t)) {
                if (swap_move) {
                    std::swap(order[a], order[b]);
                } else {
                    std::reverse(order.begin() + static_cast<std::ptrdiff_t>(a),
                                 order.begin() + static_cast<std::ptrdiff_t>(b) + 1);
                }
                current += delta;
                if (current < best - 1e-9 * std::max(1.0, std::abs(best))) {
                    // Re-evaluate exactly so accumulated drift cannot fake progress.
                    current = linear_seriation(d, Permutation(order));
                    if (current < best) {
                        best = current;
                        best_order = order;
                    }
                }
            }
        }
    }
    return Permutation(std::move(best_order));
}

} // namespace mrgen
