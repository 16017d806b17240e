#pragma once

#include "mrgen/distances.hpp"
#include "mrgen/graph.hpp"
#include "mrgen/training.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mrgen {

/// Triples i<j<k of E = D permuted by p with E[i][j] > E[i][k] (row
/// violations) plus triples with E[j][k] > E[i][k] (column violations).
std::uint64_t ar_events(const DistanceMatrix& d, const Permutation& p);

struct BarParts {
    std::uint64_t violations = 0; // anti-Robinson events with k - i <= b
    double band_weight = 0.0;     // sum of E[i][j] over |i - j| <= b
    double total_weight = 0.0;    // sum of all E[i][j]
};

/// Band defaults to floor(n/5); requires 1 <= b < n.
BarParts bar_parts(const DistanceMatrix& d, const Permutation& p, std::optional<std::size_t> band = {});
/// violations + band_weight / (1 + total_weight); lower is better.
double bar_measure(const DistanceMatrix& d, const Permutation& p, std::optional<std::size_t> band = {});

struct CorResult {
    double value = 0.0;
    bool degenerate = false; // zero variance; value is 0
};

/// Pearson correlation of off-diagonal E[i][j] with |i - j|. Requires n >= 3.
CorResult cor_measure(const DistanceMatrix& d, const Permutation& p);

enum class QualityMetric { AR, BAR, COR };

std::string_view to_string(QualityMetric m);
QualityMetric parse_quality_metric(std::string_view token);
/// AR and BAR are losses; COR is a gain.
bool lower_is_better(QualityMetric m);
double quality(QualityMetric m, const DistanceMatrix& d, const Permutation& p);

/// Lattice point (r, c) of a k x k grid over [-1, 1]^2, row 0 at the top:
/// z = (-1 + 2c/(k-1), 1 - 2r/(k-1)); k = 1 gives (0, 0).
LatentPoint lattice_point(std::size_t k, std::size_t r, std::size_t c);

struct AtlasCell {
    std::size_t row = 0;
    std::size_t col = 0;
    LatentPoint z{};
    Permutation order;
    std::string png;
};

struct AtlasGrid {
    std::size_t k = 0;
    std::vector<AtlasCell> cells; // row-major

    /// {"k", "cells": [{"row", "col", "z", "order", "image"}]}; image names
    /// follow cell_image_name.
    std::string manifest_json() const;
};

std::string cell_image_name(std::size_t row, std::size_t col);

/// Decodes every lattice point, verifies structure and renders each matrix.
AtlasGrid build_grid(const Model& model, const AdjacencyMatrix& a, std::size_t k, std::size_t scale = 4,
                     std::size_t workers = 1);

struct MetricHeatmap {
    std::size_t res = 0;
    QualityMetric metric = QualityMetric::AR;
    DistanceSpec distance;
    std::vector<double> raw;    // row-major, row 0 at the top
    std::vector<double> values; // normalized, brighter (1) is better

    /// {"metric", "distance", "variant", "res", "values"}; variant is null for
    /// shortest paths.
    std::string json() const;
    /// 8-bit grayscale, one pixel per cell.
    std::string png() const;
};

/// Min-max normalization with losses inverted; a constant field maps to 0.5.
std::vector<double> normalize_field(const std::vector<double>& raw, bool lower_better);

MetricHeatmap build_heatmap(const Model& model, const Graph& g, QualityMetric metric, const DistanceSpec& distance,
                            std::size_t res, std::size_t workers = 1);

/// 8-bit grayscale PNG, row-major pixels.
std::string encode_png(std::size_t width, std::size_t height, const std::vector<std::uint8_t>& pixels);

/// PNG with `scale` x `scale` pixels per cell; 1-cells black, 0-cells white.
std::string render_matrix(const AdjacencyMatrix& a, std::size_t scale = 1);

} // namespace mrgen
