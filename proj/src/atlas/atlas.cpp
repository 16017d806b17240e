#include "mrgen/atlas.hpp"

#include "mrgen/errors.hpp"
#include "mrgen/parallel.hpp"

#include "json.hpp"

#include <cmath>

namespace mrgen {

using ordered_json = nlohmann::ordered_json;

LatentPoint lattice_point(std::size_t k, std::size_t r, std::size_t c) {
    if (k == 0 || r >= k || c >= k) throw ValidationError("lattice index out of range");
    if (k == 1) return {0.0, 0.0};
    const double step = 2.0 / double(k - 1);
    return {-1.0 + step * double(c), 1.0 - step * double(r)};
}

std::string cell_image_name(std::size_t row, std::size_t col) {
    return "cell_" + std::to_string(row) + "_" + std::to_string(col) + ".png";
}

std::string AtlasGrid::manifest_json() const {
    ordered_json cells_json = ordered_json::array();
    for (const auto& c : cells) {
        cells_json.push_back({{"row", c.row},
                              {"col", c.col},
                              {"z", {c.z[0], c.z[1]}},
                              {"order", c.order.order()},
                              {"image", cell_image_name(c.row, c.col)}});
    }
    ordered_json doc{{"k", k}, {"domain", {-1.0, 1.0}}, {"cells", std::move(cells_json)}};
    return doc.dump();
}

AtlasGrid build_grid(const Model& model, const AdjacencyMatrix& a, std::size_t k, std::size_t scale,
                     std::size_t workers) {
    if (k < 1) throw ValidationError("grid side k must be at least 1");
    if (a.size() != model.config().n) throw DimensionError("graph size does not match the model");
    AtlasGrid grid{k, {}};
    std::vector<LatentPoint> zs;
    for (std::size_t r = 0; r < k; ++r)
        for (std::size_t c = 0; c < k; ++c) {
            zs.push_back(lattice_point(k, r, c));
            grid.cells.push_back({r, c, zs.back(), {}, {}});
        }
    auto orders = decode_orders(model, zs, workers);
    parallel_for(grid.cells.size(), workers, [&](std::size_t i) {
        auto& cell = grid.cells[i];
        cell.order = std::move(orders[i]);
        const auto matrix = reorder(a, cell.order);
        verify_structure(a, cell.order, matrix);
        cell.png = render_matrix(matrix, scale);
    });
    return grid;
}

std::string MetricHeatmap::json() const {
    ordered_json doc{{"metric", to_string(metric)}, {"distance", to_string(distance.metric)}};
    if (distance.metric == Metric::ShortestPath) {
        doc["variant"] = nullptr;
    } else {
        doc["variant"] = to_string(distance.variant);
    }
    doc["res"] = res;
    doc["orientation"] = "brighter is better";
    doc["values"] = values;
    return doc.dump();
}

std::string MetricHeatmap::png() const {
    std::vector<std::uint8_t> pixels(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(values[i], 0.0, 1.0) * 255.0));
    return encode_png(res, res, pixels);
}

MetricHeatmap build_heatmap(const Model& model, const Graph& g, QualityMetric metric, const DistanceSpec& distance,
                            std::size_t res, std::size_t workers) {
    if (res < 2) throw ValidationError("heatmap resolution must be at least 2");
    if (g.node_count() != model.config().n) throw DimensionError("graph size does not match the model");
    const auto d = distance_matrix(g, distance);
    std::vector<LatentPoint> zs;
    zs.reserve(res * res);
    for (std::size_t r = 0; r < res; ++r)
        for (std::size_t c = 0; c < res; ++c) zs.push_back(lattice_point(res, r, c));
    const auto orders = decode_orders(model, zs, workers);

    MetricHeatmap h;
    h.res = res;
    h.metric = metric;
    h.distance = distance;
    h.raw.resize(zs.size());
    parallel_for(zs.size(), workers, [&](std::size_t i) { h.raw[i] = quality(metric, d, orders[i]); });
    h.values = normalize_field(h.raw, lower_is_better(metric));
    return h;
}

} // namespace mrgen
