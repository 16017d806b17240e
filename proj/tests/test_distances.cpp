#include "mrgen/distances.hpp"
#include "mrgen/errors.hpp"
#include "mrgen/rng.hpp"

#include "doctest.h"

#include <cmath>

using namespace mrgen;

namespace {

Graph random_graph(Rng& rng, std::size_t n, double density) {
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (rng.uniform() < density) edges.emplace_back(i, j);
    return Graph(n, edges);
}

} // namespace

TEST_CASE("contingency counts") {
    std::vector<double> u = {1, 0, 1, 0}, v = {1, 1, 0, 0};
    CHECK(contingency(u, v) == Contingency{1, 1, 1, 1});
    std::vector<double> ones = {1, 1, 1};
    CHECK(contingency(ones, ones) == Contingency{0, 0, 0, 3});
    std::vector<double> z4 = {0, 0, 0, 0}, o4 = {1, 1, 1, 1};
    CHECK(contingency(z4, o4) == Contingency{0, 4, 0, 0});
    CHECK_THROWS_AS(contingency(u, ones), DimensionError);
}

TEST_CASE("vector metrics follow the table formulas") {
    std::vector<double> u = {1, 0, 1, 0}, v = {1, 1, 0, 0};
    // N00 = N01 = N10 = N11 = 1, n = 4.
    CHECK(vector_distance(u, v, Metric::Jaccard) == doctest::Approx(2.0 / 3.0));
    CHECK(vector_distance(u, v, Metric::Hamming) == doctest::Approx(0.5));
    CHECK(vector_distance(u, u, Metric::Euclidean) == 0.0);
    CHECK(vector_distance(u, v, Metric::Euclidean) == doctest::Approx(std::sqrt(2.0)));
    CHECK(vector_distance(u, v, Metric::Manhattan) == doctest::Approx(2.0));
    CHECK(vector_distance(u, v, Metric::Cosine) == doctest::Approx(0.5));
    CHECK(vector_distance(u, v, Metric::Dice) == doctest::Approx(2.0 / 4.0));
    CHECK(vector_distance(u, v, Metric::Kulsinski) == doctest::Approx((2.0 - 1.0 + 4.0) / (2.0 + 4.0)));
    CHECK(vector_distance(u, v, Metric::RogersTanimoto) == doctest::Approx(4.0 / 6.0));
    CHECK(vector_distance(u, v, Metric::RussellRao) == doctest::Approx(3.0 / 4.0));
    CHECK(vector_distance(u, v, Metric::SokalMichener) == doctest::Approx(4.0 / 8.0));
    CHECK(vector_distance(u, v, Metric::SokalSneath) == doctest::Approx(4.0 / 5.0));
    CHECK(vector_distance(u, v, Metric::Yule) == doctest::Approx(2.0 / 2.0));
}

TEST_CASE("degenerate denominators") {
    std::vector<double> zero = {0, 0, 0}, one = {1, 0, 0};
    CHECK(vector_distance(zero, one, Metric::Cosine) == 1.0);
    CHECK(vector_distance(zero, zero, Metric::Cosine) == 1.0);
    CHECK(vector_distance(zero, zero, Metric::Jaccard) == 0.0);
    CHECK(vector_distance(zero, zero, Metric::Dice) == 0.0);
    CHECK(vector_distance(zero, zero, Metric::SokalSneath) == 0.0);
    // N00*N11 + N01*N10 = 0 when u = v = one.
    CHECK(vector_distance(one, one, Metric::Yule) == 0.0);
    CHECK(vector_distance(zero, one, Metric::Yule) == 0.0);
}

TEST_CASE("self-loop variant separates structural twins") {
    // Nodes 0 and 1 are both adjacent to exactly {2, 3} and not to each other.
    auto g = parse_edge_list("0 2\n0 3\n1 2\n1 3\n");
    auto raw = pairwise(adjacency(g, MatrixVariant::Raw), Metric::Euclidean);
    auto self = pairwise(adjacency(g, MatrixVariant::SelfLoops), Metric::Euclidean);
    CHECK(raw(0, 1) == 0.0);
    CHECK(self(0, 1) == doctest::Approx(std::sqrt(2.0)));
    for (std::size_t i = 0; i < 4; ++i) CHECK(self(i, i) == 0.0);
}

TEST_CASE("shortest paths") {
    auto p = shortest_path_distances(path_graph(3));
    CHECK(p(0, 2) == 2.0);
    CHECK_FALSE(p.disconnected);

    auto k4 = shortest_path_distances(complete_graph(4));
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) CHECK(k4(i, j) == (i == j ? 0.0 : 1.0));

    auto karate = shortest_path_distances(read_edge_list_file(std::string(MRGEN_DATA_DIR) + "/karate.txt"));
    CHECK(karate.max() == 5.0);

    // Two components: {0,1,2} path and {3,4} edge. Largest finite hop count is 2.
    auto split = shortest_path_distances(parse_edge_list("0 1\n1 2\n3 4\n"));
    CHECK(split.disconnected);
    CHECK(split(0, 3) == 3.0);
    CHECK(split(3, 4) == 1.0);
}

TEST_CASE("distance spec tokens") {
    CHECK(all_distance_specs().size() == 25);
    CHECK(DistanceSpec::parse("jaccard:selfloops").token() == "jaccard:selfloops");
    CHECK(DistanceSpec::parse("shortestpath").metric == Metric::ShortestPath);
    CHECK_THROWS_AS(DistanceSpec::parse("jaccard"), ValidationError);
    CHECK_THROWS_AS(DistanceSpec::parse("shortestpath:raw"), ValidationError);
    CHECK_THROWS_AS(DistanceSpec::parse("chebyshev:raw"), ValidationError);
    for (const auto& spec : all_distance_specs()) CHECK(DistanceSpec::parse(spec.token()) == spec);
}

TEST_CASE("every spec yields a valid distance matrix on random graphs") {
    Rng rng(2024);
    for (int trial = 0; trial < 20; ++trial) {
        const auto n = 2 + rng.index(20);
        auto g = random_graph(rng, n, 0.05 + 0.5 * rng.uniform());
        for (const auto& spec : all_distance_specs()) {
            // The DistanceMatrix constructor enforces symmetry, zero diagonal and finiteness.
            auto d = distance_matrix(g, spec);
            CHECK(d.size() == n);
        }
    }
}

TEST_CASE("binary metric identities") {
    Rng rng(9);
    for (int trial = 0; trial < 200; ++trial) {
        const auto n = 1 + rng.index(30);
        std::vector<double> u(n), v(n);
        for (std::size_t k = 0; k < n; ++k) {
            u[k] = rng.uniform() < 0.4 ? 1.0 : 0.0;
            v[k] = rng.uniform() < 0.4 ? 1.0 : 0.0;
        }
        const double manhattan = vector_distance(u, v, Metric::Manhattan);
        const double euclid = vector_distance(u, v, Metric::Euclidean);
        CHECK(vector_distance(u, v, Metric::Hamming) == doctest::Approx(manhattan / double(n)));
        CHECK(manhattan == doctest::Approx(euclid * euclid));
    }
}
