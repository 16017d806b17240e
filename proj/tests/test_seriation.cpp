#include "mrgen/errors.hpp"
#include "mrgen/rng.hpp"
#include "mrgen/seriation.hpp"

#include "doctest.h"

#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace mrgen;
using namespace mrgen::testing;

TEST_CASE("spectral ordering of a line") {
    auto d = line_distances(4);
    for (bool normalized : {false, true}) {
        auto p = spectral_order(d, normalized);
        const bool forward = p.order() == std::vector<std::size_t>{0, 1, 2, 3};
        const bool backward = p.order() == std::vector<std::size_t>{3, 2, 1, 0};
        CHECK((forward || backward));
    }
    auto two = spectral_order(line_distances(2), false);
    CHECK(two.size() == 2);
}

TEST_CASE("spectral ties are ordered by node index") {
    // Nodes 1 and 3 are exact duplicates of each other.
    std::vector<double> cells = {
        0, 2, 5, 2, 6,
        2, 0, 3, 0, 4,
        5, 3, 0, 3, 1,
        2, 0, 3, 0, 4,
        6, 4, 1, 4, 0,
    };
    DistanceMatrix d(5, cells);
    auto p = spectral_order(d, false);
    const auto pos = p.positions();
    CHECK(pos[3] == pos[1] + 1);
}

TEST_CASE("spectral non-convergence carries the iteration count") {
    SpectralOptions opts;
    opts.max_iterations = 2;
    opts.tolerance = 0.0;
    Rng rng(3);
    try {
        spectral_order(random_distances(rng, 10), false, opts);
        FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
        CHECK(e.iterations() == 2);
    }
}

TEST_CASE("hierarchical clustering") {
    DistanceMatrix d(3, {0, 1, 5, 1, 0, 4, 5, 4, 0});
    auto r = hc_order(d, Linkage::Single);
    REQUIRE(r.tree.merges.size() == 2);
    CHECK(r.tree.merges[0].left == 0);
    CHECK(r.tree.merges[0].right == 1);
    CHECK(r.tree.merges[0].height == 1.0);
    CHECK(r.tree.merges[1].height == 4.0);
    CHECK(r.order.order() == std::vector<std::size_t>{0, 1, 2});

    auto one = hc_order(DistanceMatrix(1, {0.0}), Linkage::Average);
    CHECK(one.order.order() == std::vector<std::size_t>{0});

    // All-equal distances merge (0,1), then (0-slot, 2), ...
    std::vector<double> flat(16, 1.0);
    for (int i = 0; i < 4; ++i) flat[i * 4 + i] = 0.0;
    auto a = hc_order(DistanceMatrix(4, flat), Linkage::Complete);
    auto b = hc_order(DistanceMatrix(4, flat), Linkage::Complete);
    CHECK(a.order == b.order);
    CHECK(a.order.order() == std::vector<std::size_t>{0, 1, 2, 3});
}

TEST_CASE("ward linkage matches a direct centroid computation") {
    // Points on a line; Ward.D2 heights are sqrt(2 * n_a * n_b / (n_a + n_b)) * |c_a - c_b|.
    std::vector<double> x = {0.0, 1.0, 5.0};
    std::vector<double> cells(9);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) cells[i * 3 + j] = std::abs(x[i] - x[j]);
    auto r = hc_order(DistanceMatrix(3, cells), Linkage::Ward);
    CHECK(r.tree.merges[0].height == doctest::Approx(1.0));
    CHECK(r.tree.merges[1].height == doctest::Approx(std::sqrt(2.0 * 2.0 * 1.0 / 3.0) * 4.5));
}

TEST_CASE("dendrogram heights are monotone") {
    Rng rng(17);
    for (int trial = 0; trial < 30; ++trial) {
        auto d = random_distances(rng, 2 + rng.index(12));
        for (auto linkage : {Linkage::Single, Linkage::Complete, Linkage::Average, Linkage::Ward}) {
            auto r = hc_order(d, linkage);
            const auto& t = r.tree;
            for (const auto& m : t.merges) {
                for (auto child : {m.left, m.right}) {
                    if (!t.is_leaf(child)) CHECK(t.merge_of(child).height <= m.height + 1e-12);
                }
            }
        }
    }
}

TEST_CASE("optimal leaf ordering matches brute force") {
    // ((0,1),(2,3))
    Dendrogram tree{4, {{0, 1, 1.0}, {2, 3, 1.0}, {4, 5, 2.0}}};
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        auto d = random_distances(rng, 4);
        auto p = olo_order(d, tree);
        CHECK(path_length(d, p) == doctest::Approx(brute_force_leaf_order_cost(d, tree)));
    }

    auto two = olo_order(line_distances(2), hc_order(line_distances(2), Linkage::Average).tree);
    CHECK(path_length(line_distances(2), two) == 1.0);

    // Left-combed tree (((0,1),2),3) on |i-j| gives the identity.
    Dendrogram comb{4, {{0, 1, 1.0}, {4, 2, 2.0}, {5, 3, 3.0}}};
    CHECK(olo_order(line_distances(4), comb).order() == std::vector<std::size_t>{0, 1, 2, 3});
}

TEST_CASE("olo never loses to the plain leaf order") {
    Rng rng(8);
    for (int trial = 0; trial < 40; ++trial) {
        auto d = random_distances(rng, 2 + rng.index(15));
        auto hc = hc_order(d, Linkage::Average);
        CHECK(path_length(d, olo_order(d, hc.tree)) <= path_length(d, hc.order) + 1e-12);
    }
}

TEST_CASE("vat ordering") {
    CHECK(vat_order(line_distances(4)).order() == std::vector<std::size_t>{0, 1, 2, 3});
    CHECK(vat_order(DistanceMatrix(1, {0.0})).order() == std::vector<std::size_t>{0});
    std::vector<double> flat(25, 2.0);
    for (int i = 0; i < 5; ++i) flat[i * 5 + i] = 0.0;
    CHECK(vat_order(DistanceMatrix(5, flat)).order() == std::vector<std::size_t>{0, 1, 2, 3, 4});
}

TEST_CASE("tsp ordering") {
    auto d = line_distances(4);
    CHECK(path_length(d, tsp_order(d, 1)) == brute_force_path_length(d));
    CHECK(path_length(line_distances(2), tsp_order(line_distances(2), 5)) == 1.0);

    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        auto dd = random_distances(rng, 3 + rng.index(20));
        for (std::size_t start : {std::size_t{0}, dd.size() - 1}) {
            auto nn = nearest_neighbor_path(dd, start);
            CHECK(path_length(dd, two_opt(dd, nn)) <= path_length(dd, nn));
        }
    }
}

TEST_CASE("linear seriation optimum on a line") {
    auto d = line_distances(6);
    const double optimum = brute_force_linear_seriation(d);
    CHECK(linear_seriation(d, Permutation::identity(6)) == optimum);
    CHECK(linear_seriation(d, Permutation::identity(6).reversed()) == optimum);
}

TEST_CASE("arsa") {
    Rng rng(12);
    for (int trial = 0; trial < 10; ++trial) {
        auto d = random_distances(rng, 3 + rng.index(10));
        const auto seed = rng.next();
        auto p = arsa_order(d, seed);
        CHECK(linear_seriation(d, p) <= linear_seriation(d, Permutation::identity(d.size())));
        CHECK(arsa_order(d, seed) == p);
    }
    AnnealingSchedule bad;
    bad.cooling = 1.5;
    CHECK_THROWS_AS(arsa_order(line_distances(4), 1, bad), ConfigError);
}

TEST_CASE("run_method dispatch") {
    Rng rng(30);
    auto d = random_distances(rng, 9);
    CHECK(run_method(d, {Method::Spectral, 0}) == spectral_order(d, false));
    CHECK(run_method(d, {Method::HCAverage, 0}) == hc_order(d, Linkage::Average).order);
    CHECK(run_method(d, {Method::ARSA, 7}) == run_method(d, {Method::ARSA, 7}));
    for (auto m : kAllMethods) CHECK(parse_method(to_string(m)) == m);
    CHECK_THROWS_AS(parse_method("qap_ls"), ValidationError);
}

TEST_CASE("every method returns a bijection") {
    Rng rng(99);
    for (int trial = 0; trial < 15; ++trial) {
        auto d = random_distances(rng, 2 + rng.index(14));
        for (auto m : kAllMethods) {
            auto p = run_method(d, {m, rng.next()});
            CHECK(is_bijection(p.order()));
            CHECK(p.size() == d.size());
        }
    }
}

TEST_CASE("order-isomorphic shifts leave VAT and single/complete linkage unchanged") {
    Rng rng(77);
    for (int trial = 0; trial < 30; ++trial) {
        auto d = random_distances(rng, 3 + rng.index(12));
        const double c = 0.5 + 3.0 * rng.uniform();
        auto cells = d.cells();
        for (std::size_t i = 0; i < d.size(); ++i)
            for (std::size_t j = 0; j < d.size(); ++j)
                if (i != j) cells[i * d.size() + j] += c;
        DistanceMatrix shifted(d.size(), cells);
        CHECK(vat_order(shifted) == vat_order(d));
        CHECK(hc_order(shifted, Linkage::Single).order == hc_order(d, Linkage::Single).order);
        CHECK(hc_order(shifted, Linkage::Complete).order == hc_order(d, Linkage::Complete).order);
    }
}
