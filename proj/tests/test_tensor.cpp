#include "mrgen/errors.hpp"
#include "mrgen/rng.hpp"
#include "mrgen/tensor.hpp"

#include "doctest.h"

#include <cmath>

using namespace mrgen;
using namespace mrgen::ad;

namespace {

constexpr double kOpTolerance = 1e-6;

std::vector<double> random_values(Rng& rng, std::size_t count, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(count);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

/// Values bounded away from zero, for ops with a kink there.
std::vector<double> away_from_zero(Rng& rng, std::size_t count) {
    auto v = random_values(rng, count);
    for (auto& x : v) x += x >= 0 ? 0.1 : -0.1;
    return v;
}

Tensor random_param(Rng& rng, Shape shape) {
    const auto count = numel(shape);
    return Tensor::parameter(std::move(shape), random_values(rng, count));
}

/// sum(w * y) with fixed random weights, so every output coordinate matters.
Tensor weighted_sum(Tape& t, const Tensor& y, std::uint64_t seed) {
    Rng rng(seed);
    auto w = Tensor::constant(y.shape(), random_values(rng, y.size()));
    return sum(t, mul(t, y, w));
}

double check_op(const std::function<Tensor(Tape&)>& op, std::vector<Tensor> params) {
    return grad_check([&](Tape& t) { return weighted_sum(t, op(t), 99); }, std::move(params));
}

} // namespace

TEST_CASE("backward examples") {
    auto x = Tensor::parameter({3}, {0.5, -1.0, 2.0});
    {
        Tape t;
        t.backward(sum(t, x));
        CHECK(x.grad() == std::vector<double>{1, 1, 1});
    }

    auto y = Tensor::parameter({2}, {1.0, 2.0});
    Tape t2;
    t2.backward(sum(t2, mul(t2, y, y)));
    CHECK(y.grad() == std::vector<double>{2.0, 4.0});

    auto e = Tensor::parameter({2}, {1.0, -1.0});
    Tape t3;
    t3.backward(mean(t3, elu(t3, e)));
    CHECK(e.grad()[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(e.grad()[1] == doctest::Approx(0.5 * std::exp(-1.0)).epsilon(1e-15));
}

TEST_CASE("backward is repeatable") {
    Rng rng(1);
    auto w = random_param(rng, {4, 3});
    auto x = Tensor::constant({5, 4}, random_values(rng, 20));
    Tape t;
    auto loss = mean(t, elu(t, matmul(t, x, w)));
    t.backward(loss);
    const auto first = w.grad();
    w.zero_grad();
    t.backward(loss);
    CHECK(w.grad() == first);
}

TEST_CASE("backward rejects non-scalars") {
    auto x = Tensor::parameter({2}, {1.0, 2.0});
    Tape t;
    CHECK_THROWS_AS(t.backward(exp(t, x)), DimensionError);
}

TEST_CASE("shape errors name both shapes") {
    Tape t;
    auto a = Tensor::zeros({2, 3}), b = Tensor::zeros({2, 3});
    try {
        matmul(t, a, b);
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        CHECK(std::string(e.what()).find("[2,3] and [2,3]") != std::string::npos);
    }
    CHECK_THROWS_AS(add(t, a, Tensor::zeros({2})), DimensionError);
    CHECK_THROWS_AS(Tensor::constant({2, 2}, {1.0}), DimensionError);
}

TEST_CASE("forward values") {
    Tape t;
    auto big_negative = elu(t, Tensor::constant({1}, {-50.0}));
    CHECK(big_negative.value()[0] == doctest::Approx(-1.0));

    auto ln = layer_norm(t, Tensor::constant({1, 4}, {3, 3, 3, 3}), Tensor::constant({4}, {2, 2, 2, 2}),
                         Tensor::constant({4}, {0.5, 0.5, 0.5, 0.5}));
    for (double v : ln.value()) CHECK(v == 0.5);

    auto sm = row_softmax(t, Tensor::constant({1, 2}, {0, 0}));
    CHECK(sm.value() == std::vector<double>{0.5, 0.5});

    auto s = sort(t, Tensor::constant({2, 3}, {3, 1, 2, 0, 5, 4}), true);
    CHECK(s.value() == std::vector<double>{3, 2, 1, 5, 4, 0});

    auto tr = transpose(t, Tensor::constant({2, 3}, {1, 2, 3, 4, 5, 6}));
    CHECK(tr.shape() == Shape{3, 2});
    CHECK(tr.value() == std::vector<double>{1, 4, 2, 5, 3, 6});

    auto half = bce_mean(t, Tensor::constant({2, 2}, std::vector<double>(4, 0.5)),
                         Tensor::constant({2, 2}, {1, 0, 0, 1}));
    CHECK(half.item() == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    auto worst = bce_mean(t, Tensor::constant({1}, {0.0}), Tensor::constant({1}, {1.0}));
    CHECK(worst.item() == doctest::Approx(-std::log(1e-7)).epsilon(1e-12));
}

TEST_CASE("layer_norm and softmax properties") {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const auto rows = 1 + rng.index(5), d = 2 + rng.index(30);
        auto x = Tensor::constant({rows, d}, random_values(rng, rows * d, -5, 5));
        Tape t;
        auto y = layer_norm(t, x, Tensor::constant({d}, std::vector<double>(d, 1.0)),
                            Tensor::constant({d}, std::vector<double>(d, 0.0)));
        auto p = row_softmax(t, x);
        for (std::size_t r = 0; r < rows; ++r) {
            double m = 0, v = 0, total = 0;
            for (std::size_t i = 0; i < d; ++i) {
                m += y.value()[r * d + i];
                total += p.value()[r * d + i];
            }
            m /= double(d);
            for (std::size_t i = 0; i < d; ++i) v += std::pow(y.value()[r * d + i] - m, 2);
            v /= double(d);
            CHECK(std::abs(m) < 1e-12);
            CHECK(v == doctest::Approx(1.0).epsilon(1e-3));
            CHECK(std::abs(total - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("every op passes a gradient check on random shapes") {
    Rng rng(2025);
    for (int trial = 0; trial < 5; ++trial) {
        const auto m = 1 + rng.index(5), k = 1 + rng.index(5), n = 1 + rng.index(5), b = 1 + rng.index(3);
        auto a = random_param(rng, {m, k});
        auto w = random_param(rng, {k, n});
        auto v = random_param(rng, {n});
        auto c = random_param(rng, {m, n});
        auto c2 = random_param(rng, {m, n});
        auto x3 = random_param(rng, {b, m, k});
        auto y3 = random_param(rng, {b, k, n});
        auto pos = Tensor::parameter({m, n}, random_values(rng, m * n, 0.2, 2.0));
        auto kinked = Tensor::parameter({m, n}, away_from_zero(rng, m * n));
        // Rows of width 2 normalize to about +-1 with near-zero gradients,
        // which finite differences cannot resolve; use width 3 and up.
        const auto d = 3 + rng.index(5);
        auto rows = random_param(rng, {m, d});
        auto gain = random_param(rng, {d});
        auto bias = random_param(rng, {d});
        auto s = random_param(rng, {b, n});
        auto s2 = random_param(rng, {b, k});
        auto probs = Tensor::parameter({m, n}, random_values(rng, m * n, 0.05, 0.95));
        auto target = Tensor::constant({m, n}, random_values(rng, m * n, 0.0, 1.0));

        CHECK(check_op([&](Tape& t) { return matmul(t, a, w); }, {a, w}) < kOpTolerance);
        CHECK(check_op([&](Tape& t) { return bmm(t, x3, y3); }, {x3, y3}) < kOpTolerance);
        CHECK(check_op([&](Tape& t) { return bmm(t, x3, w); }, {x3, w}) < kOpTolerance);
        CHECK(check_op([&](Tape& t) { return transpose(t, x3); }, {x3}) < kOpTolerance);
        CHECK(check_op([&](Tape& t) { return add(t, c, v); }, {c, v}) < kOpTolerance);
        CHECK(check_op([&](Tape& t) { return add(t, c, c2); }, {c, c2}) < kOpTolerance);
        CHECK(check_op([&](Tape& t) { return sub(t, c, c2); }, {c, c2}) < kOpTolerance);
        CHECK(check_op([&](Tape& t) { return mul(t, c, c2); }, {c, c2}) < kOpTolerance);
        CHECK(check_op([&](Tape& t) { return scale(t, c, -2.5); }, {c}) < kOpTolerance);
        CHECK(check_op([&](Tape& t) { return negate(t, c); }, {c}) < kOpTolerance);
        CHECK(check_op([&](Tape& t) { return exp(t, c); }, {c}) < kOpTolerance);
        CHECK(check_op([&](Tape& t) { return log(t, pos); }, {pos}) < kOpTolerance);
        CHECK(check_op([&](Tape& t) { return abs(t, kinked); }, {kinked}) < kOpTolerance);
        CHECK(check_op([&](Tape& t) { return elu(t, kinked); }, {kinked}) < kOpTolerance);
        CHECK(check_op([&](Tape& t) { return sum(t, c); }, {c}) < kOpTolerance);
        CHECK(check_op([&](Tape& t) { return mean(t, c); }, {c}) < kOpTolerance);
        CHECK(check_op([&](Tape& t) { return reshape(t, x3, {b * m * k}); }, {x3}) < kOpTolerance);
        CHECK(check_op([&](Tape& t) { return concat(t, {c, c2, c}); }, {c, c2}) < kOpTolerance);
        CHECK(check_op([&](Tape& t) { return layer_norm(t, rows, gain, bias); }, {rows, gain, bias}) < kOpTolerance);
        CHECK(check_op([&](Tape& t) { return row_softmax(t, x3); }, {x3}) < kOpTolerance);
        CHECK(check_op([&](Tape& t) { return log_normalize(t, x3, false); }, {x3}) < kOpTolerance);
        CHECK(check_op([&](Tape& t) { return log_normalize(t, x3, true); }, {x3}) < kOpTolerance);
        CHECK(check_op([&](Tape& t) { return sort(t, s, true); }, {s}) < kOpTolerance);
        CHECK(check_op([&](Tape& t) { return sort(t, c, false); }, {c}) < kOpTolerance);
        CHECK(check_op([&](Tape& t) { return pairwise_absdiff(t, s, s2); }, {s, s2}) < kOpTolerance);
        CHECK(grad_check([&](Tape& t) { return bce_mean(t, probs, target); }, {probs}) < kOpTolerance);
    }
}

TEST_CASE("grad_check sanity") {
    auto x = Tensor::parameter({3}, {0.3, -1.2, 2.0});
    CHECK(grad_check([&](Tape& t) { return sum(t, mul(t, x, x)); }, {x}) < 1e-8);
    CHECK(grad_check([&](Tape&) { return Tensor::scalar(4.0); }, {x}) == 0.0);
}

TEST_CASE("disabled tape records nothing") {
    auto x = Tensor::parameter({2}, {1.0, 2.0});
    Tape t(false);
    auto y = sum(t, exp(t, x));
    CHECK(t.size() == 0);
    CHECK_FALSE(y.requires_grad());
    CHECK(y.item() == doctest::Approx(std::exp(1.0) + std::exp(2.0)));
}
