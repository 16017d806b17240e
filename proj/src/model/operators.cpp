#include "mrgen/model.hpp"

#include "mrgen/errors.hpp"

#include <cmath>
#include <numbers>

namespace mrgen {

using namespace ad;

Tensor sinkhorn(Tape& t, const Tensor& x, double tau, std::size_t iters) {
    if (!(tau > 0.0)) throw ConfigError("sinkhorn temperature must be positive");
    if (x.rank() < 2 || x.dim(x.rank() - 1) != x.dim(x.rank() - 2)) {
        throw DimensionError("sinkhorn expects square matrices, got " + shape_string(x.shape()));
    }
    auto h = scale(t, x, 1.0 / tau);
    for (std::size_t i = 0; i < iters; ++i) {
        h = log_normalize(t, h, false);
        h = log_normalize(t, h, true);
    }
    return exp(t, h);
}

Tensor softsort(Tape& t, const Tensor& s, double tau) {
    if (!(tau > 0.0)) throw ConfigError("softsort temperature must be positive");
    if (s.rank() != 2) throw DimensionError("softsort expects [B,n], got " + shape_string(s.shape()));
    auto sorted = sort(t, s, true);
    return row_softmax(t, scale(t, pairwise_absdiff(t, sorted, s), -1.0 / tau));
}

Tensor reconstruct(Tape& t, const Tensor& p, const AdjacencyMatrix& a) {
    const auto n = a.size();
    if (p.rank() != 3 || p.dim(1) != n || p.dim(2) != n) {
        throw DimensionError("reconstruct: soft permutations " + shape_string(p.shape()) + " for n = " +
                             std::to_string(n));
    }
    auto adj = Tensor::constant({n, n}, a.to_real());
    return bmm(t, bmm(t, p, adj), transpose(t, p));
}

Tensor bce_loss(Tape& t, const Tensor& pred, const Tensor& target) { return bce_mean(t, pred, target, 1e-7); }

Tensor random_directions(std::size_t count, Rng& rng) {
    std::vector<double> v(2 * count);
    for (std::size_t l = 0; l < count; ++l) {
        const double theta = 2.0 * std::numbers::pi * rng.uniform();
        v[l] = std::cos(theta);
        v[count + l] = std::sin(theta);
    }
    return Tensor::constant({2, count}, std::move(v));
}

Tensor prior_sample(std::size_t count, Rng& rng) {
    std::vector<double> v(2 * count);
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    return Tensor::constant({count, 2}, std::move(v));
}

Tensor sliced_wasserstein(Tape& t, const Tensor& z, const Tensor& prior, const Tensor& directions) {
    if (z.rank() != 2 || z.dim(1) != 2 || z.shape() != prior.shape()) {
        throw DimensionError("sliced_wasserstein: shapes " + shape_string(z.shape()) + " and " +
                             shape_string(prior.shape()));
    }
    if (z.dim(0) == 0) throw ValidationError("sliced_wasserstein: empty batch");
    // [L, B] projections, each row sorted along the batch.
    auto pz = sort(t, transpose(t, matmul(t, z, directions)), false);
    auto pp = sort(t, transpose(t, matmul(t, prior, directions)), false);
    auto diff = sub(t, pz, pp);
    return mean(t, mul(t, diff, diff));
}

Tensor stack_matrices(const std::vector<const AdjacencyMatrix*>& batch) {
    if (batch.empty()) throw ValidationError("empty batch");
    const auto n = batch.front()->size();
    std::vector<double> v;
    v.reserve(batch.size() * n * n);
    for (const auto* m : batch) {
        if (m->size() != n) throw DimensionError("batch mixes matrix sizes");
        for (auto c : m->cells()) v.push_back(double(c));
    }
    return Tensor::constant({batch.size(), n * n}, std::move(v));
}

LossTerms batch_loss(Tape& t, const Model& model, const AdjacencyMatrix& a,
                     const std::vector<const AdjacencyMatrix*>& batch, Rng& rng) {
    const auto& cfg = model.config();
    const auto n = cfg.n;
    if (a.size() != n) throw DimensionError("graph has " + std::to_string(a.size()) + " nodes, model expects " +
                                            std::to_string(n));
    auto x = stack_matrices(batch);
    auto target = Tensor::constant({batch.size(), n, n}, x.value());
    auto z = model.encode(t, x);
    auto recon = bce_loss(t, reconstruct(t, model.decode_soft(t, z), a), target);
    auto prior = prior_sample(batch.size(), rng);
    auto dirs = random_directions(cfg.sw_projections, rng);
    auto latent = sliced_wasserstein(t, z, prior, dirs);
    auto total = add(t, recon, scale(t, latent, cfg.lambda));
    return {total, recon, latent};
}

} // namespace mrgen
