#pragma once

#include "mrgen/graph.hpp"
#include "mrgen/rng.hpp"
#include "mrgen/tensor.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mrgen {

enum class DecoderKind { Sinkhorn, SoftSort };

std::string_view to_string(DecoderKind kind);
DecoderKind parse_decoder(std::string_view token);

struct ModelConfig {
    std::size_t n = 0;
    DecoderKind decoder = DecoderKind::Sinkhorn;
    double tau = 1.0;
    std::size_t sinkhorn_iters = 20;
    std::size_t latent_dim = 2;
    double lambda = 1.0;
    std::size_t sw_projections = 50;
    std::size_t batch_size = 64;
    std::size_t epochs = 500;
    double learning_rate = 0.001;
    std::uint64_t seed = 0;

    /// Throws ConfigError on an invalid combination.
    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

/// n^2, floor(n/2)^2, floor(n/4)^2, floor(n/8)^2, 2.
std::vector<std::size_t> encoder_widths(std::size_t n);
/// Sinkhorn: the encoder widths reversed. SoftSort: 2, 8n, 8n, 8n, n.
std::vector<std::size_t> decoder_widths(const ModelConfig& config);

struct NamedTensor {
    std::string name;
    ad::Tensor tensor;
};

class ParameterStore {
public:
    void add(std::string name, ad::Tensor tensor);
    const ad::Tensor& get(std::string_view name) const;
    const std::vector<NamedTensor>& entries() const noexcept { return entries_; }
    std::size_t scalar_count() const;
    std::vector<ad::Tensor> tensors() const;
    void zero_grad() const;
    /// Deep copy with fresh storage.
    ParameterStore clone() const;

private:
    std::vector<NamedTensor> entries_;
};

/// MLP encoder plus one decoder. Parameters are named
/// "encoder.<i>.{weight,bias,ln_gain,ln_bias}" and likewise for "decoder".
class Model {
public:
    Model(ModelConfig config, ParameterStore params);

    /// Uniform(-sqrt(1/fan_in), sqrt(1/fan_in)) weights and biases, unit
    /// gains, zero norm biases. Seeded by config.seed.
    static Model initialize(const ModelConfig& config);

    const ModelConfig& config() const noexcept { return config_; }
    const ParameterStore& params() const noexcept { return params_; }
    Model clone() const { return Model(config_, params_.clone()); }

    /// [B, n*n] -> [B, 2]
    ad::Tensor encode(ad::Tape& t, const ad::Tensor& x) const;
    /// [B, 2] -> soft permutations [B, n, n]
    ad::Tensor decode_soft(ad::Tape& t, const ad::Tensor& z) const;

private:
    ad::Tensor mlp(ad::Tape& t, const std::string& prefix, std::size_t layers, ad::Tensor h) const;

    ModelConfig config_;
    ParameterStore params_;
};

/// Alternating row/column normalization of X/tau in log space, then exp.
/// X is [n, n] or [B, n, n].
ad::Tensor sinkhorn(ad::Tape& t, const ad::Tensor& x, double tau, std::size_t iters);

/// P[i][j] = softmax_j(-|sort_desc(s)_i - s_j| / tau). s is [B, n].
ad::Tensor softsort(ad::Tape& t, const ad::Tensor& s, double tau);

/// P A P^T for every soft permutation in the batch.
ad::Tensor reconstruct(ad::Tape& t, const ad::Tensor& p, const AdjacencyMatrix& a);

/// Mean BCE over every cell, predictions clamped to [1e-7, 1 - 1e-7].
ad::Tensor bce_loss(ad::Tape& t, const ad::Tensor& pred, const ad::Tensor& target);

/// L random unit directions in the plane, as a [2, L] tensor.
ad::Tensor random_directions(std::size_t count, Rng& rng);
/// B points drawn uniformly from [-1, 1]^2, as a [B, 2] tensor.
ad::Tensor prior_sample(std::size_t count, Rng& rng);

/// Mean over the given directions of the mean squared difference of the
/// sorted 1-D projections of z and prior ([B, 2] each).
ad::Tensor sliced_wasserstein(ad::Tape& t, const ad::Tensor& z, const ad::Tensor& prior,
                              const ad::Tensor& directions);

struct LossTerms {
    ad::Tensor total;
    ad::Tensor reconstruction;
    ad::Tensor latent;
};

/// Loss of one batch of reordered matrices. Draws prior samples and
/// projection directions from `rng`. Depends on the matrices only, never on
/// which permutation produced them.
LossTerms batch_loss(ad::Tape& t, const Model& model, const AdjacencyMatrix& a,
                     const std::vector<const AdjacencyMatrix*>& batch, Rng& rng);

/// Row-major [B, n*n] tensor of the given matrices.
ad::Tensor stack_matrices(const std::vector<const AdjacencyMatrix*>& batch);

/// Maximum-weight perfect assignment on a square matrix (Hungarian method).
/// Returns order with row i assigned to column order[i].
Permutation max_weight_assignment(std::span<const double> weights, std::size_t n);

/// Row argmax with lowest-index ties; colliding rows are resolved by taking
/// rows in descending confidence, each claiming its best free column.
Permutation greedy_row_assignment(std::span<const double> weights, std::size_t n);

/// Exact permutation from a soft one, by decoder kind.
Permutation harden(std::span<const double> soft, std::size_t n, DecoderKind kind);

struct OptimizerState {
    std::uint64_t step = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> u;

    static OptimizerState for_params(const ParameterStore& params);
    bool operator==(const OptimizerState&) const = default;
};

struct AdamaxOptions {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One Adamax update of every parameter from its accumulated gradient.
void adamax_step(const ParameterStore& params, OptimizerState& state, const AdamaxOptions& options);

} // namespace mrgen
