#pragma once

#include "mrgen/dataset.hpp"
#include "mrgen/graph.hpp"
#include "mrgen/model.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mrgen {

struct Checkpoint {
    inline static constexpr std::uint32_t kVersion = 1;

    std::uint64_t graph_digest = 0;
    Model model;
    OptimizerState optimizer;
};

/// Binary layout: "MRGM", u32 version, u64 graph digest, config block,
/// parameters (name, rank, dims, f64 payload), optimizer state. All
/// integers and floats little-endian.
std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint parse_checkpoint(std::string_view bytes);
void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);
/// Loads and checks the stored digest against `g`.
Checkpoint load_checkpoint(const std::string& path, const Graph& g);
std::uint64_t checkpoint_digest(const Checkpoint& checkpoint);

struct EpochLog {
    std::size_t epoch = 0;
    double reconstruction = 0.0;
    double latent = 0.0;
    double total = 0.0;
    double wall_ms = 0.0;
};

struct TrainOptions {
    /// Record indices to train on; empty means all.
    std::vector<std::size_t> subset;
    std::function<void(const EpochLog&)> on_epoch;
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<EpochLog> history;
};

/// Seeded mini-batch training with Adamax on L_X + lambda * L_Z. Throws
/// NumericalError if a loss turns non-finite.
TrainResult train(const Graph& g, const Dataset& dataset, const ModelConfig& config, const TrainOptions& options = {});

/// CSV with header "epoch,L_X,L_Z,wall_ms".
std::string history_csv(const std::vector<EpochLog>& history);

using LatentPoint = std::array<double, 2>;

/// Encoder outputs for the given matrices.
std::vector<LatentPoint> encode_matrices(const Model& model, const std::vector<const AdjacencyMatrix*>& inputs);

/// Hardened orders for each latent point. Safe to call concurrently.
std::vector<Permutation> decode_orders(const Model& model, std::span<const LatentPoint> zs, std::size_t workers = 1);

struct Decoded {
    Permutation order;
    AdjacencyMatrix matrix;
};

/// Decode, harden and reorder; verifies the result is a valid reordering of `a`.
Decoded decode(const Model& model, const AdjacencyMatrix& a, LatentPoint z);

/// Throws ValidationError unless `out` equals reorder(a, p) for a bijection p
/// with a's edge count and degree multiset.
void verify_structure(const AdjacencyMatrix& a, const Permutation& p, const AdjacencyMatrix& out);

/// Fraction of differing cells.
double error_rate(const AdjacencyMatrix& expected, const AdjacencyMatrix& actual);

/// Mean error rate of hardened reconstructions of the given inputs.
double mean_error_rate(const Model& model, const AdjacencyMatrix& a, const std::vector<const AdjacencyMatrix*>& inputs);

struct FoldResult {
    std::size_t trial = 0;
    std::size_t fold = 0;
    std::uint64_t trial_seed = 0;
    std::size_t train_records = 0;
    std::size_t test_records = 0;
    double train_error = 0.0;
    double test_error = 0.0;
};

struct EvaluationReport {
    std::vector<FoldResult> folds;
    std::vector<double> trial_means; // mean held-out error per trial
    double grand_mean = 0.0;

    /// CSV: trial,fold,trial_seed,train_records,test_records,train_error,test_error
    std::string csv() const;
};

struct EvaluateOptions {
    std::size_t folds = 5;
    std::size_t trials = 10;
    /// Trial t uses split seed first_trial_seed + t.
    std::uint64_t first_trial_seed = 0;
    std::function<void(const FoldResult&)> on_fold;
};

/// Repeated k-fold cross-validation of held-out reconstruction error.
EvaluationReport evaluate(const Graph& g, const Dataset& dataset, const ModelConfig& config,
                          const EvaluateOptions& options = {});

} // namespace mrgen
