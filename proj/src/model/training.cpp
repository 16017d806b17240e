#include "mrgen/training.hpp"

#include "mrgen/errors.hpp"
#include "mrgen/parallel.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace mrgen {

namespace {

std::string parameter_norms(const ParameterStore& params) {
    std::ostringstream out;
    out << std::setprecision(6);
    for (const auto& e : params.entries()) {
        double sq = 0.0;
        for (double v : e.tensor.value()) sq += v * v;
        out << "\n  " << e.name << " |w|=" << std::sqrt(sq);
    }
    return out.str();
}

} // namespace

TrainResult train(const Graph& g, const Dataset& dataset, const ModelConfig& config, const TrainOptions& options) {
    config.validate();
    check_dataset_matches(dataset, g);
    if (config.n != g.node_count()) {
        throw ConfigError("config has n = " + std::to_string(config.n) + " but the graph has " +
                          std::to_string(g.node_count()) + " nodes");
    }
    const auto a = adjacency(g);
    const auto all = reordered_matrices(g, dataset);
    std::vector<const AdjacencyMatrix*> inputs;
    if (options.subset.empty()) {
        for (const auto& m : all) inputs.push_back(&m);
    } else {
        for (auto i : options.subset) {
            if (i >= all.size()) throw ValidationError("training subset index " + std::to_string(i) + " out of range");
            inputs.push_back(&all[i]);
        }
    }
    if (inputs.empty()) throw ValidationError("no training records");

    auto model = Model::initialize(config);
    auto state = OptimizerState::for_params(model.params());
    const AdamaxOptions adamax{config.learning_rate};
    Rng shuffle_rng(Rng::mix(config.seed) ^ 0x73687566666c65ULL);
    Rng loss_rng(Rng::mix(config.seed) ^ 0x70726f6a656374ULL);

    TrainResult result{Checkpoint{g.digest(), model, state}, {}};
    const auto started = std::chrono::steady_clock::now();
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto order = shuffle_rng.permutation(inputs.size());
        EpochLog log{epoch};
        for (std::size_t start = 0, batch_no = 0; start < order.size(); start += config.batch_size, ++batch_no) {
            const auto stop = std::min(order.size(), start + config.batch_size);
            std::vector<const AdjacencyMatrix*> batch;
            for (auto i = start; i < stop; ++i) batch.push_back(inputs[order[i]]);

            ad::Tape tape;
            auto terms = batch_loss(tape, model, a, batch, loss_rng);
            const double total = terms.total.item();
            if (!std::isfinite(total)) {
                std::ostringstream msg;
                msg << "non-finite loss at epoch " << epoch << ", batch " << batch_no << " (L_X="
                    << terms.reconstruction.item() << ", L_Z=" << terms.latent.item() << "); parameter norms:"
                    << parameter_norms(model.params());
                throw NumericalError(msg.str());
            }
            model.params().zero_grad();
            tape.backward(terms.total);
            adamax_step(model.params(), state, adamax);

            const double weight = double(batch.size()) / double(inputs.size());
            log.reconstruction += weight * terms.reconstruction.item();
            log.latent += weight * terms.latent.item();
            log.total += weight * total;
        }
        log.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
        result.history.push_back(log);
        if (options.on_epoch) options.on_epoch(log);
    }
    model.params().zero_grad();
    result.checkpoint.model = model;
    result.checkpoint.optimizer = std::move(state);
    return result;
}

std::string history_csv(const std::vector<EpochLog>& history) {
    std::ostringstream out;
    out << std::setprecision(17);
    out << "epoch,L_X,L_Z,wall_ms\n";
    for (const auto& h : history) out << h.epoch << ',' << h.reconstruction << ',' << h.latent << ',' << std::setprecision(6) << h.wall_ms << std::setprecision(17) << '\n';
    return out.str();
}

std::vector<LatentPoint> encode_matrices(const Model& model, const std::vector<const AdjacencyMatrix*>& inputs) {
    std::vector<LatentPoint> out;
    constexpr std::size_t kChunk = 256;
    for (std::size_t start = 0; start < inputs.size(); start += kChunk) {
        std::vector<const AdjacencyMatrix*> chunk(inputs.begin() + start,
                                                  inputs.begin() + std::min(inputs.size(), start + kChunk));
        ad::Tape tape(false);
        auto z = model.encode(tape, stack_matrices(chunk));
        for (std::size_t i = 0; i < chunk.size(); ++i) out.push_back({z.value()[2 * i], z.value()[2 * i + 1]});
    }
    return out;
}

std::vector<Permutation> decode_orders(const Model& model, std::span<const LatentPoint> zs, std::size_t workers) {
    const auto n = model.config().n;
    constexpr std::size_t kChunk = 64;
    const auto chunks = (zs.size() + kChunk - 1) / kChunk;
    std::vector<Permutation> out(zs.size());
    parallel_for(chunks, workers, [&](std::size_t c) {
        const auto start = c * kChunk, stop = std::min(zs.size(), start + kChunk);
        std::vector<double> v;
        for (auto i = start; i < stop; ++i) {
            if (!std::isfinite(zs[i][0]) || !std::isfinite(zs[i][1])) throw ValidationError("latent point is not finite");
            v.push_back(zs[i][0]);
            v.push_back(zs[i][1]);
        }
        ad::Tape tape(false);
        auto soft = model.decode_soft(tape, ad::Tensor::constant({stop - start, 2}, std::move(v)));
        for (auto i = start; i < stop; ++i) {
            std::span<const double> cell(soft.value().data() + (i - start) * n * n, n * n);
            out[i] = harden(cell, n, model.config().decoder);
        }
    });
    return out;
}

void verify_structure(const AdjacencyMatrix& a, const Permutation& p, const AdjacencyMatrix& out) {
    if (p.size() != a.size() || !is_bijection(p.order())) throw ValidationError("decoded order is not a bijection");
    if (out.edge_count() != a.edge_count()) throw ValidationError("decoded matrix changed the edge count");
    auto da = a.row_sums(), db = out.row_sums();
    std::sort(da.begin(), da.end());
    std::sort(db.begin(), db.end());
    if (da != db) throw ValidationError("decoded matrix changed the degree multiset");
    if (!matrices_equal(out, reorder(a, p))) throw ValidationError("decoded matrix is not P A P^T");
}

Decoded decode(const Model& model, const AdjacencyMatrix& a, LatentPoint z) {
    if (a.size() != model.config().n) throw DimensionError("graph size does not match the model");
    auto order = std::move(decode_orders(model, std::span<const LatentPoint>(&z, 1)).front());
    auto matrix = reorder(a, order);
    verify_structure(a, order, matrix);
    return {std::move(order), std::move(matrix)};
}

double error_rate(const AdjacencyMatrix& expected, const AdjacencyMatrix& actual) {
    if (expected.size() != actual.size()) throw DimensionError("error_rate: matrix sizes differ");
    const auto& x = expected.cells();
    const auto& y = actual.cells();
    std::size_t diff = 0;
    for (std::size_t i = 0; i < x.size(); ++i) diff += x[i] != y[i];
    return x.empty() ? 0.0 : double(diff) / double(x.size());
}

double mean_error_rate(const Model& model, const AdjacencyMatrix& a, const std::vector<const AdjacencyMatrix*>& inputs) {
    if (inputs.empty()) throw ValidationError("mean_error_rate of no inputs");
    const auto zs = encode_matrices(model, inputs);
    const auto orders = decode_orders(model, zs);
    double total = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) total += error_rate(*inputs[i], reorder(a, orders[i]));
    return total / double(inputs.size());
}

std::string EvaluationReport::csv() const {
    std::ostringstream out;
    out << std::setprecision(17);
    out << "trial,fold,trial_seed,train_records,test_records,train_error,test_error\n";
    for (const auto& f : folds) {
        out << f.trial << ',' << f.fold << ',' << f.trial_seed << ',' << f.train_records << ',' << f.test_records
            << ',' << f.train_error << ',' << f.test_error << '\n';
    }
    return out.str();
}

EvaluationReport evaluate(const Graph& g, const Dataset& dataset, const ModelConfig& config,
                          const EvaluateOptions& options) {
    if (options.trials == 0) throw ValidationError("evaluate needs at least one trial");
    const auto a = adjacency(g);
    const auto all = reordered_matrices(g, dataset);
    EvaluationReport report;
    double grand = 0.0;
    for (std::size_t trial = 0; trial < options.trials; ++trial) {
        const auto seed = options.first_trial_seed + trial;
        const auto split = split_folds(dataset, options.folds, seed);
        double trial_total = 0.0;
        for (std::size_t f = 0; f < split.k; ++f) {
            TrainOptions topts;
            topts.subset = split.complement(f);
            const auto trained = train(g, dataset, config, topts);
            auto pick = [&](const std::vector<std::size_t>& idx) {
                std::vector<const AdjacencyMatrix*> out;
                for (auto i : idx) out.push_back(&all[i]);
                return out;
            };
            const auto test_idx = split.fold(f);
            FoldResult r{trial, f, seed, topts.subset.size(), test_idx.size(),
                         mean_error_rate(trained.checkpoint.model, a, pick(topts.subset)),
                         mean_error_rate(trained.checkpoint.model, a, pick(test_idx))};
            trial_total += r.test_error;
            report.folds.push_back(r);
            if (options.on_fold) options.on_fold(r);
        }
        report.trial_means.push_back(trial_total / double(split.k));
        grand += report.trial_means.back();
    }
    report.grand_mean = grand / double(options.trials);
    return report;
}

} // namespace mrgen
