#include "mrgen/model.hpp"

#include "mrgen/errors.hpp"

#include <algorithm>
#include <cmath>

namespace mrgen {

using namespace ad;

std::string_view to_string(DecoderKind kind) {
    return kind == DecoderKind::Sinkhorn ? "sinkhorn" : "softsort";
}

DecoderKind parse_decoder(std::string_view token) {
    if (token == "sinkhorn") return DecoderKind::Sinkhorn;
    if (token == "softsort") return DecoderKind::SoftSort;
    throw ValidationError("unknown decoder '" + std::string(token) + "' (expected sinkhorn or softsort)");
}

void ModelConfig::validate() const {
    if (n < 8) throw ConfigError("n = " + std::to_string(n) + " is below the minimum of 8");
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("tau must be positive");
    if (latent_dim != 2) throw ConfigError("latent dimension must be 2");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be non-negative");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be positive");
    if (sinkhorn_iters == 0 || sw_projections == 0 || batch_size == 0 || epochs == 0) {
        throw ConfigError("iteration, projection, batch and epoch counts must be positive");
    }
}

std::vector<std::size_t> encoder_widths(std::size_t n) {
    if (n < 8) throw ConfigError("n = " + std::to_string(n) + " is below the minimum of 8");
    std::vector<std::size_t> w;
    for (std::size_t i = 0; i < 4; ++i) {
        const auto side = n >> i;
        w.push_back(side * side);
    }
    w.push_back(2);
    return w;
}

std::vector<std::size_t> decoder_widths(const ModelConfig& config) {
    if (config.decoder == DecoderKind::Sinkhorn) {
        auto w = encoder_widths(config.n);
        std::reverse(w.begin(), w.end());
        return w;
    }
    encoder_widths(config.n);
    const auto h = 8 * config.n;
    return {2, h, h, h, config.n};
}

void ParameterStore::add(std::string name, Tensor tensor) {
    for (const auto& e : entries_)
        if (e.name == name) throw ValidationError("duplicate parameter '" + name + "'");
    entries_.push_back({std::move(name), std::move(tensor)});
}

const Tensor& ParameterStore::get(std::string_view name) const {
    for (const auto& e : entries_)
        if (e.name == name) return e.tensor;
    throw ValidationError("no parameter named '" + std::string(name) + "'");
}

std::size_t ParameterStore::scalar_count() const {
    std::size_t total = 0;
    for (const auto& e : entries_) total += e.tensor.size();
    return total;
}

std::vector<Tensor> ParameterStore::tensors() const {
    std::vector<Tensor> out;
    for (const auto& e : entries_) out.push_back(e.tensor);
    return out;
}

void ParameterStore::zero_grad() const {
    for (const auto& e : entries_) e.tensor.zero_grad();
}

ParameterStore ParameterStore::clone() const {
    ParameterStore out;
    for (const auto& e : entries_) out.add(e.name, Tensor::parameter(e.tensor.shape(), e.tensor.value()));
    return out;
}

namespace {

std::string layer_name(const std::string& prefix, std::size_t i, const char* what) {
    return prefix + "." + std::to_string(i) + "." + what;
}

void add_mlp(ParameterStore& store, const std::string& prefix, const std::vector<std::size_t>& widths, Rng& rng) {
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        const auto in = widths[i], out = widths[i + 1];
        const double bound = std::sqrt(1.0 / double(in));
        std::vector<double> w(in * out), b(out);
        for (auto& x : w) x = rng.uniform(-bound, bound);
        for (auto& x : b) x = rng.uniform(-bound, bound);
        store.add(layer_name(prefix, i, "weight"), Tensor::parameter({in, out}, std::move(w)));
        store.add(layer_name(prefix, i, "bias"), Tensor::parameter({out}, std::move(b)));
        if (i + 2 < widths.size()) {
            store.add(layer_name(prefix, i, "ln_gain"), Tensor::parameter({out}, std::vector<double>(out, 1.0)));
            store.add(layer_name(prefix, i, "ln_bias"), Tensor::parameter({out}, std::vector<double>(out, 0.0)));
        }
    }
}

void check_layout(const ParameterStore& store, const std::string& prefix, const std::vector<std::size_t>& widths) {
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        const auto in = widths[i], out = widths[i + 1];
        auto expect = [&](const char* what, const Shape& shape) {
            const auto& t = store.get(layer_name(prefix, i, what));
            if (t.shape() != shape) {
                throw ValidationError("parameter " + layer_name(prefix, i, what) + " has shape " +
                                      shape_string(t.shape()) + ", expected " + shape_string(shape));
            }
        };
        expect("weight", {in, out});
        expect("bias", {out});
        if (i + 2 < widths.size()) {
            expect("ln_gain", {out});
            expect("ln_bias", {out});
        }
    }
}

} // namespace

Model::Model(ModelConfig config, ParameterStore params) : config_(std::move(config)), params_(std::move(params)) {
    config_.validate();
    check_layout(params_, "encoder", encoder_widths(config_.n));
    check_layout(params_, "decoder", decoder_widths(config_));
}

Model Model::initialize(const ModelConfig& config) {
    config.validate();
    Rng rng(config.seed);
    ParameterStore store;
    add_mlp(store, "encoder", encoder_widths(config.n), rng);
    add_mlp(store, "decoder", decoder_widths(config), rng);
    return Model(config, std::move(store));
}

Tensor Model::mlp(Tape& t, const std::string& prefix, std::size_t layers, Tensor h) const {
    for (std::size_t i = 0; i < layers; ++i) {
        h = add(t, matmul(t, h, params_.get(layer_name(prefix, i, "weight"))),
                params_.get(layer_name(prefix, i, "bias")));
        if (i + 1 < layers) {
            h = layer_norm(t, h, params_.get(layer_name(prefix, i, "ln_gain")),
                           params_.get(layer_name(prefix, i, "ln_bias")));
            h = elu(t, h);
        }
    }
    return h;
}

Tensor Model::encode(Tape& t, const Tensor& x) const {
    const auto nn = config_.n * config_.n;
    if (x.rank() != 2 || x.dim(1) != nn) {
        throw DimensionError("encoder expects [B," + std::to_string(nn) + "], got " + shape_string(x.shape()));
    }
    return mlp(t, "encoder", 4, x);
}

Tensor Model::decode_soft(Tape& t, const Tensor& z) const {
    if (z.rank() != 2 || z.dim(1) != 2) throw DimensionError("decoder expects [B,2], got " + shape_string(z.shape()));
    const auto n = config_.n;
    auto h = mlp(t, "decoder", 4, z);
    if (config_.decoder == DecoderKind::Sinkhorn) {
        return sinkhorn(t, reshape(t, h, {z.dim(0), n, n}), config_.tau, config_.sinkhorn_iters);
    }
    return softsort(t, h, config_.tau);
}

} // namespace mrgen
