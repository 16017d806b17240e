#include "mrgen/training.hpp"

#include "mrgen/errors.hpp"

#include <bit>
#include <fstream>
#include <sstream>

namespace mrgen {

namespace {

constexpr std::string_view kMagic = "MRGM";

class Writer {
public:
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
    void bytes(std::string_view s) { out_ += s; }
    void f64s(const std::vector<double>& v) {
        u64(v.size());
        for (double x : v) f64(x);
    }
    std::string take() { return std::move(out_); }

private:
    void put(std::uint64_t v, int width) {
        for (int i = 0; i < width; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    std::string out_;
};

class Reader {
public:
    explicit Reader(std::string_view in) : in_(in) {}

    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    double f64() { return std::bit_cast<double>(get(8)); }
    std::string_view bytes(std::size_t count) {
        need(count);
        auto s = in_.substr(pos_, count);
        pos_ += count;
        return s;
    }
    std::vector<double> f64s(std::size_t expected) {
        const auto count = u64();
        if (count != expected) throw ValidationError("checkpoint: payload of " + std::to_string(count) +
                                                     " values, expected " + std::to_string(expected));
        std::vector<double> v(count);
        for (auto& x : v) x = f64();
        return v;
    }
    bool done() const { return pos_ == in_.size(); }

private:
    void need(std::size_t count) const {
        if (in_.size() - pos_ < count) throw ValidationError("checkpoint is truncated");
    }
    std::uint64_t get(int width) {
        need(static_cast<std::size_t>(width));
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i) v |= std::uint64_t(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
        pos_ += static_cast<std::size_t>(width);
        return v;
    }

    std::string_view in_;
    std::size_t pos_ = 0;
};

} // namespace

std::string serialize_checkpoint(const Checkpoint& checkpoint) {
    Writer w;
    w.bytes(kMagic);
    w.u32(Checkpoint::kVersion);
    w.u64(checkpoint.graph_digest);

    const auto& c = checkpoint.model.config();
    w.u64(c.n);
    w.u32(static_cast<std::uint32_t>(c.decoder));
    w.f64(c.tau);
    w.u64(c.sinkhorn_iters);
    w.u64(c.latent_dim);
    w.f64(c.lambda);
    w.u64(c.sw_projections);
    w.u64(c.batch_size);
    w.u64(c.epochs);
    w.f64(c.learning_rate);
    w.u64(c.seed);

    const auto& entries = checkpoint.model.params().entries();
    w.u64(entries.size());
    for (const auto& e : entries) {
        w.u32(static_cast<std::uint32_t>(e.name.size()));
        w.bytes(e.name);
        w.u32(static_cast<std::uint32_t>(e.tensor.rank()));
        for (auto d : e.tensor.shape()) w.u64(d);
        w.f64s(e.tensor.value());
    }

    const auto& opt = checkpoint.optimizer;
    if (opt.m.size() != entries.size() || opt.u.size() != entries.size()) {
        throw ValidationError("optimizer state does not match the parameters");
    }
    w.u64(opt.step);
    for (std::size_t k = 0; k < entries.size(); ++k) {
        w.f64s(opt.m[k]);
        w.f64s(opt.u[k]);
    }
    return w.take();
}

Checkpoint parse_checkpoint(std::string_view bytes) {
    Reader r(bytes);
    if (r.bytes(4) != kMagic) throw ValidationError("not a checkpoint (bad magic)");
    if (const auto v = r.u32(); v != Checkpoint::kVersion) {
        throw ValidationError("unsupported checkpoint version " + std::to_string(v));
    }
    const auto digest = r.u64();

    ModelConfig c;
    c.n = r.u64();
    const auto decoder = r.u32();
    if (decoder > 1) throw ValidationError("checkpoint: unknown decoder kind");
    c.decoder = static_cast<DecoderKind>(decoder);
    c.tau = r.f64();
    c.sinkhorn_iters = r.u64();
    c.latent_dim = r.u64();
    c.lambda = r.f64();
    c.sw_projections = r.u64();
    c.batch_size = r.u64();
    c.epochs = r.u64();
    c.learning_rate = r.f64();
    c.seed = r.u64();

    ParameterStore store;
    const auto count = r.u64();
    if (count > 1024) throw ValidationError("checkpoint: implausible parameter count");
    std::vector<std::size_t> sizes;
    for (std::uint64_t k = 0; k < count; ++k) {
        std::string name(r.bytes(r.u32()));
        const auto rank = r.u32();
        if (rank > 4) throw ValidationError("checkpoint: parameter rank " + std::to_string(rank));
        ad::Shape shape(rank);
        for (auto& d : shape) d = r.u64();
        const auto size = ad::numel(shape);
        store.add(std::move(name), ad::Tensor::parameter(shape, r.f64s(size)));
        sizes.push_back(size);
    }

    OptimizerState opt;
    opt.step = r.u64();
    for (auto size : sizes) {
        opt.m.push_back(r.f64s(size));
        opt.u.push_back(r.f64s(size));
    }
    if (!r.done()) throw ValidationError("checkpoint has trailing bytes");
    return Checkpoint{digest, Model(c, std::move(store)), std::move(opt)};
}

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'");
    out << serialize_checkpoint(checkpoint);
    if (!out) throw Error("failed writing '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open checkpoint '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_checkpoint(buf.str());
}

Checkpoint load_checkpoint(const std::string& path, const Graph& g) {
    auto ck = load_checkpoint(path);
    if (ck.graph_digest != g.digest() || ck.model.config().n != g.node_count()) {
        throw ValidationError("checkpoint was trained on graph " + hex_digest(ck.graph_digest) + ", not " +
                              hex_digest(g.digest()));
    }
    return ck;
}

std::uint64_t checkpoint_digest(const Checkpoint& checkpoint) { return fnv1a(serialize_checkpoint(checkpoint)); }

} // namespace mrgen
