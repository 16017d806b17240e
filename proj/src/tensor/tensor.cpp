#include "mrgen/tensor.hpp"

#include "mrgen/errors.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mrgen::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const RowMat>;
using MMap = Eigen::Map<RowMat>;

[[noreturn]] void shape_error(const std::string& op, const Shape& a, const Shape& b) {
    throw DimensionError(op + ": incompatible shapes " + shape_string(a) + " and " + shape_string(b));
}

void require_rank(const std::string& op, const Tensor& x, std::size_t lo, std::size_t hi) {
    if (x.rank() < lo || x.rank() > hi) {
        throw DimensionError(op + ": unsupported shape " + shape_string(x.shape()));
    }
}

/// Applies fn(y, x) elementwise and records g_x += g_y * dfn(x, y).
template <class F, class D>
Tensor unary(Tape& t, const Tensor& a, F fn, D dfn) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fn(a.value()[i]);
    auto y = t.result(a.shape(), std::move(out), {a});
    if (y.requires_grad()) {
        t.record([a, y, dfn]() mutable {
            auto& ga = a.grad();
            const auto& gy = y.grad();
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gy[i] * dfn(a.value()[i], y.value()[i]);
        });
    }
    return y;
}

/// Visits 1-D lanes along the last axis (columns=false) or the second-to-last
/// axis (columns=true). fn(base, stride, length).
template <class F>
void for_each_lane(const Shape& shape, bool columns, F fn) {
    const std::size_t cols = shape.back();
    const std::size_t rows = shape.size() >= 2 ? shape[shape.size() - 2] : 1;
    const std::size_t outer = numel(shape) / std::max<std::size_t>(rows * cols, 1);
    for (std::size_t o = 0; o < outer; ++o) {
        const std::size_t block = o * rows * cols;
        if (!columns) {
            for (std::size_t r = 0; r < rows; ++r) fn(block + r * cols, std::size_t{1}, cols);
        } else {
            for (std::size_t c = 0; c < cols; ++c) fn(block + c, cols, rows);
        }
    }
}

} // namespace

std::size_t numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
    if (numel(shape) != values.size()) {
        throw DimensionError("tensor of shape " + shape_string(shape) + " given " + std::to_string(values.size()) +
                             " values");
    }
    Tensor t;
    t.data_ = std::make_shared<Data>();
    t.data_->shape = std::move(shape);
    t.data_->value = std::move(values);
    return t;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    const auto count = numel(shape);
    auto t = constant(std::move(shape), std::vector<double>(count, 0.0));
    if (requires_grad) {
        t.data_->requires_grad = true;
        t.data_->grad.assign(count, 0.0);
    }
    return t;
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
    auto t = constant(std::move(shape), std::move(values));
    t.data_->requires_grad = true;
    t.data_->grad.assign(t.size(), 0.0);
    return t;
}

double Tensor::item() const {
    if (size() != 1) throw DimensionError("item() on tensor of shape " + shape_string(shape()));
    return data_->value[0];
}

void Tensor::zero_grad() const { std::fill(data_->grad.begin(), data_->grad.end(), 0.0); }

Tensor Tape::result(Shape shape, std::vector<double> values, std::initializer_list<Tensor> inputs) {
    return result(std::move(shape), std::move(values), std::vector<Tensor>(inputs));
}

Tensor Tape::result(Shape shape, std::vector<double> values, const std::vector<Tensor>& inputs) {
    auto out = Tensor::constant(std::move(shape), std::move(values));
    const bool tracked =
        enabled_ && std::any_of(inputs.begin(), inputs.end(), [](const Tensor& x) { return x.requires_grad(); });
    if (tracked) {
        out.data_->requires_grad = true;
        out.data_->grad.assign(out.size(), 0.0);
        intermediates_.push_back(out);
    }
    return out;
}

void Tape::record(std::function<void()> backward_fn) {
    if (enabled_) closures_.push_back(std::move(backward_fn));
}

void Tape::backward(Tensor loss) {
    if (loss.size() != 1) throw DimensionError("backward on non-scalar of shape " + shape_string(loss.shape()));
    if (!loss.requires_grad()) return;
    for (auto& x : intermediates_) x.zero_grad();
    loss.grad()[0] += 1.0;
    for (auto it = closures_.rbegin(); it != closures_.rend(); ++it) (*it)();
}

Tensor matmul(Tape& t, const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) shape_error("matmul", a.shape(), b.shape());
    const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<double> out(m * n);
    MMap(out.data(), m, n).noalias() = CMap(a.value().data(), m, k) * CMap(b.value().data(), k, n);
    auto y = t.result({m, n}, std::move(out), {a, b});
    if (y.requires_grad()) {
        t.record([a, b, y, m, k, n]() mutable {
            CMap gy(y.grad().data(), m, n);
            if (a.requires_grad()) MMap(a.grad().data(), m, k).noalias() += gy * CMap(b.value().data(), k, n).transpose();
            if (b.requires_grad()) MMap(b.grad().data(), k, n).noalias() += CMap(a.value().data(), m, k).transpose() * gy;
        });
    }
    return y;
}

Tensor bmm(Tape& t, const Tensor& a, const Tensor& b) {
    if (a.rank() != 3 || (b.rank() != 2 && b.rank() != 3)) shape_error("bmm", a.shape(), b.shape());
    const bool shared = b.rank() == 2;
    const auto batch = a.dim(0), m = a.dim(1), k = a.dim(2);
    const auto bk = shared ? b.dim(0) : b.dim(1);
    const auto n = shared ? b.dim(1) : b.dim(2);
    if (bk != k || (!shared && b.dim(0) != batch)) shape_error("bmm", a.shape(), b.shape());
    const auto b_stride = shared ? 0 : k * n;
    std::vector<double> out(batch * m * n);
    for (std::size_t s = 0; s < batch; ++s) {
        MMap(out.data() + s * m * n, m, n).noalias() =
            CMap(a.value().data() + s * m * k, m, k) * CMap(b.value().data() + s * b_stride, k, n);
    }
    auto y = t.result({batch, m, n}, std::move(out), {a, b});
    if (y.requires_grad()) {
        t.record([a, b, y, batch, m, k, n, b_stride]() mutable {
            for (std::size_t s = 0; s < batch; ++s) {
                CMap gy(y.grad().data() + s * m * n, m, n);
                if (a.requires_grad()) {
                    MMap(a.grad().data() + s * m * k, m, k).noalias() +=
                        gy * CMap(b.value().data() + s * b_stride, k, n).transpose();
                }
                if (b.requires_grad()) {
                    MMap(b.grad().data() + s * b_stride, k, n).noalias() +=
                        CMap(a.value().data() + s * m * k, m, k).transpose() * gy;
                }
            }
        });
    }
    return y;
}

Tensor transpose(Tape& t, const Tensor& a) {
    require_rank("transpose", a, 2, 3);
    const auto batch = a.rank() == 3 ? a.dim(0) : 1;
    const auto m = a.dim(a.rank() - 2), n = a.dim(a.rank() - 1);
    std::vector<double> out(a.size());
    for (std::size_t s = 0; s < batch; ++s)
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) out[s * m * n + j * m + i] = a.value()[s * m * n + i * n + j];
    Shape shape = a.shape();
    std::swap(shape[shape.size() - 1], shape[shape.size() - 2]);
    auto y = t.result(shape, std::move(out), {a});
    if (y.requires_grad()) {
        t.record([a, y, batch, m, n]() mutable {
            for (std::size_t s = 0; s < batch; ++s)
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) a.grad()[s * m * n + i * n + j] += y.grad()[s * m * n + j * m + i];
        });
    }
    return y;
}

Tensor add(Tape& t, const Tensor& a, const Tensor& b) {
    const bool broadcast = a.shape() != b.shape();
    if (broadcast && (b.rank() != 1 || a.rank() == 0 || b.dim(0) != a.shape().back())) {
        shape_error("add", a.shape(), b.shape());
    }
    const auto width = b.size();
    std::vector<double> out(a.value());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[broadcast ? i % width : i];
    auto y = t.result(a.shape(), std::move(out), {a, b});
    if (y.requires_grad()) {
        t.record([a, b, y, broadcast, width]() mutable {
            const auto& gy = y.grad();
            if (a.requires_grad())
                for (std::size_t i = 0; i < gy.size(); ++i) a.grad()[i] += gy[i];
            if (b.requires_grad())
                for (std::size_t i = 0; i < gy.size(); ++i) b.grad()[broadcast ? i % width : i] += gy[i];
        });
    }
    return y;
}

Tensor sub(Tape& t, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) shape_error("sub", a.shape(), b.shape());
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
    auto y = t.result(a.shape(), std::move(out), {a, b});
    if (y.requires_grad()) {
        t.record([a, b, y]() mutable {
            const auto& gy = y.grad();
            if (a.requires_grad())
                for (std::size_t i = 0; i < gy.size(); ++i) a.grad()[i] += gy[i];
            if (b.requires_grad())
                for (std::size_t i = 0; i < gy.size(); ++i) b.grad()[i] -= gy[i];
        });
    }
    return y;
}

Tensor mul(Tape& t, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) shape_error("mul", a.shape(), b.shape());
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
    auto y = t.result(a.shape(), std::move(out), {a, b});
    if (y.requires_grad()) {
        t.record([a, b, y]() mutable {
            const auto& gy = y.grad();
            if (a.requires_grad())
                for (std::size_t i = 0; i < gy.size(); ++i) a.grad()[i] += gy[i] * b.value()[i];
            if (b.requires_grad())
                for (std::size_t i = 0; i < gy.size(); ++i) b.grad()[i] += gy[i] * a.value()[i];
        });
    }
    return y;
}

Tensor scale(Tape& t, const Tensor& a, double c) {
    return unary(t, a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Tensor negate(Tape& t, const Tensor& a) { return scale(t, a, -1.0); }

Tensor exp(Tape& t, const Tensor& a) {
    return unary(t, a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(Tape& t, const Tensor& a) {
    return unary(t, a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor abs(Tape& t, const Tensor& a) {
    return unary(
        t, a, [](double x) { return std::abs(x); },
        [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Tensor elu(Tape& t, const Tensor& a, double alpha) {
    return unary(
        t, a, [alpha](double x) { return x > 0 ? x : alpha * std::expm1(x); },
        [alpha](double x, double y) { return x > 0 ? 1.0 : y + alpha; });
}

Tensor sum(Tape& t, const Tensor& a) {
    const double total = std::accumulate(a.value().begin(), a.value().end(), 0.0);
    auto y = t.result({}, {total}, {a});
    if (y.requires_grad()) {
        t.record([a, y]() mutable {
            const double g = y.grad()[0];
            for (auto& ga : a.grad()) ga += g;
        });
    }
    return y;
}

Tensor mean(Tape& t, const Tensor& a) {
    if (a.size() == 0) throw DimensionError("mean of empty tensor");
    return scale(t, sum(t, a), 1.0 / double(a.size()));
}

Tensor reshape(Tape& t, const Tensor& a, Shape shape) {
    if (numel(shape) != a.size()) shape_error("reshape", a.shape(), shape);
    auto y = t.result(std::move(shape), a.value(), {a});
    if (y.requires_grad()) {
        t.record([a, y]() mutable {
            for (std::size_t i = 0; i < y.size(); ++i) a.grad()[i] += y.grad()[i];
        });
    }
    return y;
}

Tensor concat(Tape& t, const std::vector<Tensor>& parts) {
    if (parts.empty()) throw DimensionError("concat of nothing");
    Shape shape = parts.front().shape();
    if (shape.empty()) throw DimensionError("concat of scalars");
    shape[0] = 0;
    std::vector<double> out;
    for (const auto& p : parts) {
        if (p.rank() != shape.size() || !std::equal(shape.begin() + 1, shape.end(), p.shape().begin() + 1)) {
            shape_error("concat", parts.front().shape(), p.shape());
        }
        shape[0] += p.dim(0);
        out.insert(out.end(), p.value().begin(), p.value().end());
    }
    auto y = t.result(shape, std::move(out), parts);
    if (y.requires_grad()) {
        t.record([parts, y]() mutable {
            std::size_t offset = 0;
            for (auto& p : parts) {
                if (p.requires_grad())
                    for (std::size_t i = 0; i < p.size(); ++i) p.grad()[i] += y.grad()[offset + i];
                offset += p.size();
            }
        });
    }
    return y;
}

Tensor layer_norm(Tape& t, const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    require_rank("layer_norm", x, 1, 3);
    const auto d = x.shape().back();
    if (gain.shape() != Shape{d} || bias.shape() != Shape{d}) shape_error("layer_norm", x.shape(), gain.shape());
    const auto rows = x.size() / d;
    std::vector<double> xhat(x.size()), inv(rows), out(x.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* in = x.value().data() + r * d;
        double mu = 0.0;
        for (std::size_t i = 0; i < d; ++i) mu += in[i];
        mu /= double(d);
        double var = 0.0;
        for (std::size_t i = 0; i < d; ++i) var += (in[i] - mu) * (in[i] - mu);
        var /= double(d);
        inv[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t i = 0; i < d; ++i) {
            xhat[r * d + i] = (in[i] - mu) * inv[r];
            out[r * d + i] = xhat[r * d + i] * gain.value()[i] + bias.value()[i];
        }
    }
    auto y = t.result(x.shape(), std::move(out), {x, gain, bias});
    if (y.requires_grad()) {
        t.record([x, gain, bias, y, xhat = std::move(xhat), inv = std::move(inv), d, rows]() mutable {
            const auto& gy = y.grad();
            std::vector<double> gxhat(d);
            for (std::size_t r = 0; r < rows; ++r) {
                double mean_g = 0.0, mean_gx = 0.0;
                for (std::size_t i = 0; i < d; ++i) {
                    const auto k = r * d + i;
                    if (gain.requires_grad()) gain.grad()[i] += gy[k] * xhat[k];
                    if (bias.requires_grad()) bias.grad()[i] += gy[k];
                    gxhat[i] = gy[k] * gain.value()[i];
                    mean_g += gxhat[i];
                    mean_gx += gxhat[i] * xhat[k];
                }
                if (!x.requires_grad()) continue;
                mean_g /= double(d);
                mean_gx /= double(d);
                for (std::size_t i = 0; i < d; ++i) {
                    const auto k = r * d + i;
                    x.grad()[k] += inv[r] * (gxhat[i] - mean_g - xhat[k] * mean_gx);
                }
            }
        });
    }
    return y;
}

Tensor row_softmax(Tape& t, const Tensor& x) {
    require_rank("row_softmax", x, 1, 3);
    std::vector<double> out(x.size());
    for_each_lane(x.shape(), false, [&](std::size_t base, std::size_t, std::size_t len) {
        const double* in = x.value().data() + base;
        const double top = *std::max_element(in, in + len);
        double total = 0.0;
        for (std::size_t i = 0; i < len; ++i) total += out[base + i] = std::exp(in[i] - top);
        for (std::size_t i = 0; i < len; ++i) out[base + i] /= total;
    });
    auto y = t.result(x.shape(), std::move(out), {x});
    if (y.requires_grad()) {
        t.record([x, y]() mutable {
            for_each_lane(x.shape(), false, [&](std::size_t base, std::size_t, std::size_t len) {
                double dot = 0.0;
                for (std::size_t i = 0; i < len; ++i) dot += y.grad()[base + i] * y.value()[base + i];
                for (std::size_t i = 0; i < len; ++i)
                    x.grad()[base + i] += y.value()[base + i] * (y.grad()[base + i] - dot);
            });
        });
    }
    return y;
}

Tensor log_normalize(Tape& t, const Tensor& x, bool columns) {
    require_rank("log_normalize", x, columns ? 2 : 1, 3);
    std::vector<double> out(x.size()), soft(x.size());
    for_each_lane(x.shape(), columns, [&](std::size_t base, std::size_t stride, std::size_t len) {
        double top = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < len; ++i) top = std::max(top, x.value()[base + i * stride]);
        double total = 0.0;
        for (std::size_t i = 0; i < len; ++i) total += std::exp(x.value()[base + i * stride] - top);
        const double lse = top + std::log(total);
        for (std::size_t i = 0; i < len; ++i) {
            const auto k = base + i * stride;
            out[k] = x.value()[k] - lse;
            soft[k] = std::exp(out[k]);
        }
    });
    auto y = t.result(x.shape(), std::move(out), {x});
    if (y.requires_grad()) {
        t.record([x, y, soft = std::move(soft), columns]() mutable {
            for_each_lane(x.shape(), columns, [&](std::size_t base, std::size_t stride, std::size_t len) {
                double total = 0.0;
                for (std::size_t i = 0; i < len; ++i) total += y.grad()[base + i * stride];
                for (std::size_t i = 0; i < len; ++i) {
                    const auto k = base + i * stride;
                    x.grad()[k] += y.grad()[k] - soft[k] * total;
                }
            });
        });
    }
    return y;
}

Tensor sort(Tape& t, const Tensor& x, bool descending) {
    require_rank("sort", x, 1, 3);
    std::vector<double> out(x.size());
    std::vector<std::size_t> source(x.size());
    std::vector<std::size_t> idx;
    for_each_lane(x.shape(), false, [&](std::size_t base, std::size_t, std::size_t len) {
        idx.resize(len);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        const double* in = x.value().data() + base;
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return descending ? in[a] > in[b] : in[a] < in[b]; });
        for (std::size_t i = 0; i < len; ++i) {
            out[base + i] = in[idx[i]];
            source[base + i] = base + idx[i];
        }
    });
    auto y = t.result(x.shape(), std::move(out), {x});
    if (y.requires_grad()) {
        t.record([x, y, source = std::move(source)]() mutable {
            for (std::size_t i = 0; i < source.size(); ++i) x.grad()[source[i]] += y.grad()[i];
        });
    }
    return y;
}

Tensor pairwise_absdiff(Tape& t, const Tensor& a, const Tensor& c) {
    if (a.rank() != 2 || c.rank() != 2 || a.dim(0) != c.dim(0)) shape_error("pairwise_absdiff", a.shape(), c.shape());
    const auto batch = a.dim(0), n = a.dim(1), m = c.dim(1);
    std::vector<double> out(batch * n * m);
    for (std::size_t s = 0; s < batch; ++s)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j)
                out[(s * n + i) * m + j] = std::abs(a.value()[s * n + i] - c.value()[s * m + j]);
    auto y = t.result({batch, n, m}, std::move(out), {a, c});
    if (y.requires_grad()) {
        t.record([a, c, y, batch, n, m]() mutable {
            for (std::size_t s = 0; s < batch; ++s)
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < m; ++j) {
                        const double diff = a.value()[s * n + i] - c.value()[s * m + j];
                        const double g = y.grad()[(s * n + i) * m + j] * (diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0));
                        if (a.requires_grad()) a.grad()[s * n + i] += g;
                        if (c.requires_grad()) c.grad()[s * m + j] -= g;
                    }
        });
    }
    return y;
}

Tensor bce_mean(Tape& t, const Tensor& pred, const Tensor& target, double clamp) {
    if (pred.shape() != target.shape()) shape_error("bce_mean", pred.shape(), target.shape());
    if (pred.size() == 0) throw DimensionError("bce_mean of empty tensor");
    const double count = double(pred.size());
    double total = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double p = std::clamp(pred.value()[i], clamp, 1.0 - clamp);
        const double y = target.value()[i];
        total -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    }
    auto out = t.result({}, {total / count}, {pred});
    if (out.requires_grad()) {
        t.record([pred, target, out, clamp, count]() mutable {
            const double g = out.grad()[0] / count;
            for (std::size_t i = 0; i < pred.size(); ++i) {
                const double p = pred.value()[i];
                if (p < clamp || p > 1.0 - clamp) continue;
                const double y = target.value()[i];
                pred.grad()[i] += g * (-y / p + (1.0 - y) / (1.0 - p));
            }
        });
    }
    return out;
}

double grad_check(const std::function<Tensor(Tape&)>& f, std::vector<Tensor> params, double eps) {
    for (auto& p : params) {
        if (!p.requires_grad()) throw ValidationError("grad_check: parameter does not require gradients");
        p.zero_grad();
    }
    {
        Tape tape;
        tape.backward(f(tape));
    }
    double worst = 0.0;
    for (auto& p : params) {
        const auto analytic = p.grad();
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double orig = p.value()[i];
            p.value()[i] = orig + eps;
            Tape up(false);
            const double fp = f(up).item();
            p.value()[i] = orig - eps;
            Tape down(false);
            const double fm = f(down).item();
            p.value()[i] = orig;
            const double numeric = (fp - fm) / (2.0 * eps);
            const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-8});
            worst = std::max(worst, std::abs(numeric - analytic[i]) / denom);
        }
    }
    return worst;
}

} // namespace mrgen::ad
