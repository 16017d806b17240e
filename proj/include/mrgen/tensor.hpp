#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

namespace mrgen::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Shared handle to a dense row-major tensor of doubles. Copies alias the
/// same storage.
class Tensor {
public:
    Tensor() = default;

    static Tensor constant(Shape shape, std::vector<double> values);
    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor parameter(Shape shape, std::vector<double> values);
    static Tensor scalar(double v) { return constant({}, {v}); }

    const Shape& shape() const { return data_->shape; }
    std::size_t rank() const { return data_->shape.size(); }
    std::size_t dim(std::size_t i) const { return data_->shape.at(i); }
    std::size_t size() const { return data_->value.size(); }

    std::vector<double>& value() { return data_->value; }
    const std::vector<double>& value() const { return data_->value; }
    /// Gradients are writable through any handle; backward closures hold
    /// const copies.
    std::vector<double>& grad() const { return data_->grad; }
    double item() const;

    bool requires_grad() const { return data_->requires_grad; }
    void zero_grad() const;

    bool defined() const { return data_ != nullptr; }
    bool same(const Tensor& other) const { return data_ == other.data_; }

private:
    struct Data {
        Shape shape;
        std::vector<double> value;
        std::vector<double> grad;
        bool requires_grad = false;
    };
    std::shared_ptr<Data> data_;

    friend class Tape;
};

/// Records the backward closures of every op applied through it. A disabled
/// tape computes values only.
class Tape {
public:
    explicit Tape(bool enabled = true) : enabled_(enabled) {}

    bool enabled() const { return enabled_; }

    /// New result tensor; tracks gradients iff the tape is enabled and any
    /// input does.
    Tensor result(Shape shape, std::vector<double> values, std::initializer_list<Tensor> inputs);
    Tensor result(Shape shape, std::vector<double> values, const std::vector<Tensor>& inputs);

    void record(std::function<void()> backward_fn);

    /// Zeroes intermediate gradients, seeds d(loss)/d(loss) = 1 and runs the
    /// recorded closures in reverse. Parameter gradients accumulate.
    void backward(Tensor loss);

    std::size_t size() const { return closures_.size(); }

private:
    bool enabled_;
    std::vector<std::function<void()>> closures_;
    std::vector<Tensor> intermediates_;
};

// Linear algebra
Tensor matmul(Tape& t, const Tensor& a, const Tensor& b);
/// [B,m,k] x [B,k,n] or [B,m,k] x [k,n].
Tensor bmm(Tape& t, const Tensor& a, const Tensor& b);
/// Swaps the last two axes (rank 2 or 3).
Tensor transpose(Tape& t, const Tensor& a);

// Elementwise
/// Same shapes, or b of rank 1 broadcast along a's last axis.
Tensor add(Tape& t, const Tensor& a, const Tensor& b);
Tensor sub(Tape& t, const Tensor& a, const Tensor& b);
Tensor mul(Tape& t, const Tensor& a, const Tensor& b);
Tensor scale(Tape& t, const Tensor& a, double c);
Tensor negate(Tape& t, const Tensor& a);
Tensor exp(Tape& t, const Tensor& a);
Tensor log(Tape& t, const Tensor& a);
Tensor abs(Tape& t, const Tensor& a);
Tensor elu(Tape& t, const Tensor& a, double alpha = 1.0);

// Reductions and shape
Tensor sum(Tape& t, const Tensor& a);
Tensor mean(Tape& t, const Tensor& a);
Tensor reshape(Tape& t, const Tensor& a, Shape shape);
/// Concatenation along axis 0.
Tensor concat(Tape& t, const std::vector<Tensor>& parts);

// Normalization over the last axis
Tensor layer_norm(Tape& t, const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
Tensor row_softmax(Tape& t, const Tensor& x);
/// x - logsumexp(x) along the last axis (rows) or the second-to-last (columns).
Tensor log_normalize(Tape& t, const Tensor& x, bool columns);

// Sorting
/// Sorts along the last axis; gradients flow back to the source positions.
Tensor sort(Tape& t, const Tensor& x, bool descending);
/// out[b][i][j] = |a[b][i] - c[b][j]| for a, c of shape [B,n].
Tensor pairwise_absdiff(Tape& t, const Tensor& a, const Tensor& c);

/// Mean binary cross-entropy of pred against a constant target, with pred
/// clamped to [clamp, 1 - clamp].
Tensor bce_mean(Tape& t, const Tensor& pred, const Tensor& target, double clamp = 1e-7);

/// Largest relative difference between tape gradients and central finite
/// differences over every coordinate of `params`. Relative error uses the
/// denominator max(|a|, |b|, 1e-8). `f` must be deterministic.
double grad_check(const std::function<Tensor(Tape&)>& f, std::vector<Tensor> params, double eps = 1e-5);

} // namespace mrgen::ad
