#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "vjscc/errors.hpp"

namespace vjscc {

namespace detail {

// One recorded value in the tape. Gradients accumulate into `grad` during the
// reverse pass; `backward_fn` reads this node's grad and pushes contributions
// into its parents.
struct Node {
    std::vector<size_t> shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    size_t numel() const { return data.size(); }
    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
};

}  // namespace detail

// Dense row-major 64-bit tensor with reverse-mode differentiation.
// Copying a Tensor copies a handle to the same node; graphs are built eagerly
// by the free functions below and torn down when the handles go out of scope.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<size_t> shape);
    static Tensor full(std::vector<size_t> shape, double value);
    static Tensor from_data(std::vector<size_t> shape, std::vector<double> data);
    static Tensor scalar(double value);
    // leaf with requires_grad set; the usual constructor for parameters
    static Tensor param(std::vector<size_t> shape, std::vector<double> data);

    bool defined() const { return node_ != nullptr; }
    const std::vector<size_t>& shape() const { return node_->shape; }
    size_t ndim() const { return node_->shape.size(); }
    size_t numel() const { return node_->data.size(); }
    size_t dim(size_t i) const { return node_->shape[i]; }

    const std::vector<double>& values() const { return node_->data; }
    std::vector<double>& values() { return node_->data; }
    double item() const;

    bool requires_grad() const { return node_->requires_grad; }
    Tensor& set_requires_grad(bool v) {
        node_->requires_grad = v;
        return *this;
    }

    bool has_grad() const { return !node_->grad.empty(); }
    // Gradient of the last backward() that reached this tensor; zeros if none.
    std::vector<double> grad() const;

    detail::Node* node() const { return node_.get(); }
    std::shared_ptr<detail::Node> node_ptr() const { return node_; }

    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

private:
    std::shared_ptr<detail::Node> node_;
};

// Low-level constructor for differentiable ops: records parents and a backward
// callback. Used by the ops in this module and by modules that define their
// own primitives (e.g. power normalization in the channel).
Tensor make_op(const std::vector<Tensor>& parents, std::vector<size_t> shape,
               std::vector<double> data, std::function<void(detail::Node&)> backward_fn);

// ---- elementwise / arithmetic ----
// For add/sub/mul, `b` may broadcast into `a`: after left-padding b's shape
// with 1s, every dimension must equal a's or be 1. Result has a's shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor gelu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// ---- linear algebra ----
// a: [batch..., m, k], b: [k, n] or [batch..., k, n] with equal batch dims.
Tensor matmul(const Tensor& a, const Tensor& b);
// x: [..., in] -> [..., out] with weight [in, out] and bias [out].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

// ---- normalization / reductions ----
Tensor softmax(const Tensor& x, size_t axis);
// Normalizes over the last dimension; gain/bias have that dimension's length.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps);
Tensor sum_all(const Tensor& x);   // -> shape [1]
Tensor mean_all(const Tensor& x);  // -> shape [1]
Tensor mean_axis(const Tensor& x, size_t axis);  // keeps the axis with size 1

// ---- shape / data movement ----
Tensor reshape(const Tensor& x, std::vector<size_t> shape);
Tensor transpose_axes(const Tensor& x, const std::vector<size_t>& perm);
Tensor concat(const Tensor& a, const Tensor& b, size_t axis);
Tensor broadcast_axis(const Tensor& x, size_t axis, size_t n);
Tensor slice(const Tensor& x, size_t axis, size_t start, size_t stop);
// Rows are slices along axis 0.
Tensor gather(const Tensor& x, const std::vector<size_t>& indices);
Tensor scatter_zeros(const Tensor& x, const std::vector<size_t>& indices, size_t dim0);
// out.flat[i] = x.flat[source_index[i]]; source_index must be a bijection.
Tensor apply_permutation(const Tensor& x, const std::vector<size_t>& source_index,
                         std::vector<size_t> out_shape);

// Constant copy that blocks gradient flow.
Tensor detach(const Tensor& x);

// Reverse pass from a scalar loss. Resets gradients of every node reachable
// from `loss` and then accumulates; repeated calls on the same graph produce
// bit-identical gradients.
void backward(const Tensor& loss);

}  // namespace vjscc
