#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "dpgen/tensor.hpp"

// Define-by-run reverse-mode differentiation over dense tensors. Every op
// allocates a node holding its value and a closure that pushes the output
// gradient into its parents. A graph is built per evaluation and dropped
// afterwards; it is not safe to share one graph between threads.
namespace dpgen::ad {

struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;
    bool requires_grad = false;
    const char* op = "leaf";
};

class Var {
public:
    Var() = default;

    // Differentiable input; its grad is filled by backward().
    static Var leaf(Tensor value);
    // Input excluded from differentiation.
    static Var constant(Tensor value);

    const Tensor& value() const { return node_->value; }
    const Tensor& grad() const { return node_->grad; }
    const Tensor::Shape& shape() const { return node_->value.shape(); }
    double item() const { return node_->value.item(); }
    bool requires_grad() const { return node_->requires_grad; }
    bool valid() const { return node_ != nullptr; }

    const std::shared_ptr<Node>& node() const { return node_; }

    // Wraps an op result. Parents that do not require grad are kept but never visited.
    static Var make(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward_fn,
                    const char* op);

private:
    explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}
    std::shared_ptr<Node> node_;
};

// Binary elementwise ops accept equal shapes, a one-element operand on either
// side, or (add/sub/mul) a [R,C] left operand with a [C] or [1,C] right operand.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var matmul(const Var& a, const Var& b);

Var neg(const Var& x);
Var exp(const Var& x);
Var log(const Var& x);
Var square(const Var& x);
Var sqrt(const Var& x);
Var abs(const Var& x);
Var leaky_relu(const Var& x, double negative_slope = 0.01);
Var scale(const Var& x, double factor);
Var add_scalar(const Var& x, double offset);

Var sum(const Var& x);
Var mean(const Var& x);

// [B,d] -> [B], Euclidean norm of each row.
Var row_norm(const Var& x);
// [B,d] -> [B,B], Euclidean distance between every pair of rows. The
// diagonal is zero and passes no gradient.
Var pairwise_dist(const Var& x);
// Hadamard product with a fixed mask of the same shape.
Var mask_mul(const Var& x, const Tensor& mask);
// Columns [begin, begin + count) of a matrix.
Var slice_cols(const Var& x, std::size_t begin, std::size_t count);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator-(const Var& x) { return neg(x); }
inline Var operator*(const Var& x, double c) { return scale(x, c); }
inline Var operator*(double c, const Var& x) { return scale(x, c); }
inline Var operator+(const Var& x, double c) { return add_scalar(x, c); }
inline Var operator+(double c, const Var& x) { return add_scalar(x, c); }

// Fills grad of every node reachable from `loss`. All reachable grads are
// reset to zero first, so calling it twice gives the same result.
void backward(const Var& loss);

// Builds a scalar-valued graph from the given inputs.
using GraphFn = std::function<Var(std::span<const Var>)>;

// Compares backward() against central differences of `f` with step `h`.
// Returns the max over all input entries of
// |analytic - numeric| / max(1, |numeric|).
double finite_difference_check(const GraphFn& f, std::span<const Tensor> params, double h = 1e-5);

}  // namespace dpgen::ad
