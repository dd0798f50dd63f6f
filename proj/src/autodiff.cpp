#include "dpgen/autodiff.hpp"

#include <cmath>
#include <string>
#include <unordered_set>
#include <utility>

#include "dpgen/error.hpp"

namespace dpgen::ad {
namespace {

enum class Broadcast { same, scalar_right, scalar_left, row_right };

Broadcast classify(const char* op, const Tensor& a, const Tensor& b, bool allow_rows) {
    if (a.shape() == b.shape()) {
        return Broadcast::same;
    }
    if (b.size() == 1) {
        return Broadcast::scalar_right;
    }
    if (a.size() == 1) {
        return Broadcast::scalar_left;
    }
    if (allow_rows && a.rank() == 2) {
        const std::size_t c = a.shape()[1];
        const bool row_vec = (b.rank() == 1 && b.shape()[0] == c) ||
                             (b.rank() == 2 && b.shape()[0] == 1 && b.shape()[1] == c);
        if (row_vec) {
            return Broadcast::row_right;
        }
    }
    throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_str() + " and " + b.shape_str());
}

struct IndexMap {
    Broadcast kind;
    std::size_t cols;
    std::size_t left(std::size_t i) const { return kind == Broadcast::scalar_left ? 0 : i; }
    std::size_t right(std::size_t i) const {
        switch (kind) {
            case Broadcast::scalar_right:
                return 0;
            case Broadcast::row_right:
                return i % cols;
            default:
                return i;
        }
    }
};

// Elementwise binary op. `fwd(x, y)` gives the value; `dx(x, y)` and
// `dy(x, y)` the local partials.
template <typename Fwd, typename Dx, typename Dy>
Var binary(const char* op, const Var& a, const Var& b, bool allow_rows, Fwd fwd, Dx dx, Dy dy) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const Broadcast kind = classify(op, av, bv, allow_rows);
    const IndexMap map{kind, kind == Broadcast::row_right ? av.shape()[1] : 0};
    Tensor out(kind == Broadcast::scalar_left ? bv.shape() : av.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = fwd(av[map.left(i)], bv[map.right(i)]);
    }
    return Var::make(std::move(out), {a, b},
                     [map, dx, dy](Node& self) {
                         Node& pa = *self.parents[0];
                         Node& pb = *self.parents[1];
                         for (std::size_t i = 0; i < self.grad.size(); ++i) {
                             const double g = self.grad[i];
                             const double x = pa.value[map.left(i)];
                             const double y = pb.value[map.right(i)];
                             if (pa.requires_grad) {
                                 pa.grad[map.left(i)] += g * dx(x, y);
                             }
                             if (pb.requires_grad) {
                                 pb.grad[map.right(i)] += g * dy(x, y);
                             }
                         }
                     },
                     op);
}

// Elementwise unary op with local derivative `dfdx(x, y)` given input x and output y.
template <typename Fwd, typename Deriv>
Var unary(const char* op, const Var& x, Fwd fwd, Deriv dfdx) {
    const Tensor& xv = x.value();
    Tensor out(xv.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = fwd(xv[i]);
    }
    return Var::make(std::move(out), {x},
                     [dfdx](Node& self) {
                         Node& p = *self.parents[0];
                         for (std::size_t i = 0; i < self.grad.size(); ++i) {
                             p.grad[i] += self.grad[i] * dfdx(p.value[i], self.value[i]);
                         }
                     },
                     op);
}

const Tensor& require_matrix(const char* op, const Var& x) {
    if (x.value().rank() != 2) {
        throw ShapeError(std::string(op) + ": expected a matrix, got " + x.value().shape_str());
    }
    return x.value();
}

}  // namespace

Var Var::leaf(Tensor value) {
    auto node = std::make_shared<Node>();
    node->grad = Tensor::zeros_like(value);
    node->value = std::move(value);
    node->requires_grad = true;
    return Var(std::move(node));
}

Var Var::constant(Tensor value) {
    auto node = std::make_shared<Node>();
    node->grad = Tensor::zeros_like(value);
    node->value = std::move(value);
    node->op = "constant";
    return Var(std::move(node));
}

Var Var::make(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward_fn, const char* op) {
    auto node = std::make_shared<Node>();
    node->grad = Tensor::zeros_like(value);
    node->value = std::move(value);
    node->op = op;
    for (auto& p : parents) {
        node->requires_grad = node->requires_grad || p.requires_grad();
        node->parents.push_back(p.node_);
    }
    if (node->requires_grad) {
        node->backward_fn = std::move(backward_fn);
    }
    return Var(std::move(node));
}

Var add(const Var& a, const Var& b) {
    return binary(
        "add", a, b, true, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
        [](double, double) { return 1.0; });
}

Var sub(const Var& a, const Var& b) {
    return binary(
        "sub", a, b, true, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
        [](double, double) { return -1.0; });
}

Var mul(const Var& a, const Var& b) {
    return binary(
        "mul", a, b, true, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
        [](double x, double) { return x; });
}

Var matmul(const Var& a, const Var& b) {
    const Tensor& av = require_matrix("matmul", a);
    const Tensor& bv = require_matrix("matmul", b);
    const std::size_t m = av.rows();
    const std::size_t k = av.cols();
    const std::size_t n = bv.cols();
    if (bv.rows() != k) {
        throw ShapeError("matmul: incompatible shapes " + av.shape_str() + " and " + bv.shape_str());
    }
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = av(i, p);
            for (std::size_t j = 0; j < n; ++j) {
                out(i, j) += aip * bv(p, j);
            }
        }
    }
    return Var::make(std::move(out), {a, b},
                     [m, k, n](Node& self) {
                         Node& pa = *self.parents[0];
                         Node& pb = *self.parents[1];
                         const Tensor& g = self.grad;
                         if (pa.requires_grad) {
                             // dA = G * B^T
                             for (std::size_t i = 0; i < m; ++i) {
                                 for (std::size_t p = 0; p < k; ++p) {
                                     double acc = 0.0;
                                     for (std::size_t j = 0; j < n; ++j) {
                                         acc += g(i, j) * pb.value(p, j);
                                     }
                                     pa.grad(i, p) += acc;
                                 }
                             }
                         }
                         if (pb.requires_grad) {
                             // dB = A^T * G
                             for (std::size_t i = 0; i < m; ++i) {
                                 for (std::size_t p = 0; p < k; ++p) {
                                     const double aip = pa.value(i, p);
                                     for (std::size_t j = 0; j < n; ++j) {
                                         pb.grad(p, j) += aip * g(i, j);
                                     }
                                 }
                             }
                         }
                     },
                     "matmul");
}

Var neg(const Var& x) {
    return unary(
        "neg", x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Var exp(const Var& x) {
    return unary(
        "exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var log(const Var& x) {
    for (double v : x.value().data()) {
        if (!(v > 0.0)) {
            throw DomainError("log: non-positive input " + std::to_string(v));
        }
    }
    return unary(
        "log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Var square(const Var& x) {
    return unary(
        "square", x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Var sqrt(const Var& x) {
    for (double v : x.value().data()) {
        if (v < 0.0) {
            throw DomainError("sqrt: negative input " + std::to_string(v));
        }
    }
    return unary(
        "sqrt", x, [](double v) { return std::sqrt(v); }, [](double, double y) { return 0.5 / y; });
}

Var abs(const Var& x) {
    return unary(
        "abs", x, [](double v) { return std::abs(v); },
        [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Var leaky_relu(const Var& x, double negative_slope) {
    return unary(
        "leaky_relu", x, [negative_slope](double v) { return v > 0.0 ? v : negative_slope * v; },
        [negative_slope](double v, double) { return v > 0.0 ? 1.0 : negative_slope; });
}

Var scale(const Var& x, double factor) {
    return unary(
        "scale", x, [factor](double v) { return factor * v; }, [factor](double, double) { return factor; });
}

Var add_scalar(const Var& x, double offset) {
    return unary(
        "add_scalar", x, [offset](double v) { return v + offset; }, [](double, double) { return 1.0; });
}

Var sum(const Var& x) {
    double total = 0.0;
    for (double v : x.value().data()) {
        total += v;
    }
    return Var::make(Tensor::scalar(total), {x},
                     [](Node& self) {
                         Node& p = *self.parents[0];
                         const double g = self.grad[0];
                         for (std::size_t i = 0; i < p.grad.size(); ++i) {
                             p.grad[i] += g;
                         }
                     },
                     "sum");
}

Var mean(const Var& x) {
    const std::size_t n = x.value().size();
    if (n == 0) {
        throw ShapeError("mean: empty tensor");
    }
    return scale(sum(x), 1.0 / static_cast<double>(n));
}

Var row_norm(const Var& x) {
    const Tensor& xv = require_matrix("row_norm", x);
    const std::size_t rows = xv.rows();
    Tensor out({rows});
    for (std::size_t i = 0; i < rows; ++i) {
        double acc = 0.0;
        for (double v : xv.row(i)) {
            acc += v * v;
        }
        out[i] = std::sqrt(acc);
    }
    return Var::make(std::move(out), {x},
                     [](Node& self) {
                         Node& p = *self.parents[0];
                         const std::size_t cols = p.value.cols();
                         for (std::size_t i = 0; i < self.value.size(); ++i) {
                             const double norm = self.value[i];
                             if (norm == 0.0) {
                                 continue;
                             }
                             const double g = self.grad[i] / norm;
                             for (std::size_t c = 0; c < cols; ++c) {
                                 p.grad(i, c) += g * p.value(i, c);
                             }
                         }
                     },
                     "row_norm");
}

Var pairwise_dist(const Var& x) {
    const Tensor& xv = require_matrix("pairwise_dist", x);
    const std::size_t n = xv.rows();
    const std::size_t d = xv.cols();
    Tensor out({n, n});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = xv(i, c) - xv(j, c);
                acc += diff * diff;
            }
            const double dist = std::sqrt(acc);
            out(i, j) = dist;
            out(j, i) = dist;
        }
    }
    return Var::make(std::move(out), {x},
                     [n, d](Node& self) {
                         Node& p = *self.parents[0];
                         for (std::size_t i = 0; i < n; ++i) {
                             for (std::size_t j = i + 1; j < n; ++j) {
                                 const double dist = self.value(i, j);
                                 if (dist == 0.0) {
                                     continue;
                                 }
                                 const double g = (self.grad(i, j) + self.grad(j, i)) / dist;
                                 for (std::size_t c = 0; c < d; ++c) {
                                     const double step = g * (p.value(i, c) - p.value(j, c));
                                     p.grad(i, c) += step;
                                     p.grad(j, c) -= step;
                                 }
                             }
                         }
                     },
                     "pairwise_dist");
}

Var mask_mul(const Var& x, const Tensor& mask) {
    if (x.value().shape() != mask.shape()) {
        throw ShapeError("mask_mul: incompatible shapes " + x.value().shape_str() + " and " + mask.shape_str());
    }
    Tensor out(x.value().shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = x.value()[i] * mask[i];
    }
    return Var::make(std::move(out), {x},
                     [mask](Node& self) {
                         Node& p = *self.parents[0];
                         for (std::size_t i = 0; i < self.grad.size(); ++i) {
                             p.grad[i] += self.grad[i] * mask[i];
                         }
                     },
                     "mask_mul");
}

Var slice_cols(const Var& x, std::size_t begin, std::size_t count) {
    const Tensor& xv = require_matrix("slice_cols", x);
    if (begin + count > xv.cols()) {
        throw ShapeError("slice_cols: columns [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of range for " + xv.shape_str());
    }
    const std::size_t rows = xv.rows();
    Tensor out({rows, count});
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < count; ++c) {
            out(r, c) = xv(r, begin + c);
        }
    }
    return Var::make(std::move(out), {x},
                     [begin, count](Node& self) {
                         Node& p = *self.parents[0];
                         const std::size_t rows = self.value.shape()[0];
                         for (std::size_t r = 0; r < rows; ++r) {
                             for (std::size_t c = 0; c < count; ++c) {
                                 p.grad(r, begin + c) += self.grad(r, c);
                             }
                         }
                     },
                     "slice_cols");
}

void backward(const Var& loss) {
    if (!loss.valid() || loss.value().size() != 1) {
        throw ShapeError("backward: loss must be scalar, got " + loss.value().shape_str());
    }
    // Iterative post-order DFS gives a topological order over grad-requiring nodes.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    Node* root = loss.node().get();
    if (!root->requires_grad) {
        return;
    }
    stack.emplace_back(root, 0);
    visited.insert(root);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (parent->requires_grad && visited.insert(parent).second) {
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    for (Node* node : order) {
        node->grad.fill(0.0);
    }
    root->grad.fill(1.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backward_fn) {
            (*it)->backward_fn(**it);
        }
    }
}

double finite_difference_check(const GraphFn& f, std::span<const Tensor> params, double h) {
    if (!(h > 0.0)) {
        throw ConfigError("finite_difference_check: step must be positive");
    }
    std::vector<Var> leaves;
    leaves.reserve(params.size());
    for (const auto& p : params) {
        leaves.push_back(Var::leaf(p));
    }
    const Var loss = f(leaves);
    if (!std::isfinite(loss.item())) {
        throw NumericError("finite_difference_check: non-finite function value");
    }
    backward(loss);

    std::vector<Tensor> shifted(params.begin(), params.end());
    auto evaluate = [&]() {
        std::vector<Var> inputs;
        inputs.reserve(shifted.size());
        for (const auto& t : shifted) {
            inputs.push_back(Var::constant(t));
        }
        const double value = f(inputs).item();
        if (!std::isfinite(value)) {
            throw NumericError("finite_difference_check: non-finite function value");
        }
        return value;
    };

    double worst = 0.0;
    for (std::size_t p = 0; p < params.size(); ++p) {
        for (std::size_t i = 0; i < params[p].size(); ++i) {
            const double original = params[p][i];
            shifted[p][i] = original + h;
            const double up = evaluate();
            shifted[p][i] = original - h;
            const double down = evaluate();
            shifted[p][i] = original;
            const double numeric = (up - down) / (2.0 * h);
            const double analytic = leaves[p].grad()[i];
            worst = std::max(worst, std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric)));
        }
    }
    return worst;
}

}  // namespace dpgen::ad
