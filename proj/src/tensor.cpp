#include "dpgen/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "dpgen/error.hpp"

namespace dpgen {
namespace {

std::size_t element_count(const Tensor::Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != element_count(shape_)) {
        throw ShapeError("tensor: shape " + shape_to_string(shape_) + " does not match " +
                         std::to_string(data_.size()) + " values");
    }
}

Tensor Tensor::vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    return Tensor({rows, cols}, std::move(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> values;
    values.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) {
            throw ShapeError("tensor: ragged matrix literal");
        }
        values.insert(values.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(values));
}

std::size_t Tensor::rows() const {
    if (rank() != 2) {
        throw ShapeError("tensor: expected a matrix, got shape " + shape_str());
    }
    return shape_[0];
}

std::size_t Tensor::cols() const {
    if (rank() != 2) {
        throw ShapeError("tensor: expected a matrix, got shape " + shape_str());
    }
    return shape_[1];
}

std::span<const double> Tensor::row(std::size_t r) const {
    const std::size_t c = cols();
    return std::span<const double>(data_).subspan(r * c, c);
}

std::span<double> Tensor::row(std::size_t r) {
    const std::size_t c = cols();
    return std::span<double>(data_).subspan(r * c, c);
}

double Tensor::item() const {
    if (data_.size() != 1) {
        throw ShapeError("tensor: item() on shape " + shape_str());
    }
    return data_[0];
}

void Tensor::fill(double value) {
    std::fill(data_.begin(), data_.end(), value);
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor Tensor::gather_rows(std::span<const std::size_t> indices) const {
    const std::size_t c = cols();
    Tensor out({indices.size(), c});
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= shape_[0]) {
            throw ShapeError("tensor: row index " + std::to_string(indices[i]) + " out of range for " +
                             shape_str());
        }
        const auto src = row(indices[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

std::string Tensor::shape_str() const {
    return shape_to_string(shape_);
}

std::string shape_to_string(const Tensor::Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) {
            s += ",";
        }
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

}  // namespace dpgen
