#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace dpgen {

// Dense row-major array of doubles. Rank 0 is a scalar holding one value.
class Tensor {
public:
    using Shape = std::vector<std::size_t>;

    Tensor() : data_(1, 0.0) {}
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor scalar(double value) { return Tensor({}, {value}); }
    static Tensor vector(std::vector<double> values);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
    static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    // Matrix views; rows()/cols() require rank 2.
    std::size_t rows() const;
    std::size_t cols() const;

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }
    std::span<const double> row(std::size_t r) const;
    std::span<double> row(std::size_t r);

    // Value of a one-element tensor.
    double item() const;

    void fill(double value);
    bool all_finite() const;

    // Rows selected by index, in the given order.
    Tensor gather_rows(std::span<const std::size_t> indices) const;

    std::string shape_str() const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

std::string shape_to_string(const Tensor::Shape& shape);

}  // namespace dpgen
