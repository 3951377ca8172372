#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nnkit {

using Vector = std::vector<double>;

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Dense row-major tensor of 64-bit reals. Rank 1 holds vectors, rank 2 holds
// matrices with W(i, j) the weight from input j to output i.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor vector(std::vector<double> values);
    static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
    static Tensor identity(std::size_t n);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t rows() const;
    std::size_t cols() const;

    std::span<const double> values() const { return data_; }
    std::span<double> values() { return data_; }
    const std::vector<double>& data() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

    std::span<const double> row(std::size_t i) const;
    std::span<double> row(std::size_t i);

    bool all_finite() const;
    std::string shape_string() const;

    bool operator==(const Tensor&) const = default;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

// result_i = sum_j W(i, j) * x_j + b_i
Vector affine(const Tensor& weights, std::span<const double> x, std::span<const double> bias);

// result_i = scale_i * x_i + shift_i
Vector scale_shift(std::span<const double> scale, std::span<const double> shift,
                   std::span<const double> x);

Vector relu(std::span<const double> x);

// Smallest index attaining the maximum.
std::size_t argmax(std::span<const double> x);

void require_finite(std::span<const double> x, const std::string& what);

}  // namespace nnkit
