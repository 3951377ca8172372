#include "nnkit/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "nnkit/kernels.hpp"

namespace nnkit {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape)
{
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void check_shape(const std::vector<std::size_t>& shape)
{
    if (shape.empty())
        throw ShapeError("tensor shape must have at least one dimension");
    for (auto d : shape)
        if (d == 0)
            throw ShapeError("tensor dimensions must be positive");
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape))
{
    check_shape(shape_);
    data_.assign(shape_product(shape_), fill);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data))
{
    check_shape(shape_);
    if (shape_product(shape_) != data_.size())
        throw ShapeError("tensor of shape " + shape_string() + " cannot hold " +
                         std::to_string(data_.size()) + " values");
    require_finite(data_, "tensor data");
}

Tensor Tensor::vector(std::vector<double> values)
{
    std::size_t n = values.size();
    return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, double fill)
{
    return Tensor({rows, cols}, fill);
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows)
{
    std::size_t r = rows.size();
    std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c)
            throw ShapeError("ragged matrix literal");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(data));
}

Tensor Tensor::identity(std::size_t n)
{
    Tensor t = matrix(n, n);
    for (std::size_t i = 0; i < n; ++i)
        t(i, i) = 1.0;
    return t;
}

std::size_t Tensor::rows() const
{
    return shape_.empty() ? 0 : shape_[0];
}

std::size_t Tensor::cols() const
{
    if (shape_.size() == 1)
        return 1;
    return shape_.size() >= 2 ? shape_[1] : 0;
}

std::span<const double> Tensor::row(std::size_t i) const
{
    std::size_t c = cols();
    return std::span<const double>(data_).subspan(i * c, c);
}

std::span<double> Tensor::row(std::size_t i)
{
    std::size_t c = cols();
    return std::span<double>(data_).subspan(i * c, c);
}

bool Tensor::all_finite() const
{
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Tensor::shape_string() const
{
    std::string s = "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i)
            s += "x";
        s += std::to_string(shape_[i]);
    }
    return s + "]";
}

void require_finite(std::span<const double> x, const std::string& what)
{
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!std::isfinite(x[i]))
            throw NumericError(what + ": non-finite value at index " + std::to_string(i));
}

Vector affine(const Tensor& weights, std::span<const double> x, std::span<const double> bias)
{
    if (weights.rank() != 2)
        throw ShapeError("affine: weights must be a matrix, got shape " + weights.shape_string());
    if (weights.cols() != x.size())
        throw ShapeError("affine: weights have " + std::to_string(weights.cols()) +
                         " columns but input has length " + std::to_string(x.size()));
    if (weights.rows() != bias.size())
        throw ShapeError("affine: weights have " + std::to_string(weights.rows()) +
                         " rows but bias has length " + std::to_string(bias.size()));
    Vector out(weights.rows());
    kernels::affine(weights, x, bias, out);
    require_finite(out, "affine result");
    return out;
}

Vector scale_shift(std::span<const double> scale, std::span<const double> shift,
                   std::span<const double> x)
{
    if (scale.size() != x.size() || shift.size() != x.size())
        throw ShapeError("scale_shift: lengths " + std::to_string(scale.size()) + ", " +
                         std::to_string(shift.size()) + ", " + std::to_string(x.size()) +
                         " disagree");
    Vector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = scale[i] * x[i] + shift[i];
    require_finite(out, "scale_shift result");
    return out;
}

Vector relu(std::span<const double> x)
{
    Vector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = x[i] > 0.0 ? x[i] : 0.0;
    return out;
}

std::size_t argmax(std::span<const double> x)
{
    if (x.empty())
        throw ShapeError("argmax of an empty vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < x.size(); ++i)
        if (x[i] > x[best])
            best = i;
    return best;
}

}  // namespace nnkit
