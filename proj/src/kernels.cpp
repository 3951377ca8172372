#include "nnkit/kernels.hpp"

#include <cstddef>

namespace nnkit::kernels {

namespace {

// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::ptrdiff_t kParallelWork = 1 << 14;

}  // namespace

void affine(const Tensor& weights, std::span<const double> x, std::span<const double> bias,
            std::span<double> out)
{
    const auto rows = static_cast<std::ptrdiff_t>(weights.rows());
    const std::size_t cols = weights.cols();
    const double* w = weights.values().data();
#pragma omp parallel for schedule(static) if (rows * static_cast<std::ptrdiff_t>(cols) > kParallelWork)
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
        const double* wr = w + i * cols;
        double acc = 0.0;
        for (std::size_t j = 0; j < cols; ++j)
            acc += wr[j] * x[j];
        out[i] = acc + bias[i];
    }
}

Tensor batch_affine(const Tensor& inputs, const Tensor& weights, std::span<const double> bias)
{
    const auto batch = static_cast<std::ptrdiff_t>(inputs.rows());
    const std::size_t in = weights.cols();
    const std::size_t out_dim = weights.rows();
    Tensor out = Tensor::matrix(inputs.rows(), out_dim);
    const double* x = inputs.values().data();
    const double* w = weights.values().data();
    double* z = out.values().data();
#pragma omp parallel for schedule(static) \
    if (batch * static_cast<std::ptrdiff_t>(in * out_dim) > kParallelWork)
    for (std::ptrdiff_t r = 0; r < batch; ++r) {
        const double* xr = x + r * in;
        for (std::size_t o = 0; o < out_dim; ++o) {
            const double* wr = w + o * in;
            double acc = 0.0;
            for (std::size_t i = 0; i < in; ++i)
                acc += wr[i] * xr[i];
            z[r * out_dim + o] = acc + bias[o];
        }
    }
    return out;
}

Tensor batch_input_gradient(const Tensor& output_grad, const Tensor& weights)
{
    const auto batch = static_cast<std::ptrdiff_t>(output_grad.rows());
    const std::size_t out_dim = weights.rows();
    const std::size_t in = weights.cols();
    Tensor dx = Tensor::matrix(output_grad.rows(), in);
    const double* dz = output_grad.values().data();
    const double* w = weights.values().data();
    double* g = dx.values().data();
#pragma omp parallel for schedule(static) \
    if (batch * static_cast<std::ptrdiff_t>(in * out_dim) > kParallelWork)
    for (std::ptrdiff_t r = 0; r < batch; ++r) {
        for (std::size_t i = 0; i < in; ++i) {
            double acc = 0.0;
            for (std::size_t o = 0; o < out_dim; ++o)
                acc += dz[r * out_dim + o] * w[o * in + i];
            g[r * in + i] = acc;
        }
    }
    return dx;
}

Tensor weight_gradient(const Tensor& output_grad, const Tensor& inputs)
{
    const std::size_t batch = output_grad.rows();
    const auto out_dim = static_cast<std::ptrdiff_t>(output_grad.cols());
    const std::size_t in = inputs.cols();
    Tensor dw = Tensor::matrix(static_cast<std::size_t>(out_dim), in);
    const double* dz = output_grad.values().data();
    const double* x = inputs.values().data();
    double* g = dw.values().data();
#pragma omp parallel for schedule(static) \
    if (out_dim * static_cast<std::ptrdiff_t>(in * batch) > kParallelWork)
    for (std::ptrdiff_t o = 0; o < out_dim; ++o) {
        for (std::size_t i = 0; i < in; ++i) {
            double acc = 0.0;
            for (std::size_t r = 0; r < batch; ++r)
                acc += dz[r * out_dim + o] * x[r * in + i];
            g[o * in + i] = acc;
        }
    }
    return dw;
}

void interval_affine(const Tensor& weights, std::span<const double> bias,
                     std::span<const double> lo, std::span<const double> hi,
                     std::span<double> out_lo, std::span<double> out_hi)
{
    const auto rows = static_cast<std::ptrdiff_t>(weights.rows());
    const std::size_t cols = weights.cols();
    const double* w = weights.values().data();
#pragma omp parallel for schedule(static) if (rows * static_cast<std::ptrdiff_t>(cols) > kParallelWork)
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
        const double* wr = w + i * cols;
        double acc_lo = 0.0;
        double acc_hi = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            const double wij = wr[j];
            if (wij >= 0.0) {
                acc_lo += wij * lo[j];
                acc_hi += wij * hi[j];
            } else {
                acc_lo += wij * hi[j];
                acc_hi += wij * lo[j];
            }
        }
        out_lo[i] = acc_lo + bias[i];
        out_hi[i] = acc_hi + bias[i];
    }
}

}  // namespace nnkit::kernels
