#include "nnkit/reference.hpp"

namespace nnkit::reference {

void affine(const Tensor& weights, std::span<const double> x, std::span<const double> bias,
            std::span<double> out)
{
    for (std::size_t i = 0; i < weights.rows(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < weights.cols(); ++j)
            acc += weights(i, j) * x[j];
        out[i] = acc + bias[i];
    }
}

Tensor batch_affine(const Tensor& inputs, const Tensor& weights, std::span<const double> bias)
{
    Tensor out = Tensor::matrix(inputs.rows(), weights.rows());
    for (std::size_t r = 0; r < inputs.rows(); ++r)
        affine(weights, inputs.row(r), bias, out.row(r));
    return out;
}

Tensor batch_input_gradient(const Tensor& output_grad, const Tensor& weights)
{
    Tensor dx = Tensor::matrix(output_grad.rows(), weights.cols());
    for (std::size_t r = 0; r < output_grad.rows(); ++r)
        for (std::size_t i = 0; i < weights.cols(); ++i) {
            double acc = 0.0;
            for (std::size_t o = 0; o < weights.rows(); ++o)
                acc += output_grad(r, o) * weights(o, i);
            dx(r, i) = acc;
        }
    return dx;
}

Tensor weight_gradient(const Tensor& output_grad, const Tensor& inputs)
{
    Tensor dw = Tensor::matrix(output_grad.cols(), inputs.cols());
    for (std::size_t o = 0; o < output_grad.cols(); ++o)
        for (std::size_t i = 0; i < inputs.cols(); ++i) {
            double acc = 0.0;
            for (std::size_t r = 0; r < output_grad.rows(); ++r)
                acc += output_grad(r, o) * inputs(r, i);
            dw(o, i) = acc;
        }
    return dw;
}

void interval_affine(const Tensor& weights, std::span<const double> bias,
                     std::span<const double> lo, std::span<const double> hi,
                     std::span<double> out_lo, std::span<double> out_hi)
{
    for (std::size_t i = 0; i < weights.rows(); ++i) {
        double acc_lo = 0.0;
        double acc_hi = 0.0;
        for (std::size_t j = 0; j < weights.cols(); ++j) {
            double w = weights(i, j);
            acc_lo += w >= 0.0 ? w * lo[j] : w * hi[j];
            acc_hi += w >= 0.0 ? w * hi[j] : w * lo[j];
        }
        out_lo[i] = acc_lo + bias[i];
        out_hi[i] = acc_hi + bias[i];
    }
}

}  // namespace nnkit::reference
