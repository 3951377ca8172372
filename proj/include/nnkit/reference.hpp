#pragma once

#include <span>

#include "nnkit/tensor.hpp"

// Serial reference implementations of the kernels in kernels.hpp. Kept for
// tests and benchmarks; the library itself calls the parallel versions.
namespace nnkit::reference {

void affine(const Tensor& weights, std::span<const double> x, std::span<const double> bias,
            std::span<double> out);
Tensor batch_affine(const Tensor& inputs, const Tensor& weights, std::span<const double> bias);
Tensor batch_input_gradient(const Tensor& output_grad, const Tensor& weights);
Tensor weight_gradient(const Tensor& output_grad, const Tensor& inputs);
void interval_affine(const Tensor& weights, std::span<const double> bias,
                     std::span<const double> lo, std::span<const double> hi,
                     std::span<double> out_lo, std::span<double> out_hi);

}  // namespace nnkit::reference
