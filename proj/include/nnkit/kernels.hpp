#pragma once

#include <span>

#include "nnkit/tensor.hpp"

// OpenMP data-parallel kernels. Every kernel parallelizes over independent
// output entries and keeps each entry's reduction in a fixed serial order, so
// results are bit-identical to the serial versions in reference.hpp for any
// thread count.
namespace nnkit::kernels {

// out_i = sum_j W(i, j) x_j + b_i. Shapes are assumed checked by the caller.
void affine(const Tensor& weights, std::span<const double> x, std::span<const double> bias,
            std::span<double> out);

// Row-wise affine over a batch: Z(r, o) = sum_i X(r, i) W(o, i) + b_o.
Tensor batch_affine(const Tensor& inputs, const Tensor& weights, std::span<const double> bias);

// dX(r, i) = sum_o dZ(r, o) W(o, i).
Tensor batch_input_gradient(const Tensor& output_grad, const Tensor& weights);

// dW(o, i) = sum_r dZ(r, o) X(r, i).
Tensor weight_gradient(const Tensor& output_grad, const Tensor& inputs);

// Interval image of an affine map: positive weights pair lo with lo, negative
// weights pair lo with hi.
void interval_affine(const Tensor& weights, std::span<const double> bias,
                     std::span<const double> lo, std::span<const double> hi,
                     std::span<double> out_lo, std::span<double> out_hi);

}  // namespace nnkit::kernels
