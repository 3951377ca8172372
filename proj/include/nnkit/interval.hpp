#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nnkit/network.hpp"
#include "nnkit/property.hpp"

namespace nnkit {

struct AffineLayer {
    Tensor weights;
    Vector bias;
};

// Alternating affine maps and ReLUs (no ReLU after the last map); the form a
// network takes once batch norm is folded away.
struct PiecewiseLinearNet {
    std::size_t input_dim = 0;
    std::vector<AffineLayer> layers;

    std::size_t output_dim() const { return layers.back().bias.size(); }
    std::size_t hidden_neurons() const;
    Vector evaluate(std::span<const double> x) const;
};

PiecewiseLinearNet to_piecewise_linear(const SequentialNetwork& net);

struct LayerBounds {
    Vector pre_lo, pre_hi;
    Vector post_lo, post_hi;  // equal to pre bounds for the output layer
};

// Sound interval image of the box through every layer. Each affine step is
// widened by a bound on its floating-point rounding error.
std::vector<LayerBounds> interval_forward(const PiecewiseLinearNet& net, const Box& box);

// Folds batch norm first.
std::vector<LayerBounds> interval_forward(const SequentialNetwork& net, const Box& box);

// Hidden neurons whose pre-activation interval straddles zero.
std::size_t count_unstable(const std::vector<LayerBounds>& bounds);

// Lower bound of coeffs . y over the box, computed through the last affine
// map from the penultimate post-activation bounds.
double output_lower_bound(const PiecewiseLinearNet& net, const std::vector<LayerBounds>& bounds,
                          const Box& box, std::span<const double> coeffs);

}  // namespace nnkit
