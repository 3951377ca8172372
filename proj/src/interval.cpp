#include "nnkit/interval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nnkit/kernels.hpp"

namespace nnkit {

namespace {

constexpr double kUnitRoundoff = std::numeric_limits<double>::epsilon() / 2.0;

// Rounding error of an n-term dot product plus bias is at most
// gamma_{n+1} * sum |w||x| + |b|; doubled to also cover the concrete forward.
double rounding_slack(std::span<const double> w_row, std::span<const double> lo,
                      std::span<const double> hi, double bias)
{
    double mag = std::abs(bias);
    for (std::size_t j = 0; j < w_row.size(); ++j)
        mag += std::abs(w_row[j]) * std::max(std::abs(lo[j]), std::abs(hi[j]));
    const double n = static_cast<double>(w_row.size() + 2);
    return 2.0 * n * kUnitRoundoff * mag / (1.0 - n * kUnitRoundoff) +
           std::numeric_limits<double>::denorm_min();
}

}  // namespace

std::size_t PiecewiseLinearNet::hidden_neurons() const
{
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < layers.size(); ++l)
        n += layers[l].bias.size();
    return n;
}

Vector PiecewiseLinearNet::evaluate(std::span<const double> x) const
{
    Vector h(x.begin(), x.end());
    Vector next;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        next.resize(layer.bias.size());
        kernels::affine(layer.weights, h, layer.bias, next);
        if (l + 1 < layers.size())
            for (double& v : next)
                v = v > 0.0 ? v : 0.0;
        h.swap(next);
    }
    return h;
}

PiecewiseLinearNet to_piecewise_linear(const SequentialNetwork& net)
{
    SequentialNetwork folded = fold_batchnorm(net);
    PiecewiseLinearNet out;
    out.input_dim = folded.input_dim;
    for (const auto& node : folded.nodes)
        if (const auto* fc = std::get_if<FullyConnectedNode>(&node))
            out.layers.push_back({fc->weights, fc->bias.data()});
    return out;
}

std::vector<LayerBounds> interval_forward(const PiecewiseLinearNet& net, const Box& box)
{
    box.check();
    if (box.dim() != net.input_dim)
        throw ShapeError("interval_forward: box has dimension " + std::to_string(box.dim()) +
                         ", network expects " + std::to_string(net.input_dim));
    std::vector<LayerBounds> out(net.layers.size());
    Vector lo = box.lo;
    Vector hi = box.hi;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const auto& layer = net.layers[l];
        LayerBounds& b = out[l];
        const std::size_t width = layer.bias.size();
        b.pre_lo.resize(width);
        b.pre_hi.resize(width);
        kernels::interval_affine(layer.weights, layer.bias, lo, hi, b.pre_lo, b.pre_hi);
        for (std::size_t i = 0; i < width; ++i) {
            double slack = rounding_slack(layer.weights.row(i), lo, hi, layer.bias[i]);
            b.pre_lo[i] -= slack;
            b.pre_hi[i] += slack;
        }
        if (l + 1 < net.layers.size()) {
            b.post_lo.resize(width);
            b.post_hi.resize(width);
            for (std::size_t i = 0; i < width; ++i) {
                b.post_lo[i] = std::max(0.0, b.pre_lo[i]);
                b.post_hi[i] = std::max(0.0, b.pre_hi[i]);
            }
        } else {
            b.post_lo = b.pre_lo;
            b.post_hi = b.pre_hi;
        }
        lo = b.post_lo;
        hi = b.post_hi;
    }
    return out;
}

std::vector<LayerBounds> interval_forward(const SequentialNetwork& net, const Box& box)
{
    return interval_forward(to_piecewise_linear(net), box);
}

std::size_t count_unstable(const std::vector<LayerBounds>& bounds)
{
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < bounds.size(); ++l)
        for (std::size_t i = 0; i < bounds[l].pre_lo.size(); ++i)
            if (bounds[l].pre_lo[i] < 0.0 && bounds[l].pre_hi[i] > 0.0)
                ++n;
    return n;
}

double output_lower_bound(const PiecewiseLinearNet& net, const std::vector<LayerBounds>& bounds,
                          const Box& box, std::span<const double> coeffs)
{
    const AffineLayer& last = net.layers.back();
    const std::size_t n_in = last.weights.cols();
    std::span<const double> lo = bounds.size() >= 2 ? std::span<const double>(bounds[bounds.size() - 2].post_lo)
                                                    : std::span<const double>(box.lo);
    std::span<const double> hi = bounds.size() >= 2 ? std::span<const double>(bounds[bounds.size() - 2].post_hi)
                                                    : std::span<const double>(box.hi);
    // Combined row c^T W and offset c^T b.
    Vector row(n_in, 0.0);
    double offset = 0.0;
    double mag = 0.0;
    for (std::size_t o = 0; o < coeffs.size(); ++o) {
        if (coeffs[o] == 0.0)
            continue;
        offset += coeffs[o] * last.bias[o];
        mag += std::abs(coeffs[o] * last.bias[o]);
        for (std::size_t j = 0; j < n_in; ++j)
            row[j] += coeffs[o] * last.weights(o, j);
    }
    double acc = offset;
    for (std::size_t j = 0; j < n_in; ++j) {
        acc += row[j] >= 0.0 ? row[j] * lo[j] : row[j] * hi[j];
        mag += std::abs(row[j]) * std::max(std::abs(lo[j]), std::abs(hi[j]));
    }
    for (std::size_t o = 0; o < coeffs.size(); ++o)
        for (std::size_t j = 0; j < n_in; ++j)
            mag += std::abs(coeffs[o] * last.weights(o, j)) * std::max(std::abs(lo[j]), std::abs(hi[j]));
    const double n = static_cast<double>(n_in + coeffs.size() + 2);
    return acc - 2.0 * n * kUnitRoundoff * mag;
}

}  // namespace nnkit
