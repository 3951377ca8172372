#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <variant>
#include <vector>

#include "nnkit/network.hpp"
#include "nnkit/property.hpp"

namespace testsupport {

inline nnkit::Vector uniform_vector(std::mt19937_64& rng, std::size_t n, double lo = -1.0,
                                    double hi = 1.0)
{
    std::uniform_real_distribution<double> u(lo, hi);
    nnkit::Vector v(n);
    for (auto& x : v)
        x = u(rng);
    return v;
}

// make_mlp with every parameter and BN statistic randomized.
inline nnkit::SequentialNetwork random_net(std::mt19937_64& rng, std::size_t in,
                                           std::vector<std::size_t> hidden, std::size_t out,
                                           bool batch_norm)
{
    nnkit::MlpShape shape{in, std::move(hidden), out, batch_norm, 1e-5};
    auto net = nnkit::make_mlp(shape, rng(), "random");
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> pos(0.5, 2.0);
    for (auto& node : net.nodes) {
        if (auto* fc = std::get_if<nnkit::FullyConnectedNode>(&node)) {
            for (auto& b : fc->bias.values())
                b = 0.5 * u(rng);
        } else if (auto* bn = std::get_if<nnkit::BatchNorm1DNode>(&node)) {
            for (std::size_t j = 0; j < bn->dim(); ++j) {
                bn->gamma[j] = u(rng) * 1.5;
                bn->beta[j] = 0.5 * u(rng);
                bn->running_mean[j] = 0.3 * u(rng);
                bn->running_var[j] = pos(rng);
            }
        }
    }
    return net;
}

// Hand-assembled FC/ReLU chain from explicit layers.
inline nnkit::SequentialNetwork chain(std::size_t input_dim,
                                      std::vector<std::pair<nnkit::Tensor, nnkit::Vector>> layers)
{
    nnkit::SequentialNetwork net;
    net.name = "chain";
    net.input_dim = input_dim;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        auto& [w, b] = layers[i];
        const std::size_t out = w.rows();
        net.nodes.push_back(nnkit::FullyConnectedNode{std::move(w), nnkit::Tensor::vector(std::move(b))});
        if (i + 1 < layers.size())
            net.nodes.push_back(nnkit::ReLUNode{out});
    }
    return net;
}

inline nnkit::SequentialNetwork identity_net(std::size_t d)
{
    return chain(d, {{nnkit::Tensor::identity(d), nnkit::Vector(d, 0.0)}});
}

// Single output atom coeffs . y <= rhs.
inline nnkit::LinearAtom out_atom(nnkit::Vector coeffs, double rhs)
{
    return nnkit::LinearAtom{nnkit::VarKind::Output, std::move(coeffs), rhs};
}

inline nnkit::Property box_property(nnkit::Vector lo, nnkit::Vector hi, std::size_t outputs,
                                    std::vector<nnkit::Conjunction> disjuncts)
{
    nnkit::Property p;
    p.input_box = nnkit::Box{std::move(lo), std::move(hi)};
    p.num_outputs = outputs;
    p.disjuncts = std::move(disjuncts);
    return p;
}

}  // namespace testsupport
