#pragma once

#include <random>

#include "nnkit/network.hpp"
#include "nnkit/property.hpp"
#include "random_nets.hpp"

namespace testsupport {

struct VerifyCase {
    nnkit::SequentialNetwork net;
    nnkit::Property property;
};

// Small FC/ReLU net (1-4 inputs, at most 8 hidden neurons in one or two
// layers, 2-3 outputs) with a robustness property around a random point.
// The label is usually the net's own prediction at the centre, so both
// verdicts occur.
inline VerifyCase random_verify_case(std::mt19937_64& rng, std::size_t max_hidden = 8)
{
    std::uniform_int_distribution<std::size_t> dim(1, 4), outs(2, 3), layers(1, 2);
    std::vector<std::size_t> hidden;
    const std::size_t nl = layers(rng);
    std::size_t budget = max_hidden;
    for (std::size_t l = 0; l < nl; ++l) {
        const std::size_t cap = budget - (nl - 1 - l);
        std::uniform_int_distribution<std::size_t> w(1, std::min<std::size_t>(cap, nl == 1 ? max_hidden : max_hidden / 2));
        hidden.push_back(w(rng));
        budget -= hidden.back();
    }
    const std::size_t d = dim(rng), m = outs(rng);
    auto folded = nnkit::fold_batchnorm(random_net(rng, d, hidden, m, true));
    auto x0 = uniform_vector(rng, d, 0.0, 1.0);
    std::size_t label = nnkit::classify(folded, x0);
    if (std::uniform_int_distribution<int>(0, 9)(rng) == 0)
        label = (label + 1) % m;
    const double eps = std::uniform_real_distribution<double>(0.01, 0.3)(rng);
    auto property = nnkit::robustness_property(x0, label, m, eps, nnkit::unit_box(d));
    return {std::move(folded), std::move(property)};
}

}  // namespace testsupport
