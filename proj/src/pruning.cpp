#include "nnkit/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nnkit {

namespace {

void check_ratio(double ratio)
{
    if (!(ratio >= 0.0 && ratio < 1.0))
        throw std::invalid_argument("pruning ratio must lie in [0, 1)");
}

double quantile_cutoff(std::vector<double> magnitudes, double ratio)
{
    check_ratio(ratio);
    if (magnitudes.empty())
        return 0.0;
    std::sort(magnitudes.begin(), magnitudes.end());
    auto k = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(magnitudes.size())));
    return magnitudes[std::min(k, magnitudes.size() - 1)];
}

std::optional<double> stage_accuracy(const SequentialNetwork& net, const Dataset& data)
{
    if (!data.test().empty())
        return evaluate(net, data.test()).accuracy;
    if (!data.train().empty())
        return evaluate(net, data.train()).accuracy;
    return std::nullopt;
}

}  // namespace

void PruningConfig::check() const
{
    if (method == PruningMethod::WeightPruning) {
        if (threshold.has_value() == ratio.has_value())
            throw std::invalid_argument("weight pruning needs exactly one of threshold or ratio");
        if (threshold && !(*threshold >= 0.0))
            throw std::invalid_argument("weight pruning threshold must be nonnegative");
    } else {
        if (!ratio || threshold)
            throw std::invalid_argument("network slimming needs a ratio (and no threshold)");
    }
    if (ratio)
        check_ratio(*ratio);
    if (pre_train)
        pre_train->check();
    if (fine_tune)
        fine_tune->check();
}

SequentialNetwork weight_prune(const SequentialNetwork& net, double threshold)
{
    require_valid(net);
    SequentialNetwork out = net;
    for (auto& node : out.nodes)
        if (auto* fc = std::get_if<FullyConnectedNode>(&node))
            for (double& w : fc->weights.values())
                if (std::abs(w) < threshold)
                    w = 0.0;
    return out;
}

double weight_prune_threshold(const SequentialNetwork& net, double ratio)
{
    std::vector<double> mags;
    for (const auto& node : net.nodes)
        if (const auto* fc = std::get_if<FullyConnectedNode>(&node))
            for (double w : fc->weights.values())
                mags.push_back(std::abs(w));
    return quantile_cutoff(std::move(mags), ratio);
}

SequentialNetwork weight_prune_ratio(const SequentialNetwork& net, double ratio)
{
    return weight_prune(net, weight_prune_threshold(net, ratio));
}

double sparsity(const SequentialNetwork& net)
{
    std::size_t zeros = 0;
    std::size_t total = 0;
    for (const auto& node : net.nodes)
        if (const auto* fc = std::get_if<FullyConnectedNode>(&node))
            for (double w : fc->weights.values()) {
                ++total;
                zeros += (w == 0.0);
            }
    return total ? static_cast<double>(zeros) / static_cast<double>(total) : 0.0;
}

double slim_cutoff(const SequentialNetwork& net, double ratio)
{
    std::vector<double> pool;
    for (const auto& node : net.nodes)
        if (const auto* bn = std::get_if<BatchNorm1DNode>(&node))
            for (double g : bn->gamma.values())
                pool.push_back(std::abs(g));
    if (pool.empty())
        throw std::invalid_argument("network slimming needs at least one batch_norm_1d layer");
    return quantile_cutoff(std::move(pool), ratio);
}

std::vector<std::vector<bool>> select_slim_targets(const SequentialNetwork& net, double ratio)
{
    const double cutoff = slim_cutoff(net, ratio);
    std::vector<std::vector<bool>> masks;
    for (const auto& node : net.nodes) {
        const auto* bn = std::get_if<BatchNorm1DNode>(&node);
        if (!bn)
            continue;
        std::vector<bool> keep(bn->dim());
        std::size_t best = 0;
        bool any = false;
        for (std::size_t j = 0; j < bn->dim(); ++j) {
            double g = std::abs(bn->gamma[j]);
            keep[j] = g >= cutoff;
            any = any || keep[j];
            if (g > std::abs(bn->gamma[best]))
                best = j;
        }
        if (!any)
            keep[best] = true;
        masks.push_back(std::move(keep));
    }
    return masks;
}

SequentialNetwork remove_neurons(const SequentialNetwork& net,
                                 const std::vector<std::vector<bool>>& keep)
{
    require_valid(net);
    SequentialNetwork out = net;
    std::size_t layer = 0;
    for (std::size_t k = 0; k < out.nodes.size(); ++k) {
        auto* bn = std::get_if<BatchNorm1DNode>(&out.nodes[k]);
        if (!bn)
            continue;
        if (layer >= keep.size())
            throw std::invalid_argument("remove_neurons: fewer masks than batch_norm_1d layers");
        const std::vector<bool>& mask = keep[layer++];
        auto& fc = std::get<FullyConnectedNode>(out.nodes[k - 1]);
        if (mask.size() != bn->dim())
            throw std::invalid_argument("remove_neurons: mask length does not match layer width");
        if (k + 2 >= out.nodes.size() || !std::holds_alternative<ReLUNode>(out.nodes[k + 1]))
            throw std::invalid_argument("network slimming needs canonical FC-BN-ReLU blocks");
        auto& next = std::get<FullyConnectedNode>(out.nodes[k + 2]);

        std::vector<std::size_t> kept;
        for (std::size_t j = 0; j < mask.size(); ++j)
            if (mask[j])
                kept.push_back(j);
        if (kept.empty())
            throw std::invalid_argument("remove_neurons: a layer would lose every neuron");

        // Absorb each removed neuron's constant output into the next bias.
        for (std::size_t j = 0; j < mask.size(); ++j) {
            if (mask[j])
                continue;
            double proxy = std::max(0.0, bn->beta[j]);
            if (proxy != 0.0)
                for (std::size_t o = 0; o < next.out_dim(); ++o)
                    next.bias[o] += proxy * next.weights(o, j);
        }

        const std::size_t w = kept.size();
        auto pick = [&](const Tensor& v) {
            std::vector<double> d(w);
            for (std::size_t i = 0; i < w; ++i)
                d[i] = v[kept[i]];
            return Tensor({w}, std::move(d));
        };
        Tensor weights = Tensor::matrix(w, fc.in_dim());
        for (std::size_t i = 0; i < w; ++i)
            std::copy(fc.weights.row(kept[i]).begin(), fc.weights.row(kept[i]).end(),
                      weights.row(i).begin());
        fc = FullyConnectedNode{std::move(weights), pick(fc.bias)};
        *bn = BatchNorm1DNode{pick(bn->gamma), pick(bn->beta), pick(bn->running_mean),
                              pick(bn->running_var), bn->eps};
        std::get<ReLUNode>(out.nodes[k + 1]).dim = w;

        Tensor next_w = Tensor::matrix(next.out_dim(), w);
        for (std::size_t o = 0; o < next.out_dim(); ++o)
            for (std::size_t i = 0; i < w; ++i)
                next_w(o, i) = next.weights(o, kept[i]);
        next.weights = std::move(next_w);
    }
    require_valid(out);
    return out;
}

SequentialNetwork network_slim(const SequentialNetwork& net, double ratio)
{
    return remove_neurons(net, select_slim_targets(net, ratio));
}

PruneResult prune_pipeline(const SequentialNetwork& net, const Dataset& data,
                           const PruningConfig& config)
{
    config.check();
    require_valid(net);
    PruneResult res{net, {}, std::nullopt};
    auto stage = [&](const std::string& name, const SequentialNetwork& n) {
        return PruneStage{name, stage_accuracy(n, data), sparsity(n), network_stats(n).widths};
    };
    auto record = [&](const std::string& name, const SequentialNetwork& n) {
        res.report.stages.push_back(stage(name, n));
    };
    res.report.input = stage("input", net);

    if (config.method == PruningMethod::NetworkSlimming) {
        if (config.pre_train) {
            TrainingConfig sparse = *config.pre_train;
            if (!(sparse.slim_lambda > 0.0))
                throw std::invalid_argument("sparse pre-training needs slim_lambda > 0");
            res.net = train(res.net, data, sparse).net;
            res.sparse_net = res.net;
            record("sparse", res.net);
        }
        res.net = network_slim(res.net, *config.ratio);
        record("slim", res.net);
        if (config.fine_tune) {
            TrainingConfig tune = *config.fine_tune;
            tune.slim_lambda = 0.0;
            res.net = train(res.net, data, tune).net;
            record("fine_tune", res.net);
        }
    } else {
        double t = config.threshold ? *config.threshold : weight_prune_threshold(res.net, *config.ratio);
        res.net = weight_prune(res.net, t);
        record("weight_prune", res.net);
        if (config.fine_tune) {
            TrainingConfig tune = *config.fine_tune;
            tune.keep_zero_weights = true;
            res.net = train(res.net, data, tune).net;
            record("fine_tune", res.net);
        }
    }
    return res;
}

}  // namespace nnkit
