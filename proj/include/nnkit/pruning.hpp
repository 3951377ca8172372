#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "nnkit/dataset.hpp"
#include "nnkit/network.hpp"
#include "nnkit/training.hpp"

namespace nnkit {

enum class PruningMethod { WeightPruning, NetworkSlimming };

struct PruningConfig {
    PruningMethod method = PruningMethod::WeightPruning;
    std::optional<double> threshold;  // weight pruning only: absolute magnitude cutoff
    std::optional<double> ratio;      // fraction of smallest-magnitude targets removed, in [0, 1)
    std::optional<TrainingConfig> pre_train;  // sparse training before slimming
    std::optional<TrainingConfig> fine_tune;

    void check() const;
};

// Zeroes every FC weight with |w| < threshold.
SequentialNetwork weight_prune(const SequentialNetwork& net, double threshold);

// Global magnitude cutoff over all FC weights removing floor(ratio * count)
// weights (ties at the cutoff survive).
double weight_prune_threshold(const SequentialNetwork& net, double ratio);
SequentialNetwork weight_prune_ratio(const SequentialNetwork& net, double ratio);

double sparsity(const SequentialNetwork& net);

// Cutoff over the pool of |gamma| from every BN layer; value at position
// floor(ratio * pool size) of the ascending sort.
double slim_cutoff(const SequentialNetwork& net, double ratio);

// One keep-mask per BN node, in node order. A neuron is kept iff
// |gamma| >= cutoff; each layer always keeps its largest-|gamma| neuron.
std::vector<std::vector<bool>> select_slim_targets(const SequentialNetwork& net, double ratio);

// Removes the given neurons (one mask per BN node). The removed neuron's
// constant output relu(beta) is folded into the next layer's bias, which is
// exact whenever its gamma is zero.
SequentialNetwork remove_neurons(const SequentialNetwork& net,
                                 const std::vector<std::vector<bool>>& keep);

SequentialNetwork network_slim(const SequentialNetwork& net, double ratio);

struct PruneStage {
    std::string name;
    std::optional<double> accuracy;  // test split if present, else train split
    double sparsity = 0.0;
    std::vector<std::size_t> widths;
};

struct PruneReport {
    PruneStage input;
    std::vector<PruneStage> stages;
};

struct PruneResult {
    SequentialNetwork net;
    PruneReport report;
    std::optional<SequentialNetwork> sparse_net;  // network slimming with pre-training only
};

PruneResult prune_pipeline(const SequentialNetwork& net, const Dataset& data,
                           const PruningConfig& config);

}  // namespace nnkit
