#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "nnkit/dataset.hpp"
#include "nnkit/network.hpp"
#include "nnkit/property.hpp"
#include "nnkit/training.hpp"
#include "nnkit/verifier.hpp"

namespace nnkit {

struct RepairConfig {
    std::size_t max_iterations = 10;
    TrainingConfig trainer;  // per-round retraining
    std::size_t counterexamples_per_property = 1;
    BabConfig verifier;
    bool from_scratch = false;  // re-initialize before each retrain instead of warm-starting

    void check() const;
};

struct AddedSample {
    std::size_t iteration = 0;
    std::size_t property = 0;
    Sample sample;
};

struct RepairIteration {
    std::size_t iteration = 0;
    std::vector<Verdict> statuses;  // verification of the network entering this round
    std::size_t samples_added = 0;
    bool retrained = false;
    double train_accuracy = 0.0;
    std::optional<double> test_accuracy;
};

struct RepairReport {
    std::vector<RepairIteration> iterations;
    std::vector<Verdict> final_statuses;  // fresh verification of the returned network
    bool all_verified = false;
    std::size_t total_added = 0;
    std::vector<AddedSample> added;
};

struct RepairResult {
    SequentialNetwork net;
    Dataset data;  // training split grown by the harvested counterexamples
    RepairReport report;
};

// Verify, add each counterexample with its property's reference label to the
// training split, retrain, repeat. Only robustness properties are accepted
// since generic properties carry no label for their counterexamples.
RepairResult repair(const SequentialNetwork& net, std::span<const Property> properties,
                    const Dataset& data, const RepairConfig& config);

}  // namespace nnkit
