#pragma once

#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nnkit/cli/config.hpp"
#include "nnkit/network.hpp"

namespace nnkit::cli {

struct InstanceRecord {
    std::size_t query = 0;
    std::size_t sample_index = 0;  // index into the test split
    std::size_t label = 0;
    Verdict status = Verdict::Unknown;
    double seconds = 0.0;
    std::size_t nodes = 0;
    std::size_t root_unstable = 0;
    std::string reason;
};

struct VariantResult {
    std::string name;  // Baseline, Sparse, WP, NS
    SequentialNetwork net;
    double accuracy = 0.0;
    double sparsity = 0.0;
    std::vector<std::size_t> widths;
    std::vector<InstanceRecord> instances;

    std::size_t count(Verdict v) const;
    std::size_t solved() const { return count(Verdict::Verified) + count(Verdict::Falsified); }
    double mean_root_unstable() const;
    double mean_seconds() const;
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<std::size_t> query_samples;
    std::vector<VariantResult> variants;
};

// Baseline training, sparse training, weight pruning of the baseline and
// slimming of the sparse net (both fine-tuned), then the same robustness
// query set verified on each variant with a per-instance time budget.
ExperimentResult run_experiment(const RunConfig& config, const Dataset& data, std::ostream* log = nullptr);

nlohmann::json experiment_to_json(const ExperimentResult& result);

// Rows Baseline/Sparse/WP/NS; solved counts plus supporting columns.
std::string format_table(const ExperimentResult& result);

}  // namespace nnkit::cli
