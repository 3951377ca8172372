#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "nnkit/dataset.hpp"
#include "nnkit/pruning.hpp"
#include "nnkit/repair.hpp"
#include "nnkit/training.hpp"
#include "nnkit/verifier.hpp"

namespace nnkit::cli {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct IdxSpec {
    std::filesystem::path train_images, train_labels, test_images, test_labels;
    std::size_t num_classes = 10;
    std::optional<std::size_t> train_limit;  // keep the first n samples
    std::optional<std::size_t> test_limit;
};

// Exactly one of synthetic / idx is set after parsing.
struct DataConfig {
    std::optional<BlobSpec> synthetic;
    std::optional<IdxSpec> idx;
    bool from_document = false;  // the config named a data source explicitly
};

struct ModelConfig {
    std::string name = "mlp";
    std::vector<std::size_t> hidden{16};
    bool batch_norm = true;
    double bn_eps = 1e-5;
};

struct PruneConfig {
    PruningMethod method = PruningMethod::WeightPruning;
    std::optional<double> threshold;
    std::optional<double> ratio;
    std::size_t pre_train_epochs = 0;   // network slimming: sparse training first
    std::size_t fine_tune_epochs = 0;
    double slim_lambda = 1e-3;          // used by sparse pre-training
};

enum class Engine { Ibp, Bab };

struct VerifyConfig {
    Engine engine = Engine::Bab;
    BabConfig bab;
    std::optional<std::filesystem::path> property;
    std::optional<std::size_t> sample_index;  // robustness query around a test sample
    double epsilon = 0.02;
};

struct RepairSection {
    std::size_t max_iterations = 10;
    std::size_t epochs = 10;
    std::size_t counterexamples_per_property = 1;
    bool from_scratch = false;
    std::vector<std::size_t> sample_indices{0};
    double epsilon = 0.02;
};

struct ExperimentConfig {
    std::size_t queries = 20;
    double epsilon = 0.02;
    double timeout = 60.0;
    double wp_ratio = 0.5;
    double ns_ratio = 0.5;
    double sparse_lambda = 1e-3;
    std::size_t fine_tune_epochs = 10;
};

// One document drives every command. Seeds: `seed` initializes models and
// is copied into the training shuffle and verifier seeds.
struct RunConfig {
    std::uint64_t seed = 1;
    DataConfig data;
    ModelConfig model;
    TrainingConfig train;
    PruneConfig prune;
    VerifyConfig verify;
    RepairSection repair;
    ExperimentConfig experiment;

    // Re-derives the seeds of the nested sections from `seed`.
    void apply_seed(std::uint64_t s);
};

// Unknown keys, wrong types and out-of-range values are errors naming the
// offending key path.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json run_config_to_json(const RunConfig& config);

// Builds the configured dataset (synthetic or IDX with optional limits).
Dataset load_data(const DataConfig& data);

const char* to_string(PruningMethod m);
const char* to_string(Engine e);

}  // namespace nnkit::cli
