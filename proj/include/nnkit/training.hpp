#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "nnkit/dataset.hpp"
#include "nnkit/network.hpp"

namespace nnkit {

struct TrainingConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double l2_lambda = 0.0;    // weight of (1 / 2n_b) * ||W||^2 over FC weights
    double slim_lambda = 0.0;  // weight of sum |gamma| over BN layers; 0 disables
    std::size_t batch_size = 32;
    std::size_t epochs = 10;
    std::uint64_t seed = 0;
    double bn_momentum = 0.1;
    // Weights that are exactly zero at the start of training stay zero
    // (fine-tuning after weight pruning).
    bool keep_zero_weights = false;

    void check() const;
};

// Trainable tensors in a fixed order: weights then bias of each FC node,
// gamma then beta of each BN node, in node order.
std::vector<Tensor*> parameters(SequentialNetwork& net);
std::vector<const Tensor*> parameters(const SequentialNetwork& net);

struct AdamState {
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;
    std::uint64_t step = 0;
};

// Per-node intermediates from a training-mode forward pass.
struct NodeCache {
    Tensor input;       // batch x in_dim
    Tensor normalized;  // BN only: (input - mean) / sqrt(var + eps)
    Vector inv_std;     // BN only
    Vector batch_mean;  // BN only
    Vector batch_var;   // BN only, biased
};

struct TrainForward {
    Tensor outputs;  // batch x output_dim
    std::vector<NodeCache> cache;
};

// Training-mode forward: BN normalizes with batch statistics. Does not touch
// the network.
TrainForward forward_train(const SequentialNetwork& net, const Tensor& inputs);

// Training-mode forward that also moves each BN layer's running statistics
// toward the batch statistics: r <- (1 - momentum) r + momentum * batch_stat.
TrainForward forward_train(SequentialNetwork& net, const Tensor& inputs, double momentum);

struct LossBreakdown {
    double surrogate = 0.0;  // mean softmax cross-entropy
    double l2_term = 0.0;
    double slim_term = 0.0;
    double total() const { return surrogate + l2_term + slim_term; }
};

struct LossAndGrads {
    LossBreakdown loss;
    std::vector<Tensor> grads;  // aligned with parameters(net)
    TrainForward forward;
};

LossAndGrads loss_and_grads(const SequentialNetwork& net, const Tensor& inputs,
                            std::span<const std::size_t> labels, const TrainingConfig& config);

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               const TrainingConfig& config);

struct EpochMetrics {
    std::size_t epoch = 0;
    LossBreakdown loss;            // averaged over the epoch's mini-batches
    double empirical_risk = 0.0;   // 0-1 misclassification rate on the train split
    double regularizer = 0.0;      // (1 / 2n) ||w||_2, unsquared, n = train size
    double objective = 0.0;        // empirical_risk + l2_lambda * regularizer
    double train_accuracy = 0.0;
    std::optional<double> test_accuracy;
};

struct TrainingMetrics {
    std::vector<EpochMetrics> epochs;
};

struct TrainResult {
    SequentialNetwork net;
    TrainingMetrics metrics;
};

// Adam over seeded mini-batch shuffles. The input network is left untouched.
TrainResult train(const SequentialNetwork& net, const Dataset& data, const TrainingConfig& config);

struct Evaluation {
    double accuracy = 0.0;
    std::size_t misclassified = 0;
    std::size_t total = 0;
};

Evaluation evaluate(const SequentialNetwork& net, std::span<const Sample> samples);

// Stacks sample inputs into a batch x input_dim tensor.
Tensor stack_inputs(std::span<const Sample> samples, std::span<const std::size_t> order);

}  // namespace nnkit
