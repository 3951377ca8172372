#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "nnkit/tensor.hpp"

namespace nnkit {

struct FullyConnectedNode {
    Tensor weights;  // out_dim x in_dim
    Tensor bias;     // out_dim

    std::size_t in_dim() const { return weights.cols(); }
    std::size_t out_dim() const { return weights.rows(); }
    bool operator==(const FullyConnectedNode&) const = default;
};

// Inference-mode batch normalization: gamma / sqrt(running_var + eps) * (x - running_mean) + beta.
struct BatchNorm1DNode {
    Tensor gamma;
    Tensor beta;
    Tensor running_mean;
    Tensor running_var;
    double eps = 1e-5;

    std::size_t dim() const { return gamma.size(); }
    // gamma / sqrt(running_var + eps), elementwise.
    Vector scale() const;
    bool operator==(const BatchNorm1DNode&) const = default;
};

struct ReLUNode {
    std::size_t dim = 0;
    bool operator==(const ReLUNode&) const = default;
};

using LayerNode = std::variant<FullyConnectedNode, BatchNorm1DNode, ReLUNode>;

// A network whose graph is a list. Hidden blocks are FC -> BN -> ReLU (or
// FC -> ReLU once batch norm has been folded) and the last node is a plain FC.
struct SequentialNetwork {
    std::string name;
    std::size_t input_dim = 0;
    std::vector<LayerNode> nodes;

    std::size_t output_dim() const;
    bool operator==(const SequentialNetwork&) const = default;
};

struct ValidationIssue {
    std::size_t node_index;
    std::string message;
};

class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Every structural problem, each tagged with its node index. Empty means valid.
std::vector<ValidationIssue> validate(const SequentialNetwork& net);
void require_valid(const SequentialNetwork& net);

Vector forward(const SequentialNetwork& net, std::span<const double> x);
std::size_t classify(const SequentialNetwork& net, std::span<const double> x);

// Replaces each FC/BN pair with one equivalent FC node.
SequentialNetwork fold_batchnorm(const SequentialNetwork& net);

bool has_batchnorm(const SequentialNetwork& net);

struct NetworkStats {
    std::size_t num_layers = 0;  // input, hidden and output layers
    std::size_t input_dim = 0;
    std::size_t output_dim = 0;
    std::vector<std::size_t> widths;  // input, each hidden layer, output
    std::size_t parameter_count = 0;
    std::size_t hidden_neurons = 0;
};

NetworkStats network_stats(const SequentialNetwork& net);

struct MlpShape {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden;
    std::size_t output_dim = 0;
    bool batch_norm = true;
    double bn_eps = 1e-5;
};

// FC weights uniform in +-sqrt(6 / (in + out)), zero biases, gamma 1, beta 0,
// running statistics (0, 1).
SequentialNetwork make_mlp(const MlpShape& shape, std::uint64_t seed, std::string name = "mlp");

}  // namespace nnkit
