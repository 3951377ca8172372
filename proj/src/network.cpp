#include "nnkit/network.hpp"

#include <cmath>
#include <random>

namespace nnkit {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};

bool is_fc(const LayerNode& n) { return std::holds_alternative<FullyConnectedNode>(n); }
bool is_bn(const LayerNode& n) { return std::holds_alternative<BatchNorm1DNode>(n); }
bool is_relu(const LayerNode& n) { return std::holds_alternative<ReLUNode>(n); }

const char* kind_name(const LayerNode& n)
{
    return std::visit(Overloaded{[](const FullyConnectedNode&) { return "fully_connected"; },
                                 [](const BatchNorm1DNode&) { return "batch_norm_1d"; },
                                 [](const ReLUNode&) { return "relu"; }},
                      n);
}

std::size_t node_in_dim(const LayerNode& n)
{
    return std::visit(Overloaded{[](const FullyConnectedNode& fc) { return fc.in_dim(); },
                                 [](const BatchNorm1DNode& bn) { return bn.dim(); },
                                 [](const ReLUNode& r) { return r.dim; }},
                      n);
}

std::size_t node_out_dim(const LayerNode& n)
{
    return std::visit(Overloaded{[](const FullyConnectedNode& fc) { return fc.out_dim(); },
                                 [](const BatchNorm1DNode& bn) { return bn.dim(); },
                                 [](const ReLUNode& r) { return r.dim; }},
                      n);
}

void check_node(std::size_t index, const LayerNode& node, std::vector<ValidationIssue>& issues)
{
    auto report = [&](std::string msg) { issues.push_back({index, std::move(msg)}); };
    if (const auto* fc = std::get_if<FullyConnectedNode>(&node)) {
        if (fc->weights.rank() != 2) {
            report("weights must be a matrix");
            return;
        }
        if (fc->bias.size() != fc->out_dim())
            report("bias length " + std::to_string(fc->bias.size()) + " != out dim " +
                   std::to_string(fc->out_dim()));
        if (!fc->weights.all_finite() || !fc->bias.all_finite())
            report("non-finite fully_connected parameter");
    } else if (const auto* bn = std::get_if<BatchNorm1DNode>(&node)) {
        std::size_t d = bn->dim();
        if (d == 0)
            report("batch_norm_1d dim must be positive");
        if (bn->beta.size() != d || bn->running_mean.size() != d || bn->running_var.size() != d)
            report("batch_norm_1d vectors must all have length " + std::to_string(d));
        if (!(bn->eps >= 0.0) || !std::isfinite(bn->eps))
            report("batch_norm_1d eps must be a nonnegative finite real");
        if (!bn->gamma.all_finite() || !bn->beta.all_finite() || !bn->running_mean.all_finite() ||
            !bn->running_var.all_finite())
            report("non-finite batch_norm_1d parameter");
        for (std::size_t j = 0; j < bn->running_var.size(); ++j) {
            double v = bn->running_var[j];
            if (v < 0.0) {
                report("running_var[" + std::to_string(j) + "] is negative");
                break;
            }
            if (!(v + bn->eps > 0.0)) {
                report("running_var[" + std::to_string(j) + "] + eps must be positive");
                break;
            }
        }
    } else if (std::get<ReLUNode>(node).dim == 0) {
        report("relu dim must be positive");
    }
}

}  // namespace

Vector BatchNorm1DNode::scale() const
{
    Vector s(dim());
    for (std::size_t j = 0; j < s.size(); ++j)
        s[j] = gamma[j] / std::sqrt(running_var[j] + eps);
    return s;
}

std::size_t SequentialNetwork::output_dim() const
{
    return nodes.empty() ? input_dim : node_out_dim(nodes.back());
}

std::vector<ValidationIssue> validate(const SequentialNetwork& net)
{
    std::vector<ValidationIssue> issues;
    if (net.input_dim == 0)
        issues.push_back({0, "input_dim must be positive"});
    if (net.nodes.empty()) {
        issues.push_back({0, "network has no nodes"});
        return issues;
    }

    std::size_t dim = net.input_dim;
    for (std::size_t i = 0; i < net.nodes.size(); ++i) {
        const LayerNode& node = net.nodes[i];
        check_node(i, node, issues);
        if (node_in_dim(node) != dim)
            issues.push_back({i, "dim mismatch at node " + std::to_string(i) + ": expects " +
                                     std::to_string(node_in_dim(node)) + " inputs, receives " +
                                     std::to_string(dim)});
        dim = node_out_dim(node);
    }

    // Canonical block pattern: (FC [BN] ReLU)* FC.
    std::size_t i = 0;
    const std::size_t n = net.nodes.size();
    auto canonical = [&](std::size_t at, const std::string& what) {
        issues.push_back({at, "canonical-form error at node " + std::to_string(at) + ": " + what});
    };
    while (i < n) {
        if (!is_fc(net.nodes[i])) {
            canonical(i, std::string("expected fully_connected, found ") + kind_name(net.nodes[i]));
            break;
        }
        if (i + 1 == n)
            break;
        std::size_t j = i + 1;
        if (is_bn(net.nodes[j]))
            ++j;
        if (j == n) {
            canonical(j - 1, "network must end with a fully_connected output layer");
            break;
        }
        if (!is_relu(net.nodes[j])) {
            canonical(j, std::string("expected relu, found ") + kind_name(net.nodes[j]));
            break;
        }
        if (j + 1 == n) {
            canonical(j, "network must end with a fully_connected output layer, not relu");
            break;
        }
        i = j + 1;
    }
    return issues;
}

void require_valid(const SequentialNetwork& net)
{
    auto issues = validate(net);
    if (issues.empty())
        return;
    std::string msg = "invalid network";
    if (!net.name.empty())
        msg += " '" + net.name + "'";
    for (const auto& issue : issues)
        msg += "\n  node " + std::to_string(issue.node_index) + ": " + issue.message;
    throw ValidationError(msg);
}

Vector forward(const SequentialNetwork& net, std::span<const double> x)
{
    if (x.size() != net.input_dim)
        throw ShapeError("forward: input has length " + std::to_string(x.size()) +
                         ", network expects " + std::to_string(net.input_dim));
    Vector h(x.begin(), x.end());
    for (const auto& node : net.nodes) {
        if (const auto* fc = std::get_if<FullyConnectedNode>(&node)) {
            h = affine(fc->weights, h, fc->bias.values());
        } else if (const auto* bn = std::get_if<BatchNorm1DNode>(&node)) {
            Vector scale = bn->scale();
            for (std::size_t j = 0; j < h.size(); ++j)
                h[j] = scale[j] * (h[j] - bn->running_mean[j]) + bn->beta[j];
            require_finite(h, "batch_norm_1d output");
        } else {
            h = relu(h);
        }
    }
    return h;
}

std::size_t classify(const SequentialNetwork& net, std::span<const double> x)
{
    return argmax(forward(net, x));
}

SequentialNetwork fold_batchnorm(const SequentialNetwork& net)
{
    require_valid(net);
    SequentialNetwork out;
    out.name = net.name;
    out.input_dim = net.input_dim;
    for (std::size_t i = 0; i < net.nodes.size(); ++i) {
        const auto* fc = std::get_if<FullyConnectedNode>(&net.nodes[i]);
        const BatchNorm1DNode* bn =
            (fc && i + 1 < net.nodes.size()) ? std::get_if<BatchNorm1DNode>(&net.nodes[i + 1])
                                             : nullptr;
        if (!bn) {
            out.nodes.push_back(net.nodes[i]);
            continue;
        }
        Vector scale = bn->scale();
        FullyConnectedNode folded = *fc;
        for (std::size_t r = 0; r < folded.out_dim(); ++r) {
            for (double& w : folded.weights.row(r))
                w *= scale[r];
            folded.bias[r] = scale[r] * (fc->bias[r] - bn->running_mean[r]) + bn->beta[r];
        }
        require_finite(folded.weights.values(), "folded weights");
        require_finite(folded.bias.values(), "folded bias");
        out.nodes.emplace_back(std::move(folded));
        ++i;
    }
    return out;
}

bool has_batchnorm(const SequentialNetwork& net)
{
    for (const auto& node : net.nodes)
        if (is_bn(node))
            return true;
    return false;
}

NetworkStats network_stats(const SequentialNetwork& net)
{
    require_valid(net);
    NetworkStats s;
    s.input_dim = net.input_dim;
    s.output_dim = net.output_dim();
    s.widths.push_back(net.input_dim);
    for (const auto& node : net.nodes) {
        if (const auto* fc = std::get_if<FullyConnectedNode>(&node)) {
            s.parameter_count += fc->weights.size() + fc->bias.size();
            s.widths.push_back(fc->out_dim());
        } else if (const auto* bn = std::get_if<BatchNorm1DNode>(&node)) {
            s.parameter_count += 4 * bn->dim();
        }
    }
    s.num_layers = s.widths.size();
    for (std::size_t i = 1; i + 1 < s.widths.size(); ++i)
        s.hidden_neurons += s.widths[i];
    return s;
}

SequentialNetwork make_mlp(const MlpShape& shape, std::uint64_t seed, std::string name)
{
    if (shape.input_dim == 0 || shape.output_dim == 0)
        throw ShapeError("make_mlp: input and output dims must be positive");
    std::mt19937_64 rng(seed);
    SequentialNetwork net;
    net.name = std::move(name);
    net.input_dim = shape.input_dim;

    auto add_fc = [&](std::size_t in, std::size_t out) {
        double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        FullyConnectedNode fc{Tensor::matrix(out, in), Tensor({out}, 0.0)};
        for (double& w : fc.weights.values())
            w = dist(rng);
        net.nodes.emplace_back(std::move(fc));
    };

    std::size_t in = shape.input_dim;
    for (std::size_t width : shape.hidden) {
        if (width == 0)
            throw ShapeError("make_mlp: hidden widths must be positive");
        add_fc(in, width);
        if (shape.batch_norm)
            net.nodes.emplace_back(BatchNorm1DNode{Tensor({width}, 1.0), Tensor({width}, 0.0),
                                                   Tensor({width}, 0.0), Tensor({width}, 1.0),
                                                   shape.bn_eps});
        net.nodes.emplace_back(ReLUNode{width});
        in = width;
    }
    add_fc(in, shape.output_dim);
    return net;
}

}  // namespace nnkit
