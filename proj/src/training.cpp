#include "nnkit/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <utility>

#include "nnkit/kernels.hpp"

namespace nnkit {

void TrainingConfig::check() const
{
    auto bad = [](const std::string& what) { throw std::invalid_argument("training config: " + what); };
    if (!(learning_rate > 0.0))
        bad("learning_rate must be positive");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
        bad("beta1 and beta2 must lie in (0, 1)");
    if (!(adam_eps > 0.0))
        bad("adam_eps must be positive");
    if (!(l2_lambda >= 0.0) || !(slim_lambda >= 0.0))
        bad("regularization weights must be nonnegative");
    if (batch_size == 0)
        bad("batch_size must be positive");
    if (!(bn_momentum > 0.0 && bn_momentum <= 1.0))
        bad("bn_momentum must lie in (0, 1]");
}

std::vector<Tensor*> parameters(SequentialNetwork& net)
{
    std::vector<Tensor*> out;
    for (auto& node : net.nodes) {
        if (auto* fc = std::get_if<FullyConnectedNode>(&node)) {
            out.push_back(&fc->weights);
            out.push_back(&fc->bias);
        } else if (auto* bn = std::get_if<BatchNorm1DNode>(&node)) {
            out.push_back(&bn->gamma);
            out.push_back(&bn->beta);
        }
    }
    return out;
}

std::vector<const Tensor*> parameters(const SequentialNetwork& net)
{
    auto mut = parameters(const_cast<SequentialNetwork&>(net));
    return {mut.begin(), mut.end()};
}

Tensor stack_inputs(std::span<const Sample> samples, std::span<const std::size_t> order)
{
    const std::size_t d = samples[order[0]].input.size();
    Tensor x = Tensor::matrix(order.size(), d);
    for (std::size_t r = 0; r < order.size(); ++r)
        std::copy(samples[order[r]].input.begin(), samples[order[r]].input.end(), x.row(r).begin());
    return x;
}

TrainForward forward_train(const SequentialNetwork& net, const Tensor& inputs)
{
    if (inputs.rank() != 2 || inputs.cols() != net.input_dim)
        throw ShapeError("forward_train: batch has shape " + inputs.shape_string() +
                         ", network expects rows of length " + std::to_string(net.input_dim));
    const std::size_t batch = inputs.rows();
    if (batch < 2 && has_batchnorm(net))
        throw ShapeError("forward_train: batch normalization needs a batch of at least 2 samples");

    TrainForward out;
    out.cache.resize(net.nodes.size());
    Tensor h = inputs;
    for (std::size_t k = 0; k < net.nodes.size(); ++k) {
        NodeCache& c = out.cache[k];
        c.input = h;
        const auto& node = net.nodes[k];
        if (const auto* fc = std::get_if<FullyConnectedNode>(&node)) {
            h = kernels::batch_affine(h, fc->weights, fc->bias.values());
        } else if (const auto* bn = std::get_if<BatchNorm1DNode>(&node)) {
            const std::size_t dim = bn->dim();
            c.batch_mean.assign(dim, 0.0);
            c.batch_var.assign(dim, 0.0);
            c.inv_std.assign(dim, 0.0);
            for (std::size_t r = 0; r < batch; ++r)
                for (std::size_t j = 0; j < dim; ++j)
                    c.batch_mean[j] += h(r, j);
            for (double& m : c.batch_mean)
                m /= static_cast<double>(batch);
            for (std::size_t r = 0; r < batch; ++r)
                for (std::size_t j = 0; j < dim; ++j) {
                    double diff = h(r, j) - c.batch_mean[j];
                    c.batch_var[j] += diff * diff;
                }
            for (std::size_t j = 0; j < dim; ++j) {
                c.batch_var[j] /= static_cast<double>(batch);
                c.inv_std[j] = 1.0 / std::sqrt(c.batch_var[j] + bn->eps);
            }
            c.normalized = Tensor::matrix(batch, dim);
            for (std::size_t r = 0; r < batch; ++r)
                for (std::size_t j = 0; j < dim; ++j) {
                    double xhat = (h(r, j) - c.batch_mean[j]) * c.inv_std[j];
                    c.normalized(r, j) = xhat;
                    h(r, j) = bn->gamma[j] * xhat + bn->beta[j];
                }
        } else {
            for (double& v : h.values())
                v = v > 0.0 ? v : 0.0;
        }
        if (!h.all_finite())
            throw NumericError("forward_train: non-finite activation after node " + std::to_string(k));
    }
    out.outputs = std::move(h);
    return out;
}

TrainForward forward_train(SequentialNetwork& net, const Tensor& inputs, double momentum)
{
    TrainForward fwd = forward_train(std::as_const(net), inputs);
    for (std::size_t k = 0; k < net.nodes.size(); ++k) {
        auto* bn = std::get_if<BatchNorm1DNode>(&net.nodes[k]);
        if (!bn)
            continue;
        const NodeCache& c = fwd.cache[k];
        for (std::size_t j = 0; j < bn->dim(); ++j) {
            bn->running_mean[j] = (1.0 - momentum) * bn->running_mean[j] + momentum * c.batch_mean[j];
            bn->running_var[j] = (1.0 - momentum) * bn->running_var[j] + momentum * c.batch_var[j];
        }
    }
    return fwd;
}

LossAndGrads loss_and_grads(const SequentialNetwork& net, const Tensor& inputs,
                            std::span<const std::size_t> labels, const TrainingConfig& config)
{
    const std::size_t batch = inputs.rows();
    if (labels.size() != batch)
        throw ShapeError("loss_and_grads: " + std::to_string(labels.size()) + " labels for a batch of " +
                         std::to_string(batch));
    const std::size_t m = net.output_dim();
    for (auto label : labels)
        if (label >= m)
            throw ShapeError("loss_and_grads: label " + std::to_string(label) + " out of range");

    LossAndGrads res;
    res.forward = forward_train(net, inputs);
    const Tensor& logits = res.forward.outputs;
    const double inv_batch = 1.0 / static_cast<double>(batch);

    // Softmax cross-entropy and its gradient w.r.t. the logits.
    Tensor grad = Tensor::matrix(batch, m);
    double ce = 0.0;
    for (std::size_t r = 0; r < batch; ++r) {
        auto z = logits.row(r);
        double zmax = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (double v : z)
            sum += std::exp(v - zmax);
        double log_norm = zmax + std::log(sum);
        ce += log_norm - z[labels[r]];
        for (std::size_t c = 0; c < m; ++c)
            grad(r, c) = std::exp(z[c] - log_norm) * inv_batch;
        grad(r, labels[r]) -= inv_batch;
    }
    res.loss.surrogate = ce * inv_batch;

    auto params = parameters(net);
    res.grads.resize(params.size());
    std::size_t p = params.size();

    for (std::size_t k = net.nodes.size(); k-- > 0;) {
        const NodeCache& c = res.forward.cache[k];
        const auto& node = net.nodes[k];
        if (const auto* fc = std::get_if<FullyConnectedNode>(&node)) {
            Tensor dw = kernels::weight_gradient(grad, c.input);
            Tensor db({fc->out_dim()}, 0.0);
            for (std::size_t r = 0; r < batch; ++r)
                for (std::size_t o = 0; o < fc->out_dim(); ++o)
                    db[o] += grad(r, o);
            if (config.l2_lambda > 0.0) {
                double sq = 0.0;
                const double coef = config.l2_lambda * inv_batch;
                auto w = fc->weights.values();
                auto g = dw.values();
                for (std::size_t i = 0; i < w.size(); ++i) {
                    sq += w[i] * w[i];
                    g[i] += coef * w[i];
                }
                res.loss.l2_term += 0.5 * coef * sq;
            }
            if (k > 0)
                grad = kernels::batch_input_gradient(grad, fc->weights);
            res.grads[--p] = std::move(db);
            res.grads[--p] = std::move(dw);
        } else if (const auto* bn = std::get_if<BatchNorm1DNode>(&node)) {
            const std::size_t dim = bn->dim();
            Tensor dgamma({dim}, 0.0);
            Tensor dbeta({dim}, 0.0);
            Vector sum_dxhat(dim, 0.0);
            Vector sum_dxhat_xhat(dim, 0.0);
            for (std::size_t r = 0; r < batch; ++r)
                for (std::size_t j = 0; j < dim; ++j) {
                    double g = grad(r, j);
                    double xhat = c.normalized(r, j);
                    dgamma[j] += g * xhat;
                    dbeta[j] += g;
                    double dxhat = g * bn->gamma[j];
                    sum_dxhat[j] += dxhat;
                    sum_dxhat_xhat[j] += dxhat * xhat;
                }
            for (std::size_t r = 0; r < batch; ++r)
                for (std::size_t j = 0; j < dim; ++j) {
                    double dxhat = grad(r, j) * bn->gamma[j];
                    grad(r, j) = c.inv_std[j] * inv_batch *
                                 (static_cast<double>(batch) * dxhat - sum_dxhat[j] -
                                  c.normalized(r, j) * sum_dxhat_xhat[j]);
                }
            if (config.slim_lambda > 0.0) {
                for (std::size_t j = 0; j < dim; ++j) {
                    double gj = bn->gamma[j];
                    res.loss.slim_term += config.slim_lambda * std::abs(gj);
                    // Subgradient 0 at gamma == 0.
                    if (gj > 0.0)
                        dgamma[j] += config.slim_lambda;
                    else if (gj < 0.0)
                        dgamma[j] -= config.slim_lambda;
                }
            }
            res.grads[--p] = std::move(dbeta);
            res.grads[--p] = std::move(dgamma);
        } else {
            const Tensor& in = c.input;
            auto g = grad.values();
            auto x = in.values();
            for (std::size_t i = 0; i < g.size(); ++i)
                if (!(x[i] > 0.0))
                    g[i] = 0.0;
        }
    }

    if (!std::isfinite(res.loss.total()))
        throw NumericError("loss_and_grads: non-finite loss");
    for (std::size_t i = 0; i < res.grads.size(); ++i)
        if (!res.grads[i].all_finite())
            throw NumericError("loss_and_grads: non-finite gradient for parameter tensor " +
                               std::to_string(i));
    return res;
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               const TrainingConfig& config)
{
    if (params.size() != grads.size())
        throw ShapeError("adam_step: parameter and gradient counts differ");
    if (state.first_moment.empty()) {
        for (const Tensor* p : params) {
            state.first_moment.emplace_back(p->shape(), 0.0);
            state.second_moment.emplace_back(p->shape(), 0.0);
        }
    }
    if (state.first_moment.size() != params.size())
        throw ShapeError("adam_step: optimizer state does not match parameter list");

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(config.beta1, t);
    const double correction2 = 1.0 - std::pow(config.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto theta = params[k]->values();
        auto g = grads[k].values();
        auto m = state.first_moment[k].values();
        auto v = state.second_moment[k].values();
        if (g.size() != theta.size() || m.size() != theta.size())
            throw ShapeError("adam_step: shape mismatch for parameter tensor " + std::to_string(k));
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
            double m_hat = m[i] / correction1;
            double v_hat = v[i] / correction2;
            theta[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.adam_eps);
        }
    }
}

Evaluation evaluate(const SequentialNetwork& net, std::span<const Sample> samples)
{
    if (samples.empty())
        throw std::invalid_argument("evaluate: empty sample list");
    const auto n = static_cast<std::ptrdiff_t>(samples.size());
    std::size_t wrong = 0;
#pragma omp parallel for schedule(static) reduction(+ : wrong)
    for (std::ptrdiff_t i = 0; i < n; ++i)
        if (classify(net, samples[i].input) != samples[i].label)
            ++wrong;
    Evaluation e;
    e.total = samples.size();
    e.misclassified = wrong;
    e.accuracy = 1.0 - static_cast<double>(wrong) / static_cast<double>(e.total);
    return e;
}

namespace {

double weight_norm(const SequentialNetwork& net)
{
    double sq = 0.0;
    for (const auto& node : net.nodes)
        if (const auto* fc = std::get_if<FullyConnectedNode>(&node))
            for (double w : fc->weights.values())
                sq += w * w;
    return std::sqrt(sq);
}

// Splits a permutation into mini-batches; with batch norm a trailing batch of
// one sample is merged into its predecessor.
std::vector<std::span<const std::size_t>> make_batches(std::span<const std::size_t> order,
                                                       std::size_t batch_size, bool needs_pairs)
{
    std::vector<std::span<const std::size_t>> batches;
    for (std::size_t start = 0; start < order.size(); start += batch_size)
        batches.push_back(order.subspan(start, std::min(batch_size, order.size() - start)));
    if (needs_pairs && batches.size() >= 2 && batches.back().size() == 1) {
        auto merged = order.subspan(order.size() - batches[batches.size() - 2].size() - 1);
        batches.pop_back();
        batches.back() = merged;
    }
    return batches;
}

}  // namespace

TrainResult train(const SequentialNetwork& net, const Dataset& data, const TrainingConfig& config)
{
    require_valid(net);
    config.check();
    if (data.input_dim() != net.input_dim || data.num_classes() != net.output_dim())
        throw ShapeError("train: dataset is " + std::to_string(data.input_dim()) + " -> " +
                         std::to_string(data.num_classes()) + " but network is " +
                         std::to_string(net.input_dim) + " -> " + std::to_string(net.output_dim()));

    TrainResult result{net, {}};
    if (config.epochs == 0)
        return result;
    const auto& samples = data.train();
    if (samples.empty())
        throw std::invalid_argument("train: empty training split");
    const bool bn = has_batchnorm(net);
    if (bn && samples.size() < 2)
        throw ShapeError("train: batch normalization needs at least 2 training samples");

    SequentialNetwork& model = result.net;
    auto params = parameters(model);
    std::vector<std::vector<char>> frozen;
    if (config.keep_zero_weights) {
        for (Tensor* p : params) {
            std::vector<char> mask(p->size());
            for (std::size_t i = 0; i < p->size(); ++i)
                mask[i] = (*p)[i] == 0.0;
            frozen.push_back(std::move(mask));
        }
        // Only FC weight tensors are pruned; other tensors are never frozen.
        for (std::size_t k = 0; k < params.size(); ++k) {
            bool is_weight = false;
            for (auto& node : model.nodes)
                if (auto* fc = std::get_if<FullyConnectedNode>(&node); fc && &fc->weights == params[k])
                    is_weight = true;
            if (!is_weight)
                std::fill(frozen[k].begin(), frozen[k].end(), 0);
        }
    }

    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    AdamState adam;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        EpochMetrics em;
        em.epoch = epoch + 1;
        double seen = 0.0;
        for (auto idx : make_batches(order, config.batch_size, bn)) {
            Tensor x = stack_inputs(samples, idx);
            std::vector<std::size_t> labels(idx.size());
            for (std::size_t r = 0; r < idx.size(); ++r)
                labels[r] = samples[idx[r]].label;
            LossAndGrads lg = loss_and_grads(model, x, labels, config);

            // Running statistics follow the batch statistics just computed.
            for (std::size_t k = 0; k < model.nodes.size(); ++k)
                if (auto* node = std::get_if<BatchNorm1DNode>(&model.nodes[k])) {
                    const NodeCache& c = lg.forward.cache[k];
                    const double mom = config.bn_momentum;
                    for (std::size_t j = 0; j < node->dim(); ++j) {
                        node->running_mean[j] = (1.0 - mom) * node->running_mean[j] + mom * c.batch_mean[j];
                        node->running_var[j] = (1.0 - mom) * node->running_var[j] + mom * c.batch_var[j];
                    }
                }

            if (!frozen.empty())
                for (std::size_t k = 0; k < params.size(); ++k)
                    for (std::size_t i = 0; i < frozen[k].size(); ++i)
                        if (frozen[k][i])
                            lg.grads[k][i] = 0.0;
            adam_step(params, lg.grads, adam, config);
            if (!frozen.empty())
                for (std::size_t k = 0; k < params.size(); ++k)
                    for (std::size_t i = 0; i < frozen[k].size(); ++i)
                        if (frozen[k][i])
                            (*params[k])[i] = 0.0;

            const double w = static_cast<double>(idx.size());
            em.loss.surrogate += w * lg.loss.surrogate;
            em.loss.l2_term += w * lg.loss.l2_term;
            em.loss.slim_term += w * lg.loss.slim_term;
            seen += w;
        }
        em.loss.surrogate /= seen;
        em.loss.l2_term /= seen;
        em.loss.slim_term /= seen;

        Evaluation tr = evaluate(model, samples);
        em.train_accuracy = tr.accuracy;
        em.empirical_risk = 1.0 - tr.accuracy;
        em.regularizer = weight_norm(model) / (2.0 * static_cast<double>(samples.size()));
        em.objective = em.empirical_risk + config.l2_lambda * em.regularizer;
        if (!data.test().empty())
            em.test_accuracy = evaluate(model, data.test()).accuracy;
        result.metrics.epochs.push_back(em);
    }
    return result;
}

}  // namespace nnkit
