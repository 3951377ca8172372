#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "../support/gradcheck.hpp"
#include "../support/random_nets.hpp"
#include "nnkit/dataset.hpp"
#include "nnkit/training.hpp"

using namespace nnkit;
using testsupport::random_net;
using testsupport::uniform_vector;

namespace {

// FC(identity) -> BN -> ReLU -> FC on d inputs.
SequentialNetwork bn_probe(std::size_t d)
{
    SequentialNetwork net;
    net.input_dim = d;
    net.nodes.push_back(FullyConnectedNode{Tensor::identity(d), Tensor::vector(Vector(d, 0.0))});
    net.nodes.push_back(BatchNorm1DNode{Tensor::vector(Vector(d, 1.0)), Tensor::vector(Vector(d, 0.0)),
                                        Tensor::vector(Vector(d, 0.0)), Tensor::vector(Vector(d, 1.0))});
    net.nodes.push_back(ReLUNode{d});
    net.nodes.push_back(FullyConnectedNode{Tensor::identity(d), Tensor::vector(Vector(d, 0.0))});
    return net;
}

double mean_abs_gamma(const SequentialNetwork& net)
{
    double s = 0;
    std::size_t n = 0;
    for (const auto& node : net.nodes)
        if (const auto* bn = std::get_if<BatchNorm1DNode>(&node))
            for (double g : bn->gamma.values()) {
                s += std::abs(g);
                ++n;
            }
    return s / static_cast<double>(n);
}

}  // namespace

TEST_CASE("constant batch normalizes to beta")
{
    auto net = bn_probe(2);
    std::get<BatchNorm1DNode>(net.nodes[1]).beta = Tensor::vector({0.25, -0.5});
    Tensor x({3, 2}, {0.4, 0.7, 0.4, 0.7, 0.4, 0.7});
    auto fwd = forward_train(static_cast<const SequentialNetwork&>(net), x);
    const auto& bn_out = fwd.cache[2].input;  // input of the ReLU node
    for (std::size_t r = 0; r < 3; ++r) {
        CHECK(std::abs(bn_out(r, 0) - 0.25) < 1e-12);
        CHECK(std::abs(bn_out(r, 1) + 0.5) < 1e-12);
    }
    for (double v : fwd.cache[1].batch_var)
        CHECK(v < 1e-30);
}

TEST_CASE("standardized batch passes through identity batch norm")
{
    auto net = bn_probe(1);
    Tensor x({2, 1}, {-1.0, 1.0});
    auto fwd = forward_train(static_cast<const SequentialNetwork&>(net), x);
    CHECK(fwd.cache[2].input(0, 0) == doctest::Approx(-1.0).epsilon(1e-5));
    CHECK(fwd.cache[2].input(1, 0) == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("running statistics with momentum 1 equal the batch statistics")
{
    auto net = bn_probe(2);
    Tensor x({4, 2}, {0.1, 0.9, 0.3, 0.5, 0.5, 0.2, 0.9, 0.0});
    auto fwd = forward_train(net, x, 1.0);
    const auto& bn = std::get<BatchNorm1DNode>(net.nodes[1]);
    CHECK(bn.running_mean.data() == fwd.cache[1].batch_mean);
    CHECK(bn.running_var.data() == fwd.cache[1].batch_var);
    CHECK(bn.running_mean[0] == doctest::Approx(0.45));
    // Biased variance of {0.1, 0.3, 0.5, 0.9}.
    CHECK(bn.running_var[0] == doctest::Approx(0.0875));
}

TEST_CASE("batch norm needs at least two rows in training mode")
{
    auto net = bn_probe(2);
    CHECK_THROWS(forward_train(static_cast<const SequentialNetwork&>(net), Tensor({1, 2}, {0.1, 0.2})));
}

TEST_CASE("confident correct predictions drive the surrogate to zero")
{
    SequentialNetwork net;
    net.input_dim = 2;
    net.nodes.push_back(FullyConnectedNode{Tensor::matrix({{200, 0}, {0, 200}}), Tensor::vector({0, 0})});
    Tensor x({2, 2}, {1, 0, 0, 1});
    std::vector<std::size_t> labels{0, 1};
    auto lg = loss_and_grads(net, x, labels, TrainingConfig{});
    CHECK(lg.loss.surrogate < 1e-12);
    CHECK(lg.loss.l2_term == 0.0);
    CHECK(lg.loss.slim_term == 0.0);
}

TEST_CASE("regularizer gradient is lambda * w / n_b")
{
    std::mt19937_64 rng(8);
    auto net = random_net(rng, 3, {}, 3, false);
    Tensor x({5, 3}, uniform_vector(rng, 15, 0, 1));
    std::vector<std::size_t> labels{0, 1, 2, 1, 0};
    TrainingConfig plain, reg;
    reg.l2_lambda = 0.3;
    auto a = loss_and_grads(net, x, labels, plain);
    auto b = loss_and_grads(net, x, labels, reg);
    const auto& w = std::get<FullyConnectedNode>(net.nodes[0]).weights;
    for (std::size_t i = 0; i < w.size(); ++i)
        CHECK(b.grads[0][i] - a.grads[0][i] == doctest::Approx(0.3 * w[i] / 5.0).epsilon(1e-12));
    CHECK(b.grads[1] == a.grads[1]);  // biases are not regularized
    double sq = 0;
    for (double v : w.values())
        sq += v * v;
    CHECK(b.loss.l2_term == doctest::Approx(0.3 * sq / 10.0));
}

TEST_CASE("loss breakdown sums to the total")
{
    std::mt19937_64 rng(9);
    auto c = testsupport::random_grad_case(rng);
    TrainingConfig cfg;
    cfg.l2_lambda = 0.01;
    cfg.slim_lambda = 0.001;
    auto lg = loss_and_grads(c.net, c.x, c.labels, cfg);
    CHECK(lg.loss.total() == lg.loss.surrogate + lg.loss.l2_term + lg.loss.slim_term);
    CHECK(lg.loss.l2_term > 0);
    CHECK(lg.loss.slim_term == doctest::Approx(0.001 * mean_abs_gamma(c.net) * 16));
}

TEST_CASE("analytic gradients match central differences")
{
    std::mt19937_64 rng(10);
    TrainingConfig cfg;
    cfg.l2_lambda = 0.01;
    cfg.slim_lambda = 0.001;
    for (int t = 0; t < 5; ++t) {
        auto c = testsupport::random_grad_case(rng);
        CHECK(testsupport::max_gradient_error(c.net, c.x, c.labels, cfg) < 1e-4);
    }
}

TEST_CASE("adam")
{
    TrainingConfig cfg;
    Tensor a = Tensor::vector({1.0, -2.0});
    Tensor b = Tensor::vector({0.5});
    std::vector<Tensor*> params{&a, &b};
    AdamState state;

    std::vector<Tensor> zero{Tensor::vector({0, 0}), Tensor::vector({0})};
    adam_step(params, zero, state, cfg);
    CHECK(a == Tensor::vector({1.0, -2.0}));
    CHECK(b == Tensor::vector({0.5}));

    AdamState fresh;
    Tensor s = Tensor::vector({0.0});
    std::vector<Tensor*> one{&s};
    std::vector<Tensor> g{Tensor::vector({1.0})};
    adam_step(one, g, fresh, cfg);
    CHECK(s[0] == doctest::Approx(-0.001).epsilon(1e-6));

    // Only the first tensor receives gradient; the second must not move.
    AdamState st;
    Tensor p = Tensor::vector({1.0}), q = Tensor::vector({1.0});
    std::vector<Tensor*> pq{&p, &q};
    std::vector<Tensor> gpq{Tensor::vector({1.0}), Tensor::vector({0.0})};
    for (int i = 0; i < 3; ++i)
        adam_step(pq, gpq, st, cfg);
    CHECK(p[0] < 1.0);
    CHECK(q[0] == 1.0);
}

TEST_CASE("zero epochs is a no-op and training is deterministic")
{
    auto data = synth_blobs(BlobSpec{});
    auto net = make_mlp({2, {8}, 2, true}, 3);
    TrainingConfig cfg;
    cfg.epochs = 0;
    auto r0 = train(net, data, cfg);
    CHECK(r0.net == net);
    CHECK(r0.metrics.epochs.empty());

    cfg.epochs = 3;
    cfg.seed = 17;
    auto r1 = train(net, data, cfg);
    auto r2 = train(net, data, cfg);
    CHECK(r1.net == r2.net);
    CHECK(!(r1.net == net));
    REQUIRE(r1.metrics.epochs.size() == 3);
    const auto& m = r1.metrics.epochs.back();
    CHECK(m.empirical_risk == doctest::Approx(1.0 - m.train_accuracy));
    CHECK(m.test_accuracy.has_value());
}

TEST_CASE("blob training reaches high accuracy")
{
    auto data = synth_blobs(BlobSpec{1, 100, 2, 2, 0.05});
    TrainingConfig cfg;
    cfg.learning_rate = 0.01;
    cfg.epochs = 200;
    cfg.seed = 1;
    auto res = train(make_mlp({2, {16}, 2, true}, 1), data, cfg);
    CHECK(evaluate(res.net, data.test()).accuracy >= 0.95);
}

TEST_CASE("sparsity pressure shrinks gamma")
{
    auto data = synth_blobs(BlobSpec{1, 100, 2, 2, 0.05});
    auto net = make_mlp({2, {16}, 2, true}, 2);
    TrainingConfig cfg;
    cfg.learning_rate = 0.01;
    cfg.epochs = 50;
    cfg.seed = 2;
    auto plain = train(net, data, cfg);
    cfg.slim_lambda = 0.01;
    auto sparse = train(net, data, cfg);
    CHECK(mean_abs_gamma(sparse.net) <= mean_abs_gamma(plain.net));
}

TEST_CASE("evaluate")
{
    SequentialNetwork net;
    net.input_dim = 2;
    net.nodes.push_back(FullyConnectedNode{Tensor::identity(2), Tensor::vector({0, 0})});
    std::vector<Sample> samples{{{0.9, 0.1}, 0}, {{0.2, 0.8}, 1}};
    auto e = evaluate(net, samples);
    CHECK(e.accuracy == 1.0);
    CHECK(e.misclassified == 0);

    // Train split accuracy agrees with a classify loop.
    auto data = synth_blobs(BlobSpec{4, 50, 3, 2, 0.2});
    auto r = make_mlp({2, {6}, 3, true}, 4);
    std::size_t wrong = 0;
    for (const auto& s : data.train())
        wrong += classify(r, s.input) != s.label;
    auto ev = evaluate(r, data.train());
    CHECK(ev.misclassified == wrong);
    CHECK(ev.accuracy == 1.0 - static_cast<double>(wrong) / static_cast<double>(data.train().size()));
}

TEST_CASE("random net on random labels scores near chance")
{
    std::mt19937_64 rng(12);
    auto net = random_net(rng, 4, {8}, 2, true);
    std::vector<Sample> samples;
    std::bernoulli_distribution coin(0.5);
    for (int i = 0; i < 10000; ++i)
        samples.push_back({uniform_vector(rng, 4, 0, 1), coin(rng) ? 1u : 0u});
    auto acc = evaluate(net, samples).accuracy;
    CHECK(acc >= 0.45);
    CHECK(acc <= 0.55);
}

TEST_CASE("config validation")
{
    TrainingConfig c;
    c.batch_size = 0;
    CHECK_THROWS(c.check());
    c = {};
    c.learning_rate = -1;
    CHECK_THROWS(c.check());
    c = {};
    c.bn_momentum = 0;
    CHECK_THROWS(c.check());
}
