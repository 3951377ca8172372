#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "../oracles/exact.hpp"
#include "../support/random_nets.hpp"
#include "../support/verify_cases.hpp"
#include "nnkit/verifier.hpp"

using namespace nnkit;
using testsupport::box_property;
using testsupport::chain;
using testsupport::identity_net;
using testsupport::out_atom;

namespace {

// Y_0 >= c  as  -Y_0 <= -c.
Conjunction at_least(double c)
{
    return {out_atom({-1.0}, -c)};
}

// y = relu(x) - relu(x) on [-1, 1]: identically zero, but interval
// arithmetic loses the correlation and reports [-1, 1].
SequentialNetwork cancelling_net()
{
    return chain(1, {{Tensor::matrix({{1}, {1}}), {0, 0}}, {Tensor::matrix({{1, -1}}), {0}}});
}

void check_sound(const SequentialNetwork& net, const Property& p, const VerificationResult& r)
{
    if (r.status == Verdict::Falsified) {
        REQUIRE(r.counterexample.has_value());
        const auto& cx = *r.counterexample;
        CHECK(p.input_box.contains(cx.input));
        auto y = forward(net, cx.input);
        CHECK(y == cx.output);
        for (const auto& atom : p.disjuncts[cx.disjunct])
            CHECK(atom.holds(y, kWitnessTolerance));
    } else {
        CHECK(!r.counterexample.has_value());
    }
}

}  // namespace

TEST_CASE("identity net")
{
    auto net = identity_net(1);
    auto safe = box_property({0}, {1}, 1, {at_least(2.0)});
    auto ibp = verify_ibp(net, safe);
    CHECK(ibp.status == Verdict::Verified);
    auto bab = verify_bab(net, safe);
    CHECK(bab.status == Verdict::Verified);
    CHECK(bab.stats.nodes == 1);

    auto unsafe = box_property({0}, {1}, 1, {at_least(0.5)});
    for (auto r : {verify_ibp(net, unsafe), verify_bab(net, unsafe)}) {
        CHECK(r.status == Verdict::Falsified);
        check_sound(net, unsafe, r);
        CHECK(r.counterexample->input[0] >= 0.5 - kWitnessTolerance);
    }
}

TEST_CASE("loose intervals leave IBP undecided while bab proves safety")
{
    auto net = cancelling_net();
    auto p = box_property({-1}, {1}, 1, {at_least(0.5)});
    for (int i = 0; i <= 2000; ++i)
        CHECK(forward(net, Vector{-1.0 + i / 1000.0})[0] == 0.0);
    auto bounds = interval_forward(net, p.input_box);
    CHECK(bounds.back().post_hi[0] >= 0.5);
    auto ibp = verify_ibp(net, p);
    CHECK(ibp.status == Verdict::Unknown);
    CHECK(!ibp.stats.reason.empty());
    CHECK(verify_bab(net, p).status == Verdict::Verified);
}

TEST_CASE("shifted relu is falsified on its active half")
{
    auto net = chain(1, {{Tensor::matrix({{1}}), {0}}, {Tensor::matrix({{1}}), {-0.5}}});
    auto p = box_property({0}, {1}, 1, {at_least(0.0)});
    // Grid: exactly the points x >= 0.5 violate.
    for (int i = 0; i <= 100; ++i) {
        double x = i / 100.0;
        CHECK((forward(net, Vector{x})[0] >= 0.0) == (x >= 0.5));
    }
    auto r = verify_bab(net, p);
    REQUIRE(r.status == Verdict::Falsified);
    check_sound(net, p, r);
    CHECK(r.counterexample->input[0] >= 0.5 - 1e-7);
}

TEST_CASE("check_pattern")
{
    auto id = identity_net(1);
    Box box{{0}, {1}};
    CHECK(check_pattern(id, box, {}, at_least(2.0)).status == PatternCheck::Status::Infeasible);
    auto w = check_pattern(id, box, {}, at_least(0.5));
    REQUIRE(w.status == PatternCheck::Status::Witness);
    CHECK(w.point[0] >= 0.5 - 1e-7);

    // relu(x + 1) on [0, 1] is always active, so forcing it off is infeasible.
    auto net = chain(1, {{Tensor::matrix({{1}}), {1}}, {Tensor::matrix({{1}}), {0}}});
    auto bounds = interval_forward(net, box);
    CHECK(bounds[0].pre_lo[0] > 0.0);
    auto any = at_least(-100.0);
    CHECK(check_pattern(net, box, {PhaseState::Inactive}, any).status == PatternCheck::Status::Infeasible);
    CHECK(check_pattern(net, box, {PhaseState::Active}, any).status == PatternCheck::Status::Witness);
}

TEST_CASE("falsify_sample")
{
    auto net = identity_net(1);
    auto none = box_property({0}, {1}, 1, {at_least(1.5)});
    CHECK(!falsify_sample(net, none, 1000, 1));
    auto half = box_property({0}, {1}, 1, {at_least(0.5)});
    auto w = falsify_sample(net, half, 1000, 1);
    REQUIRE(w.has_value());
    CHECK(w->input[0] >= 0.5);
    CHECK(falsify_sample(net, half, 1000, 1)->input == w->input);

    // Every sampled witness must also drive bab to Falsified.
    std::mt19937_64 rng(50);
    std::size_t hits = 0;
    for (int t = 0; t < 100; ++t) {
        auto c = testsupport::random_verify_case(rng);
        if (auto s = falsify_sample(c.net, c.property, 200, t)) {
            ++hits;
            CHECK(verify_bab(c.net, c.property).status == Verdict::Falsified);
        }
    }
    CHECK(hits > 0);
}

TEST_CASE("bab matches the exhaustive pattern oracle")
{
    std::mt19937_64 rng(51);
    std::size_t falsified = 0;
    for (int t = 0; t < 60; ++t) {
        auto c = testsupport::random_verify_case(rng);
        auto r = verify_bab(c.net, c.property);
        oracle::ExhaustiveOracle oracle(c.net, c.property);
        const bool violated = oracle.violated();
        CHECK(r.status != Verdict::Unknown);
        CHECK((r.status == Verdict::Falsified) == violated);
        check_sound(c.net, c.property, r);
        falsified += violated;
    }
    MESSAGE(falsified << " of 60 instances violated");
    CHECK(falsified > 0);
    CHECK(falsified < 60);
}

TEST_CASE("small nets are always decided")
{
    std::mt19937_64 rng(52);
    for (int t = 0; t < 100; ++t) {
        auto c = testsupport::random_verify_case(rng, 6);
        BabConfig cfg;
        cfg.max_nodes = 1;  // the root must be decided exactly
        auto r = verify_bab(c.net, c.property, cfg);
        CHECK(r.status != Verdict::Unknown);
        CHECK(r.stats.nodes == 1);
    }
}

TEST_CASE("shrinking the box never turns Verified into Falsified")
{
    std::mt19937_64 rng(53);
    for (int t = 0; t < 60; ++t) {
        auto c = testsupport::random_verify_case(rng);
        if (verify_bab(c.net, c.property).status != Verdict::Verified)
            continue;
        auto inner = c.property;
        for (std::size_t i = 0; i < inner.input_dim(); ++i) {
            double mid = 0.5 * (inner.input_box.lo[i] + inner.input_box.hi[i]);
            inner.input_box.lo[i] = 0.5 * (inner.input_box.lo[i] + mid);
        }
        CHECK(verify_bab(c.net, inner).status == Verdict::Verified);
    }
}

TEST_CASE("budgets produce Unknown")
{
    std::mt19937_64 rng(54);
    auto net = fold_batchnorm(testsupport::random_net(rng, 6, {24, 24}, 3, true));
    Vector x0(6, 0.5);
    auto p = robustness_property(x0, classify(net, x0), 3, 0.5, unit_box(6));
    BabConfig tiny;
    tiny.time_budget = 1e-9;
    auto r = verify_bab(net, p, tiny);
    // Either a witness turned up before the first budget check or the run gave up.
    if (r.status == Verdict::Unknown)
        CHECK(!r.stats.reason.empty());
    else
        CHECK(r.status == Verdict::Falsified);

    BabConfig bad;
    bad.max_nodes = 0;
    CHECK_THROWS(verify_bab(net, p, bad));
    CHECK_THROWS(verify_bab(net, box_property({0}, {1}, 3, {{out_atom({1, 0, 0}, 0)}})));
}

TEST_CASE("verdicts are deterministic")
{
    std::mt19937_64 rng(55);
    for (int t = 0; t < 30; ++t) {
        auto c = testsupport::random_verify_case(rng);
        auto a = verify_bab(c.net, c.property), b = verify_bab(c.net, c.property);
        CHECK(a.status == b.status);
        if (a.counterexample)
            CHECK(a.counterexample->input == b.counterexample->input);
    }
}

TEST_CASE("batch-norm nets are verified through their folded form")
{
    std::mt19937_64 rng(56);
    for (int t = 0; t < 20; ++t) {
        auto net = testsupport::random_net(rng, 2, {4}, 2, true);
        Vector x0 = testsupport::uniform_vector(rng, 2, 0, 1);
        auto p = robustness_property(x0, classify(net, x0), 2, 0.1, unit_box(2));
        auto r = verify_bab(net, p);
        CHECK(r.status == verify_bab(fold_batchnorm(net), p).status);
        check_sound(net, p, r);
    }
}
