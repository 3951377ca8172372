#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "../support/random_nets.hpp"
#include "../support/repair_scenario.hpp"
#include "nnkit/repair.hpp"

using namespace nnkit;

namespace {

void check_report(const testsupport::RepairScenario& s, const RepairResult& r)
{
    auto audit = testsupport::audit_repair(s, r);
    CHECK(audit.honest);
    CHECK(audit.bookkeeping);
    CHECK(audit.labels);
}

}  // namespace

TEST_CASE("already verified properties return immediately")
{
    auto s = testsupport::repair_scenario(1);
    // A constant net whose favourite class matches every property label.
    auto net = testsupport::chain(2, {{Tensor::matrix({{0, 0}, {0, 0}}), {1, 0}}});
    std::vector<Property> props;
    for (const auto& p : s.properties)
        if (p.robustness->label == 0)
            props.push_back(p);
    REQUIRE(!props.empty());
    s.properties = props;
    auto r = repair(net, props, s.data, s.config);
    CHECK(r.net == net);
    CHECK(r.report.total_added == 0);
    CHECK(r.report.all_verified);
    CHECK(r.report.iterations.size() == 1);
    CHECK(!r.report.iterations[0].retrained);
    CHECK(r.data == s.data);
}

TEST_CASE("one round with a falsified property")
{
    auto s = testsupport::repair_scenario(2);
    // Constant class-0 net: every class-1 property is falsified.
    s.net = testsupport::chain(2, {{Tensor::matrix({{0, 0}, {0, 0}}), {1, 0}}});
    std::vector<Property> props;
    for (const auto& p : s.properties)
        if (p.robustness->label == 1) {
            props.push_back(p);
            break;
        }
    REQUIRE(props.size() == 1);
    s.properties = props;
    s.config.max_iterations = 1;
    auto r = repair(s.net, props, s.data, s.config);
    REQUIRE(r.report.iterations.size() == 1);
    CHECK(r.report.iterations[0].statuses[0] == Verdict::Falsified);
    CHECK(r.report.iterations[0].retrained);
    CHECK(r.report.total_added >= 1);
    check_report(s, r);
}

TEST_CASE("blob scenario bookkeeping and honesty")
{
    for (std::uint64_t seed : {3, 4}) {
        auto s = testsupport::repair_scenario(seed);
        auto r = repair(s.net, s.properties, s.data, s.config);
        check_report(s, r);
        auto again = repair(s.net, s.properties, s.data, s.config);
        CHECK(again.net == r.net);
        CHECK(again.report.final_statuses == r.report.final_statuses);
        CHECK(again.report.total_added == r.report.total_added);
    }
}

TEST_CASE("generic properties are rejected")
{
    auto s = testsupport::repair_scenario(1);
    auto generic = testsupport::box_property({0, 0}, {1, 1}, 2, {{testsupport::out_atom({1, -1}, 0)}});
    std::vector<Property> props{generic};
    CHECK_THROWS_AS(repair(s.net, props, s.data, s.config), std::invalid_argument);
    RepairConfig bad = s.config;
    bad.max_iterations = 0;
    CHECK_THROWS(repair(s.net, s.properties, s.data, bad));
}
