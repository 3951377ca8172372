#include "nnkit/repair.hpp"

#include <algorithm>
#include <stdexcept>

namespace nnkit {

void RepairConfig::check() const
{
    if (max_iterations == 0)
        throw std::invalid_argument("repair: max_iterations must be positive");
    if (counterexamples_per_property == 0)
        throw std::invalid_argument("repair: counterexamples_per_property must be at least 1");
    trainer.check();
    verifier.check();
}

namespace {

std::vector<Verdict> verify_all(const SequentialNetwork& net, std::span<const Property> properties,
                                const BabConfig& config)
{
    std::vector<Verdict> out;
    out.reserve(properties.size());
    for (const auto& p : properties)
        out.push_back(verify_bab(net, p, config).status);
    return out;
}

// Witnesses sampled from a small box around a known counterexample.
std::vector<Vector> harvest_near(const SequentialNetwork& net, const Property& property,
                                 const Counterexample& cex, std::size_t wanted, std::uint64_t seed)
{
    std::vector<Vector> out;
    if (wanted == 0)
        return out;
    Property local = property;
    const double radius = std::max(property.robustness->epsilon * 0.25, 1e-9);
    for (std::size_t i = 0; i < local.input_dim(); ++i) {
        local.input_box.lo[i] = std::max(property.input_box.lo[i], cex.input[i] - radius);
        local.input_box.hi[i] = std::min(property.input_box.hi[i], cex.input[i] + radius);
    }
    for (std::size_t attempt = 0; attempt < 4 * wanted && out.size() < wanted; ++attempt) {
        auto found = falsify_sample(net, local, 256, seed + attempt);
        if (!found)
            break;
        if (found->input != cex.input && std::find(out.begin(), out.end(), found->input) == out.end())
            out.push_back(found->input);
    }
    return out;
}

}  // namespace

RepairResult repair(const SequentialNetwork& net, std::span<const Property> properties,
                    const Dataset& data, const RepairConfig& config)
{
    config.check();
    require_valid(net);
    for (std::size_t i = 0; i < properties.size(); ++i)
        if (!properties[i].robustness)
            throw std::invalid_argument("repair: property " + std::to_string(i) +
                                        " is not a robustness property; generic properties carry no "
                                        "label for counterexamples and are verification-only");

    RepairResult res{net, data, {}};
    bool verified_current = false;

    for (std::size_t it = 1; it <= config.max_iterations; ++it) {
        RepairIteration round;
        round.iteration = it;
        std::vector<Counterexample> found(properties.size());
        std::vector<bool> falsified(properties.size(), false);
        for (std::size_t i = 0; i < properties.size(); ++i) {
            VerificationResult vr = verify_bab(res.net, properties[i], config.verifier);
            round.statuses.push_back(vr.status);
            if (vr.status == Verdict::Falsified) {
                falsified[i] = true;
                found[i] = *vr.counterexample;
            }
        }

        if (std::all_of(round.statuses.begin(), round.statuses.end(),
                        [](Verdict v) { return v == Verdict::Verified; })) {
            round.train_accuracy = res.data.train().empty() ? 0.0 : evaluate(res.net, res.data.train()).accuracy;
            if (!res.data.test().empty())
                round.test_accuracy = evaluate(res.net, res.data.test()).accuracy;
            res.report.final_statuses = round.statuses;
            res.report.iterations.push_back(std::move(round));
            verified_current = true;
            break;
        }

        for (std::size_t i = 0; i < properties.size(); ++i) {
            if (!falsified[i])
                continue;
            const std::size_t label = properties[i].robustness->label;
            std::vector<Vector> inputs{found[i].input};
            auto extra = harvest_near(res.net, properties[i], found[i],
                                      config.counterexamples_per_property - 1,
                                      config.verifier.seed + 1000 * it + i);
            inputs.insert(inputs.end(), extra.begin(), extra.end());
            for (auto& x : inputs) {
                Sample s{std::move(x), label};
                res.data.add_train_sample(s);
                res.report.added.push_back({it, i, std::move(s)});
                ++round.samples_added;
            }
        }
        res.report.total_added += round.samples_added;

        if (round.samples_added > 0) {
            TrainingConfig tc = config.trainer;
            tc.seed = config.trainer.seed + it;
            SequentialNetwork start = res.net;
            if (config.from_scratch) {
                NetworkStats st = network_stats(res.net);
                MlpShape shape{st.input_dim,
                               std::vector<std::size_t>(st.widths.begin() + 1, st.widths.end() - 1),
                               st.output_dim, has_batchnorm(res.net)};
                start = make_mlp(shape, tc.seed, res.net.name);
            }
            res.net = train(start, res.data, tc).net;
            round.retrained = true;
        }
        round.train_accuracy = evaluate(res.net, res.data.train()).accuracy;
        if (!res.data.test().empty())
            round.test_accuracy = evaluate(res.net, res.data.test()).accuracy;
        const bool changed = round.retrained;
        res.report.iterations.push_back(std::move(round));
        if (!changed)
            break;  // nothing harvested: further rounds would repeat this one
    }

    if (!verified_current)
        res.report.final_statuses = verify_all(res.net, properties, config.verifier);
    res.report.all_verified = std::all_of(res.report.final_statuses.begin(), res.report.final_statuses.end(),
                                          [](Verdict v) { return v == Verdict::Verified; });
    return res;
}

}  // namespace nnkit
