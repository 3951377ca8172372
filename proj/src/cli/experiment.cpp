#include "nnkit/cli/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <sstream>

#include "nnkit/pruning.hpp"
#include "nnkit/training.hpp"
#include "nnkit/verifier.hpp"

namespace nnkit::cli {

using nlohmann::json;

std::size_t VariantResult::count(Verdict v) const
{
    std::size_t n = 0;
    for (const auto& r : instances)
        n += r.status == v;
    return n;
}

double VariantResult::mean_root_unstable() const
{
    if (instances.empty())
        return 0.0;
    double s = 0.0;
    for (const auto& r : instances)
        s += static_cast<double>(r.root_unstable);
    return s / static_cast<double>(instances.size());
}

double VariantResult::mean_seconds() const
{
    if (instances.empty())
        return 0.0;
    double s = 0.0;
    for (const auto& r : instances)
        s += r.seconds;
    return s / static_cast<double>(instances.size());
}

namespace {

const std::vector<Sample>& query_pool(const Dataset& data)
{
    return data.test().empty() ? data.train() : data.test();
}

void verify_variant(VariantResult& v, const ExperimentResult& exp, const Dataset& data,
                    const RunConfig& config, std::ostream* log)
{
    const auto& pool = query_pool(data);
    BabConfig bab = config.verify.bab;
    bab.time_budget = exp.config.timeout;
    for (std::size_t q = 0; q < exp.query_samples.size(); ++q) {
        const Sample& s = pool[exp.query_samples[q]];
        auto property = robustness_property(s.input, s.label, data.num_classes(), exp.config.epsilon,
                                            unit_box(data.input_dim()));
        const auto start = std::chrono::steady_clock::now();
        auto r = verify_bab(v.net, property, bab);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        v.instances.push_back({q, exp.query_samples[q], s.label, r.status, secs, r.stats.nodes,
                               r.stats.root_unstable, r.stats.reason});
        if (log)
            *log << "  " << v.name << " query " << q << ": " << to_string(r.status) << " ("
                 << r.stats.nodes << " nodes, " << secs << " s)\n";
    }
}

}  // namespace

ExperimentResult run_experiment(const RunConfig& config, const Dataset& data, std::ostream* log)
{
    if (!config.model.batch_norm)
        throw ConfigError("experiment: network slimming needs model.batch_norm = true");
    ExperimentResult exp;
    exp.config = config.experiment;
    const auto& pool = query_pool(data);
    for (std::size_t i = 0; i < exp.config.queries && i < pool.size(); ++i)
        exp.query_samples.push_back(i);

    MlpShape shape{data.input_dim(), config.model.hidden, data.num_classes(), true, config.model.bn_eps};
    const auto init = make_mlp(shape, config.seed, config.model.name);

    TrainingConfig plain = config.train;
    plain.slim_lambda = 0.0;
    TrainingConfig sparse = config.train;
    sparse.slim_lambda = exp.config.sparse_lambda;
    TrainingConfig tune = plain;
    tune.epochs = exp.config.fine_tune_epochs;

    auto add = [&](std::string name, SequentialNetwork net) {
        VariantResult v;
        v.name = std::move(name);
        v.accuracy = evaluate(net, pool).accuracy;
        v.sparsity = sparsity(net);
        v.widths = network_stats(net).widths;
        v.net = std::move(net);
        if (log)
            *log << v.name << ": accuracy " << v.accuracy << "\n";
        exp.variants.push_back(std::move(v));
    };

    add("Baseline", train(init, data, plain).net);
    add("Sparse", train(init, data, sparse).net);

    PruningConfig wp;
    wp.method = PruningMethod::WeightPruning;
    wp.ratio = exp.config.wp_ratio;
    if (tune.epochs > 0)
        wp.fine_tune = tune;
    add("WP", prune_pipeline(exp.variants[0].net, data, wp).net);

    PruningConfig ns;
    ns.method = PruningMethod::NetworkSlimming;
    ns.ratio = exp.config.ns_ratio;
    if (tune.epochs > 0)
        ns.fine_tune = tune;
    add("NS", prune_pipeline(exp.variants[1].net, data, ns).net);

    for (auto& v : exp.variants)
        verify_variant(v, exp, data, config, log);
    return exp;
}

json experiment_to_json(const ExperimentResult& r)
{
    json rows = json::array(), records = json::array();
    for (const auto& v : r.variants) {
        rows.push_back({{"variant", v.name},
                        {"solved", v.solved()},
                        {"verified", v.count(Verdict::Verified)},
                        {"falsified", v.count(Verdict::Falsified)},
                        {"unknown", v.count(Verdict::Unknown)},
                        {"accuracy", v.accuracy},
                        {"sparsity", v.sparsity},
                        {"widths", v.widths},
                        {"mean_root_unstable", v.mean_root_unstable()},
                        {"mean_seconds", v.mean_seconds()}});
        for (const auto& i : v.instances)
            records.push_back({{"variant", v.name},
                               {"query", i.query},
                               {"sample_index", i.sample_index},
                               {"label", i.label},
                               {"status", to_string(i.status)},
                               {"seconds", i.seconds},
                               {"nodes", i.nodes},
                               {"root_unstable", i.root_unstable},
                               {"reason", i.reason}});
    }
    return {{"queries", r.query_samples.size()},
            {"epsilon", r.config.epsilon},
            {"timeout", r.config.timeout},
            {"table", rows},
            {"instances", records}};
}

std::string format_table(const ExperimentResult& r)
{
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof line, "%-9s %7s %9s %10s %8s %9s %13s %9s\n", "variant", "solved",
                  "verified", "falsified", "unknown", "accuracy", "root_unstable", "mean_s");
    out << line;
    for (const auto& v : r.variants) {
        std::snprintf(line, sizeof line, "%-9s %4zu/%-2zu %9zu %10zu %8zu %9.4f %13.2f %9.3f\n",
                      v.name.c_str(), v.solved(), v.instances.size(), v.count(Verdict::Verified),
                      v.count(Verdict::Falsified), v.count(Verdict::Unknown), v.accuracy,
                      v.mean_root_unstable(), v.mean_seconds());
        out << line;
    }
    return out.str();
}

}  // namespace nnkit::cli
