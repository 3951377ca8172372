#include "nnkit/cli/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "nnkit/atomic_file.hpp"
#include "nnkit/cli/config.hpp"
#include "nnkit/cli/experiment.hpp"
#include "nnkit/model_io.hpp"
#include "nnkit/pruning.hpp"
#include "nnkit/repair.hpp"
#include "nnkit/smtlib.hpp"
#include "nnkit/training.hpp"

namespace nnkit::cli {

using nlohmann::json;
namespace fs = std::filesystem;

int exit_code(Verdict v)
{
    switch (v) {
    case Verdict::Verified:
        return kVerified;
    case Verdict::Falsified:
        return kFalsified;
    default:
        return kUnknown;
    }
}

json result_record(const VerificationResult& r)
{
    json rec = {{"status", to_string(r.status)},
                {"input", nullptr},
                {"output", nullptr},
                {"disjunct", nullptr},
                {"stats",
                 {{"nodes", r.stats.nodes},
                  {"lp_calls", r.stats.lp_calls},
                  {"wall_seconds", r.stats.wall_seconds},
                  {"root_unstable", r.stats.root_unstable},
                  {"reason", r.stats.reason}}}};
    if (r.counterexample) {
        rec["input"] = r.counterexample->input;
        rec["output"] = r.counterexample->output;
        rec["disjunct"] = r.counterexample->disjunct;
    }
    return rec;
}

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void add_common(CLI::App* sub, Common& c, bool out_required)
{
    sub->add_option("--config", c.config, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", c.seed, "overrides the configuration seed");
    auto* out = sub->add_option("--out", c.out, "output path");
    if (out_required)
        out->required();
}

RunConfig resolve(const Common& c)
{
    RunConfig config = c.config.empty() ? parse_run_config(json::object()) : load_run_config(c.config);
    if (c.seed)
        config.apply_seed(*c.seed);
    return config;
}

void write_json(const fs::path& path, const json& doc)
{
    write_file_atomic(path, doc.dump(2) + "\n");
}

fs::path sibling(const fs::path& out, const std::string& suffix)
{
    fs::path p = out;
    return p.replace_extension(suffix);
}

void check_model_matches(const SequentialNetwork& net, const Dataset& data)
{
    if (net.input_dim != data.input_dim() || net.output_dim() != data.num_classes())
        throw ShapeError("model is " + std::to_string(net.input_dim) + " -> " +
                         std::to_string(net.output_dim()) + " but the dataset is " +
                         std::to_string(data.input_dim()) + " -> " + std::to_string(data.num_classes()));
}

// Robustness property around a test sample with its true label. Shared by
// verify --robustness and export-smtlib so both paths see the same query.
Property robustness_query(const Dataset& data, std::size_t index, double epsilon)
{
    const auto& pool = data.test();
    if (index >= pool.size())
        throw std::out_of_range("sample index " + std::to_string(index) + " outside the test split (size " +
                                std::to_string(pool.size()) + ")");
    const Sample& s = pool[index];
    return robustness_property(s.input, s.label, data.num_classes(), epsilon, unit_box(data.input_dim()));
}

json metrics_json(const TrainingMetrics& m)
{
    json epochs = json::array();
    for (const auto& e : m.epochs) {
        json row = {{"epoch", e.epoch},
                    {"loss",
                     {{"surrogate", e.loss.surrogate},
                      {"l2_term", e.loss.l2_term},
                      {"slim_term", e.loss.slim_term},
                      {"total", e.loss.total()}}},
                    {"empirical_risk", e.empirical_risk},
                    {"regularizer", e.regularizer},
                    {"objective", e.objective},
                    {"train_accuracy", e.train_accuracy}};
        row["test_accuracy"] = e.test_accuracy ? json(*e.test_accuracy) : json(nullptr);
        epochs.push_back(row);
    }
    return epochs;
}

json stage_json(const PruneStage& s)
{
    return {{"name", s.name},
            {"accuracy", s.accuracy ? json(*s.accuracy) : json(nullptr)},
            {"sparsity", s.sparsity},
            {"widths", s.widths}};
}

std::optional<double> split_accuracy(const SequentialNetwork& net, const std::vector<Sample>& s)
{
    if (s.empty())
        return std::nullopt;
    return evaluate(net, s).accuracy;
}

json opt(std::optional<double> v)
{
    return v ? json(*v) : json(nullptr);
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
    Common common;
    std::string metrics;
    std::string init;
    std::optional<std::size_t> epochs;
    std::optional<double> learning_rate;
};

int cmd_train(const TrainArgs& a, std::ostream& out)
{
    RunConfig config = resolve(a.common);
    if (a.epochs)
        config.train.epochs = *a.epochs;
    if (a.learning_rate)
        config.train.learning_rate = *a.learning_rate;
    config.train.check();
    Dataset data = load_data(config.data);
    SequentialNetwork init =
        a.init.empty()
            ? make_mlp({data.input_dim(), config.model.hidden, data.num_classes(), config.model.batch_norm,
                        config.model.bn_eps},
                       config.seed, config.model.name)
            : load_model(a.init);
    check_model_matches(init, data);
    auto result = train(init, data, config.train);
    const auto train_acc = split_accuracy(result.net, data.train());
    const auto test_acc = split_accuracy(result.net, data.test());
    json metrics = {{"config", run_config_to_json(config)},
                    {"epochs", metrics_json(result.metrics)},
                    {"train_accuracy", opt(train_acc)},
                    {"test_accuracy", opt(test_acc)}};
    save_model(result.net, a.common.out);
    write_json(a.metrics.empty() ? sibling(a.common.out, ".metrics.json") : fs::path(a.metrics), metrics);
    out << "trained " << config.train.epochs << " epochs; train accuracy "
        << (train_acc ? std::to_string(*train_acc) : "n/a") << ", test accuracy "
        << (test_acc ? std::to_string(*test_acc) : "n/a") << "\n";
    return kOk;
}

// ---- prune -----------------------------------------------------------------

struct PruneArgs {
    Common common;
    std::string model;
    std::string report;
    std::optional<std::string> method;
    std::optional<double> ratio;
    std::optional<double> threshold;
    std::optional<std::size_t> fine_tune;
    std::optional<std::size_t> pre_train;
};

PruningMethod method_from(const std::string& s)
{
    if (s == "wp")
        return PruningMethod::WeightPruning;
    if (s == "ns")
        return PruningMethod::NetworkSlimming;
    throw CLI::ValidationError("--method", "must be wp or ns, got '" + s + "'");
}

int cmd_prune(const PruneArgs& a, std::ostream& out)
{
    RunConfig config = resolve(a.common);
    PruneConfig pc = config.prune;
    if (a.method)
        pc.method = method_from(*a.method);
    if (a.ratio || a.threshold) {
        pc.ratio = a.ratio;
        pc.threshold = a.threshold;
    }
    if (a.fine_tune)
        pc.fine_tune_epochs = *a.fine_tune;
    if (a.pre_train)
        pc.pre_train_epochs = *a.pre_train;

    PruningConfig p;
    p.method = pc.method;
    p.ratio = pc.ratio;
    p.threshold = pc.threshold;
    if (pc.pre_train_epochs > 0) {
        if (p.method != PruningMethod::NetworkSlimming)
            throw ConfigError("--pre-train applies to network slimming only");
        TrainingConfig t = config.train;
        t.epochs = pc.pre_train_epochs;
        t.slim_lambda = pc.slim_lambda;
        p.pre_train = t;
    }
    if (pc.fine_tune_epochs > 0) {
        TrainingConfig t = config.train;
        t.epochs = pc.fine_tune_epochs;
        p.fine_tune = t;
    }
    p.check();

    SequentialNetwork net = load_model(a.model);
    const bool trains = p.pre_train || p.fine_tune;
    // Data is only needed for training stages or when the config names a source.
    Dataset data = trains || config.data.from_document ? load_data(config.data)
                                                      : Dataset(net.input_dim, std::max<std::size_t>(net.output_dim(), 1));
    if (trains || config.data.from_document)
        check_model_matches(net, data);
    auto res = prune_pipeline(net, data, p);

    json stages = json::array();
    for (const auto& s : res.report.stages)
        stages.push_back(stage_json(s));
    json report = {{"config", run_config_to_json(config)},
                   {"method", to_string(p.method)},
                   {"input", stage_json(res.report.input)},
                   {"stages", stages}};
    save_model(res.net, a.common.out);
    write_json(a.report.empty() ? sibling(a.common.out, ".prune.json") : fs::path(a.report), report);
    const auto widths = network_stats(res.net).widths;
    out << "pruned (" << to_string(p.method) << "): sparsity " << sparsity(res.net) << ", widths";
    for (auto w : widths)
        out << " " << w;
    out << "\n";
    return kOk;
}

// ---- verify ----------------------------------------------------------------

struct VerifyArgs {
    Common common;
    std::string model;
    std::string property;
    bool robustness = false;
    std::optional<std::size_t> sample_index;
    std::optional<double> epsilon;
    std::optional<std::string> engine;
    std::optional<double> timeout;
    std::optional<std::size_t> max_nodes;
};

Property load_property_file(const fs::path& path)
{
    return parse_smtlib(read_file(path));
}

int cmd_verify(const VerifyArgs& a, std::ostream& out)
{
    RunConfig config = resolve(a.common);
    VerifyConfig vc = config.verify;
    if (a.engine) {
        if (*a.engine == "bab")
            vc.engine = Engine::Bab;
        else if (*a.engine == "ibp")
            vc.engine = Engine::Ibp;
        else
            throw CLI::ValidationError("--engine", "must be ibp or bab, got '" + *a.engine + "'");
    }
    if (a.timeout)
        vc.bab.time_budget = *a.timeout;
    if (a.max_nodes)
        vc.bab.max_nodes = *a.max_nodes;
    if (a.epsilon)
        vc.epsilon = *a.epsilon;
    if (a.sample_index)
        vc.sample_index = *a.sample_index;
    if (!a.property.empty())
        vc.property = a.property;
    vc.bab.check();

    SequentialNetwork net = load_model(a.model);
    Property property;
    if (!a.property.empty() || (!a.robustness && vc.property)) {
        property = load_property_file(*vc.property);
    } else {
        if (!vc.sample_index)
            throw ConfigError("verify needs --property or --robustness with --sample-index");
        Dataset data = load_data(config.data);
        check_model_matches(net, data);
        property = robustness_query(data, *vc.sample_index, vc.epsilon);
    }
    if (property.input_dim() != net.input_dim || property.num_outputs != net.output_dim())
        throw ShapeError("property is over " + std::to_string(property.input_dim()) + " inputs and " +
                         std::to_string(property.num_outputs) + " outputs but the model is " +
                         std::to_string(net.input_dim) + " -> " + std::to_string(net.output_dim()));

    VerificationResult r = vc.engine == Engine::Bab
                               ? verify_bab(net, property, vc.bab)
                               : verify_ibp(net, property, vc.bab.sample_count, vc.bab.seed);
    json rec = result_record(r);
    if (!a.common.out.empty())
        write_json(a.common.out, rec);
    out << rec.dump(2) << "\n";
    return exit_code(r.status);
}

// ---- repair ----------------------------------------------------------------

struct RepairArgs {
    Common common;
    std::string model;
    std::string report;
    std::vector<std::size_t> sample_indices;
    std::optional<double> epsilon;
    std::optional<std::size_t> iterations;
    std::optional<std::size_t> epochs;
};

int cmd_repair(const RepairArgs& a, std::ostream& out)
{
    RunConfig config = resolve(a.common);
    RepairSection rs = config.repair;
    if (!a.sample_indices.empty())
        rs.sample_indices = a.sample_indices;
    if (a.epsilon)
        rs.epsilon = *a.epsilon;
    if (a.iterations)
        rs.max_iterations = *a.iterations;
    if (a.epochs)
        rs.epochs = *a.epochs;

    SequentialNetwork net = load_model(a.model);
    Dataset data = load_data(config.data);
    check_model_matches(net, data);
    std::vector<Property> properties;
    for (std::size_t i : rs.sample_indices)
        properties.push_back(robustness_query(data, i, rs.epsilon));

    RepairConfig rc;
    rc.max_iterations = rs.max_iterations;
    rc.trainer = config.train;
    rc.trainer.epochs = rs.epochs;
    rc.counterexamples_per_property = rs.counterexamples_per_property;
    rc.verifier = config.verify.bab;
    rc.from_scratch = rs.from_scratch;
    auto res = repair(net, properties, data, rc);

    const auto& rep = res.report;
    auto statuses = [](const std::vector<Verdict>& v) {
        json a = json::array();
        for (auto s : v)
            a.push_back(to_string(s));
        return a;
    };
    json iterations = json::array();
    for (const auto& it : rep.iterations)
        iterations.push_back({{"iteration", it.iteration},
                              {"statuses", statuses(it.statuses)},
                              {"samples_added", it.samples_added},
                              {"retrained", it.retrained},
                              {"train_accuracy", it.train_accuracy},
                              {"test_accuracy", opt(it.test_accuracy)}});
    json added = json::array();
    for (const auto& s : rep.added)
        added.push_back({{"iteration", s.iteration},
                         {"property", s.property},
                         {"input", s.sample.input},
                         {"label", s.sample.label}});
    json doc = {{"config", run_config_to_json(config)},
                {"sample_indices", rs.sample_indices},
                {"iterations", iterations},
                {"final_statuses", statuses(rep.final_statuses)},
                {"all_verified", rep.all_verified},
                {"total_added", rep.total_added},
                {"added", added}};
    save_model(res.net, a.common.out);
    write_json(a.report.empty() ? sibling(a.common.out, ".repair.json") : fs::path(a.report), doc);
    out << "repair: " << rep.iterations.size() << " rounds, " << rep.total_added << " samples added, "
        << (rep.all_verified ? "all properties verified" : "not all properties verified") << "\n";
    return kOk;
}

// ---- eval / info -----------------------------------------------------------

struct EvalArgs {
    Common common;
    std::string model;
    std::string split = "test";
};

int cmd_eval(const EvalArgs& a, std::ostream& out)
{
    RunConfig config = resolve(a.common);
    SequentialNetwork net = load_model(a.model);
    Dataset data = load_data(config.data);
    check_model_matches(net, data);
    const auto& samples = a.split == "train" ? data.train() : data.test();
    auto e = evaluate(net, samples);
    json doc = {{"split", a.split},
                {"accuracy", e.accuracy},
                {"misclassified", e.misclassified},
                {"total", e.total}};
    if (!a.common.out.empty())
        write_json(a.common.out, doc);
    out << "accuracy " << e.accuracy << " (" << (e.total - e.misclassified) << "/" << e.total << " correct, "
        << a.split << " split)\n";
    return kOk;
}

struct InfoArgs {
    Common common;
    std::string model;
};

int cmd_info(const InfoArgs& a, std::ostream& out)
{
    SequentialNetwork net = load_model(a.model);
    auto s = network_stats(net);
    json doc = {{"name", net.name},
                {"input_dim", s.input_dim},
                {"output_dim", s.output_dim},
                {"widths", s.widths},
                {"num_layers", s.num_layers},
                {"parameter_count", s.parameter_count},
                {"hidden_neurons", s.hidden_neurons},
                {"batch_norm", has_batchnorm(net)},
                {"sparsity", sparsity(net)}};
    if (!a.common.out.empty())
        write_json(a.common.out, doc);
    out << "name: " << net.name << "\nwidths:";
    for (auto w : s.widths)
        out << " " << w;
    out << "\nparameters: " << s.parameter_count << "\nhidden neurons: " << s.hidden_neurons
        << "\nbatch norm: " << (has_batchnorm(net) ? "yes" : "no") << "\nsparsity: " << sparsity(net) << "\n";
    return kOk;
}

// ---- export-smtlib ---------------------------------------------------------

struct ExportArgs {
    Common common;
    std::string model;
    bool robustness = false;
    std::optional<std::size_t> sample_index;
    std::optional<double> epsilon;
};

int cmd_export(const ExportArgs& a, std::ostream& out)
{
    RunConfig config = resolve(a.common);
    auto index = a.sample_index ? a.sample_index : config.verify.sample_index;
    if (!index)
        throw ConfigError("export-smtlib needs --sample-index (or verify.sample_index in the config)");
    const double eps = a.epsilon ? *a.epsilon : config.verify.epsilon;
    Dataset data = load_data(config.data);
    if (!a.model.empty())
        check_model_matches(load_model(a.model), data);
    Property p = robustness_query(data, *index, eps);
    write_file_atomic(a.common.out, emit_smtlib(p));
    out << "wrote " << p.disjuncts.size() << "-disjunct robustness property to " << a.common.out << "\n";
    return kOk;
}

// ---- experiment ------------------------------------------------------------

struct ExperimentArgs {
    Common common;
    std::optional<std::size_t> queries;
    std::optional<double> timeout;
    std::optional<double> epsilon;
    bool quiet = false;
};

int cmd_experiment(const ExperimentArgs& a, std::ostream& out)
{
    RunConfig config = resolve(a.common);
    if (a.queries)
        config.experiment.queries = *a.queries;
    if (a.timeout)
        config.experiment.timeout = *a.timeout;
    if (a.epsilon)
        config.experiment.epsilon = *a.epsilon;
    Dataset data = load_data(config.data);
    auto result = run_experiment(config, data, a.quiet ? nullptr : &out);

    const fs::path dir = a.common.out;
    fs::create_directories(dir);
    json doc = experiment_to_json(result);
    doc["config"] = run_config_to_json(config);
    for (const auto& v : result.variants) {
        std::string file = v.name;
        std::transform(file.begin(), file.end(), file.begin(), [](unsigned char c) { return std::tolower(c); });
        save_model(v.net, dir / (file + ".model.json"));
    }
    const std::string table = format_table(result);
    write_file_atomic(dir / "table.txt", table);
    write_json(dir / "results.json", doc);
    out << table;
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Train, prune, verify and repair fully-connected ReLU networks", "nnkit"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "expand all subcommand help");

    TrainArgs train_a;
    auto* train = app.add_subcommand("train", "train a network on the configured dataset");
    add_common(train, train_a.common, true);
    train->add_option("--metrics", train_a.metrics, "metrics document (default <out>.metrics.json)");
    train->add_option("--init", train_a.init, "start from this model instead of a fresh one");
    train->add_option("--epochs", train_a.epochs);
    train->add_option("--learning-rate", train_a.learning_rate);

    PruneArgs prune_a;
    auto* prune = app.add_subcommand("prune", "weight pruning (wp) or network slimming (ns)");
    add_common(prune, prune_a.common, true);
    prune->add_option("--model", prune_a.model, "input model")->required();
    prune->add_option("--report", prune_a.report, "report document (default <out>.prune.json)");
    prune->add_option("--method", prune_a.method, "wp or ns");
    auto* ratio = prune->add_option("--ratio", prune_a.ratio, "fraction of weights or neurons removed");
    prune->add_option("--threshold", prune_a.threshold, "absolute magnitude cutoff (wp)")->excludes(ratio);
    prune->add_option("--fine-tune", prune_a.fine_tune, "fine-tuning epochs after pruning");
    prune->add_option("--pre-train", prune_a.pre_train, "sparse training epochs before slimming");

    VerifyArgs verify_a;
    auto* verify = app.add_subcommand("verify", "verify a property; exit 0 verified, 1 falsified, 2 unknown");
    add_common(verify, verify_a.common, false);
    verify->add_option("--model", verify_a.model, "model document")->required();
    auto* prop = verify->add_option("--property", verify_a.property, "SMT-LIB property file");
    verify->add_flag("--robustness", verify_a.robustness, "robustness query around a test sample")->excludes(prop);
    verify->add_option("--sample-index", verify_a.sample_index, "test sample for --robustness");
    verify->add_option("--epsilon", verify_a.epsilon, "L-infinity radius for --robustness");
    verify->add_option("--engine", verify_a.engine, "ibp or bab");
    verify->add_option("--timeout", verify_a.timeout, "seconds");
    verify->add_option("--max-nodes", verify_a.max_nodes, "branch-and-bound node budget");

    RepairArgs repair_a;
    auto* rep = app.add_subcommand("repair", "counterexample-guided retraining");
    add_common(rep, repair_a.common, true);
    rep->add_option("--model", repair_a.model, "input model")->required();
    rep->add_option("--report", repair_a.report, "report document (default <out>.repair.json)");
    rep->add_option("--sample-index", repair_a.sample_indices, "test samples to make robust");
    rep->add_option("--epsilon", repair_a.epsilon);
    rep->add_option("--iterations", repair_a.iterations);
    rep->add_option("--epochs", repair_a.epochs, "retraining epochs per round");

    EvalArgs eval_a;
    auto* eval = app.add_subcommand("eval", "accuracy on a dataset split");
    add_common(eval, eval_a.common, false);
    eval->add_option("--model", eval_a.model, "model document")->required();
    eval->add_option("--split", eval_a.split, "train or test")->check(CLI::IsMember({"train", "test"}));

    InfoArgs info_a;
    auto* info = app.add_subcommand("info", "layer widths and parameter count");
    add_common(info, info_a.common, false);
    info->add_option("--model", info_a.model, "model document")->required();

    ExportArgs export_a;
    auto* exp = app.add_subcommand("export-smtlib", "write a robustness property as SMT-LIB");
    add_common(exp, export_a.common, true);
    exp->add_option("--model", export_a.model, "check the property against this model's shape");
    exp->add_flag("--robustness", export_a.robustness, "robustness query (the only kind exported)");
    exp->add_option("--sample-index", export_a.sample_index);
    exp->add_option("--epsilon", export_a.epsilon);

    ExperimentArgs exper_a;
    auto* exper = app.add_subcommand("experiment", "baseline/sparse/WP/NS verification comparison");
    add_common(exper, exper_a.common, true);
    exper->add_option("--queries", exper_a.queries);
    exper->add_option("--timeout", exper_a.timeout, "per-instance seconds");
    exper->add_option("--epsilon", exper_a.epsilon);
    exper->add_flag("--quiet", exper_a.quiet, "only print the table");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        auto subs = app.get_subcommands();
        err << (subs.empty() ? app.help() : subs.front()->help());
        return kError;
    }

    CLI::App* active = app.get_subcommands().front();
    try {
        if (active == train)
            return cmd_train(train_a, out);
        if (active == prune)
            return cmd_prune(prune_a, out);
        if (active == verify)
            return cmd_verify(verify_a, out);
        if (active == rep)
            return cmd_repair(repair_a, out);
        if (active == eval)
            return cmd_eval(eval_a, out);
        if (active == info)
            return cmd_info(info_a, out);
        if (active == exp)
            return cmd_export(export_a, out);
        return cmd_experiment(exper_a, out);
    } catch (const CLI::ValidationError& e) {
        err << "error: " << e.what() << "\n" << active->help();
        return kError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kError;
    }
}

}  // namespace nnkit::cli
