// End-to-end acceptance checks. Prints one PASS/FAIL/SKIP line per criterion
// and exits non-zero if any criterion fails. Pass criterion numbers as
// arguments to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "../oracles/exact.hpp"
#include "../support/gradcheck.hpp"
#include "../support/property_gen.hpp"
#include "../support/random_nets.hpp"
#include "../support/repair_scenario.hpp"
#include "../support/verify_cases.hpp"
#include "nnkit/atomic_file.hpp"
#include "nnkit/cli/commands.hpp"
#include "nnkit/dataset.hpp"
#include "nnkit/model_io.hpp"
#include "nnkit/pruning.hpp"
#include "nnkit/repair.hpp"
#include "nnkit/smtlib.hpp"
#include "nnkit/training.hpp"
#include "nnkit/verifier.hpp"

using namespace nnkit;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum class Outcome { Pass, Fail, Skip };

struct Verdict_ {
    Outcome outcome;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t)
{
    return std::chrono::duration<double>(Clock::now() - t).count();
}

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Verdict_ pass_if(bool ok, std::string detail)
{
    return {ok ? Outcome::Pass : Outcome::Fail, std::move(detail)};
}

struct Scratch {
    fs::path dir;
    Scratch()
    {
        dir = fs::temp_directory_path() / "nnkit_acceptance";
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Scratch() { fs::remove_all(dir); }
    std::string path(const std::string& name) const { return (dir / name).string(); }
};

int cli_run(std::vector<std::string> args)
{
    std::ostringstream out, err;
    int code = cli::run(args, out, err);
    if (code == cli::kError)
        std::cerr << "  cli error: " << err.str();
    return code;
}

// ---------------------------------------------------------------------------

Verdict_ gradient_correctness()
{
    const auto start = Clock::now();
    std::mt19937_64 rng(101);
    TrainingConfig cfg;
    cfg.l2_lambda = 0.01;
    cfg.slim_lambda = 0.001;
    double worst = 0.0;
    const int nets = 20;
    for (int t = 0; t < nets; ++t) {
        auto c = testsupport::random_grad_case(rng);
        worst = std::max(worst, testsupport::max_gradient_error(c.net, c.x, c.labels, cfg, 1e-5));
    }
    const double secs = since(start);
    return pass_if(worst < 1e-4 && secs < 60.0,
                   fmt("max relative error %.2e over %d 4-8-8-3 nets, %.1f s", worst, nets, secs));
}

Verdict_ fold_equivalence()
{
    const auto start = Clock::now();
    std::mt19937_64 rng(102);
    std::uniform_int_distribution<std::size_t> dim(1, 8), width(1, 16), depth(1, 3);
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
        std::vector<std::size_t> hidden(depth(rng));
        for (auto& h : hidden)
            h = width(rng);
        const std::size_t d = dim(rng);
        auto net = testsupport::random_net(rng, d, hidden, dim(rng) + 1, true);
        auto folded = fold_batchnorm(net);
        for (int i = 0; i < 10; ++i) {
            auto x = testsupport::uniform_vector(rng, d, 0.0, 1.0);
            auto a = forward(net, x), b = forward(folded, x);
            for (std::size_t k = 0; k < a.size(); ++k)
                worst = std::max(worst, std::abs(a[k] - b[k]));
        }
    }
    const double secs = since(start);
    return pass_if(worst <= 1e-9 && secs < 60.0,
                   fmt("max discrepancy %.2e over 1000 nets x 10 inputs, %.1f s", worst, secs));
}

Verdict_ training_synthetic()
{
    const auto start = Clock::now();
    auto data = synth_blobs(BlobSpec{1, 100, 2, 2, 0.05});
    TrainingConfig cfg;
    cfg.learning_rate = 0.01;
    cfg.epochs = 200;
    cfg.seed = 1;
    auto res = train(make_mlp({2, {16}, 2, true}, 1), data, cfg);
    const double acc = evaluate(res.net, data.test()).accuracy;
    const double secs = since(start);
    return pass_if(acc >= 0.95 && secs < 60.0, fmt("test accuracy %.4f after 200 epochs, %.1f s", acc, secs));
}

std::optional<fs::path> mnist_dir()
{
    std::vector<fs::path> candidates;
    if (const char* env = std::getenv("NNKIT_MNIST_DIR"))
        candidates.emplace_back(env);
    candidates.emplace_back(fs::path(NNKIT_SOURCE_DIR) / "data" / "mnist");
    for (const auto& dir : candidates)
        if (fs::exists(dir / "train-images-idx3-ubyte") && fs::exists(dir / "train-labels-idx1-ubyte") &&
            fs::exists(dir / "t10k-images-idx3-ubyte") && fs::exists(dir / "t10k-labels-idx1-ubyte"))
            return dir;
    return std::nullopt;
}

Verdict_ training_mnist()
{
    auto dir = mnist_dir();
    if (!dir)
        return {Outcome::Skip, "MNIST IDX files not found (set NNKIT_MNIST_DIR or add data/mnist)"};
    const auto start = Clock::now();
    auto train_set = read_idx_samples(*dir / "train-images-idx3-ubyte", *dir / "train-labels-idx1-ubyte");
    auto test_set = read_idx_samples(*dir / "t10k-images-idx3-ubyte", *dir / "t10k-labels-idx1-ubyte");
    train_set.resize(std::min<std::size_t>(train_set.size(), 2000));
    test_set.resize(std::min<std::size_t>(test_set.size(), 1000));
    Dataset data(784, 10);
    data.load_train(std::move(train_set));
    data.load_test(std::move(test_set));
    TrainingConfig cfg;
    cfg.epochs = 20;
    cfg.seed = 1;
    auto res = train(make_mlp({784, {64, 32, 16}, 10, true}, 1), data, cfg);
    const double acc = evaluate(res.net, data.test()).accuracy;
    const double secs = since(start);
    return pass_if(acc >= 0.80 && secs < 600.0,
                   fmt("784-64-32-16-10 test accuracy %.4f after 20 epochs, %.1f s", acc, secs));
}

Verdict_ pruning_exactness()
{
    std::mt19937_64 rng(105);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        auto net = testsupport::random_net(rng, 3, {6, 5, 4}, 3, true);
        std::vector<std::vector<bool>> keep;
        for (auto& node : net.nodes)
            if (auto* bn = std::get_if<BatchNorm1DNode>(&node)) {
                std::vector<bool> k(bn->dim(), true);
                for (std::size_t j = 1; j < bn->dim(); ++j)
                    if (rng() % 2 == 0) {
                        bn->gamma[j] = 0.0;
                        bn->beta[j] = 0.0;
                        k[j] = false;
                    }
                keep.push_back(k);
            }
        auto pruned = remove_neurons(net, keep);
        for (int i = 0; i < 20; ++i) {
            auto x = testsupport::uniform_vector(rng, 3, 0.0, 1.0);
            auto a = forward(net, x), b = forward(pruned, x);
            for (std::size_t k = 0; k < a.size(); ++k)
                worst = std::max(worst, std::abs(a[k] - b[k]));
        }
    }
    std::size_t idempotence_failures = 0, floor_failures = 0;
    for (int t = 0; t < 1000; ++t) {
        auto net = testsupport::random_net(rng, 4, {5, 5}, 3, t % 2 == 0);
        const double th = std::uniform_real_distribution<double>(0.0, 0.8)(rng);
        auto once = weight_prune(net, th);
        idempotence_failures += !(weight_prune(once, th) == once);
        for (const auto& node : once.nodes)
            if (const auto* fc = std::get_if<FullyConnectedNode>(&node))
                for (double w : fc->weights.values())
                    floor_failures += w != 0.0 && std::abs(w) < th;
    }
    return pass_if(worst <= 1e-12 && idempotence_failures == 0 && floor_failures == 0,
                   fmt("max gap %.2e over 100 slimmed nets; %zu idempotence and %zu floor violations over 1000 nets",
                       worst, idempotence_failures, floor_failures));
}

Verdict_ verifier_soundness()
{
    const auto start = Clock::now();
    std::mt19937_64 rng(106);
    std::size_t verified = 0, falsified = 0, unknown = 0, bad_witness = 0, attacked = 0;
    const int instances = 500;
    for (int t = 0; t < instances; ++t) {
        SequentialNetwork net;
        Property p;
        if (t % 2 == 0) {
            auto c = testsupport::random_verify_case(rng);
            net = c.net;
            p = c.property;
        } else {
            // Unfolded batch-norm nets with up to 12 hidden neurons.
            const std::size_t d = 1 + rng() % 4;
            net = testsupport::random_net(rng, d, {1 + rng() % 6, 1 + rng() % 6}, 2 + rng() % 2, true);
            auto x0 = testsupport::uniform_vector(rng, d, 0.0, 1.0);
            const double eps = std::uniform_real_distribution<double>(0.01, 0.2)(rng);
            p = robustness_property(x0, classify(net, x0), net.output_dim(), eps, unit_box(d));
        }
        BabConfig cfg;
        cfg.seed = static_cast<std::uint64_t>(t);
        cfg.time_budget = 20.0;
        auto r = verify_bab(net, p, cfg);
        if (r.status == Verdict::Falsified) {
            ++falsified;
            const auto& cx = *r.counterexample;
            auto y = forward(net, cx.input);
            bool ok = p.input_box.contains(cx.input) && cx.disjunct < p.disjuncts.size();
            if (ok)
                for (const auto& atom : p.disjuncts[cx.disjunct])
                    ok = ok && atom.holds(y, kWitnessTolerance);
            bad_witness += !ok;
        } else if (r.status == Verdict::Verified) {
            ++verified;
            attacked += falsify_sample(net, p, 100000, 7'000'000 + t).has_value();
        } else {
            ++unknown;
        }
    }
    const double secs = since(start);
    return pass_if(bad_witness == 0 && attacked == 0 && secs < 600.0,
                   fmt("%d instances: %zu verified (0 of them broken: %s), %zu falsified (%zu invalid witnesses), "
                       "%zu unknown, %.1f s",
                       instances, verified, attacked == 0 ? "yes" : "no", falsified, bad_witness, unknown, secs));
}

Verdict_ verifier_completeness()
{
    const auto start = Clock::now();
    std::mt19937_64 rng(107);
    std::size_t mismatches = 0, unknowns = 0, violated = 0;
    for (int t = 0; t < 100; ++t) {
        auto c = testsupport::random_verify_case(rng, 8);
        BabConfig cfg;
        cfg.seed = static_cast<std::uint64_t>(t);
        auto r = verify_bab(c.net, c.property, cfg);
        oracle::ExhaustiveOracle oracle(c.net, c.property);
        const bool truth = oracle.violated();
        violated += truth;
        if (r.status == Verdict::Unknown)
            ++unknowns;
        else if ((r.status == Verdict::Falsified) != truth)
            ++mismatches;
    }
    const double secs = since(start);
    return pass_if(mismatches == 0 && unknowns == 0 && secs < 600.0,
                   fmt("100 nets (%zu violated): %zu mismatches, %zu unknowns vs exact pattern enumeration, %.1f s",
                       violated, mismatches, unknowns, secs));
}

Verdict_ parser_round_trip()
{
    std::mt19937_64 rng(108);
    std::size_t failures = 0;
    for (int t = 0; t < 100; ++t) {
        auto p = testsupport::random_property(rng);
        try {
            failures += !equivalent(parse_smtlib(emit_smtlib(p)), p);
        } catch (const std::exception&) {
            ++failures;
        }
    }
    auto rejects = [](const std::string& text, const std::string& fragment) {
        try {
            parse_smtlib(text);
            return false;
        } catch (const SmtLibError& e) {
            return std::string(e.what()).find(fragment) != std::string::npos;
        }
    };
    const std::string head = "(declare-const X_0 Real)(declare-const X_1 Real)(declare-const Y_0 Real)"
                             "(assert (>= X_0 0))(assert (<= X_0 1))(assert (>= X_1 0))(assert (<= X_1 1))";
    std::string dnf = head + "(assert (and";
    for (int i = 0; i < 7; ++i)
        dnf += " (or (>= Y_0 " + std::to_string(i) + ") (<= Y_0 -" + std::to_string(i) + "))";
    dnf += "))";
    const bool non_box = rejects(head + "(assert (<= (+ X_0 X_1) 1.0))(assert (>= Y_0 0))", "non-box input constraint");
    const bool unknown = rejects(head + "(assert (>= Q_7 0))", "unknown symbol");
    const bool cap = rejects(dnf, "exceeds 64");
    return pass_if(failures == 0 && non_box && unknown && cap,
                   fmt("%zu of 100 round trips failed; rejections non-box=%s unknown-symbol=%s dnf-cap=%s", failures,
                       non_box ? "ok" : "MISSED", unknown ? "ok" : "MISSED", cap ? "ok" : "MISSED"));
}

Verdict_ table_trend()
{
    const auto start = Clock::now();
    Scratch scratch;
    const json config = {
        {"seed", 1},
        {"data", {{"synthetic", {{"seed", 1}, {"n_per_class", 150}, {"num_classes", 3}, {"dim", 8}, {"spread", 0.1}}}}},
        {"model", {{"hidden", {16, 16, 16}}, {"batch_norm", true}}},
        {"train", {{"epochs", 30}, {"learning_rate", 0.01}}},
        {"experiment",
         {{"queries", 20},
          {"epsilon", 0.02},
          {"timeout", 60},
          {"wp_ratio", 0.5},
          {"ns_ratio", 0.5},
          {"sparse_lambda", 0.005},
          {"fine_tune_epochs", 10}}}};
    write_file_atomic(scratch.dir / "experiment.json", config.dump(2));
    const int code = cli_run({"experiment", "--config", scratch.path("experiment.json"), "--out",
                              scratch.path("out"), "--quiet"});
    if (code != 0)
        return {Outcome::Fail, fmt("experiment command exited %d", code)};
    auto doc = json::parse(read_file(scratch.dir / "out" / "results.json"));
    std::map<std::string, json> rows;
    for (const auto& row : doc["table"])
        rows[row["variant"].get<std::string>()] = row;
    const bool four = rows.size() == 4 && rows.count("Baseline") && rows.count("Sparse") && rows.count("WP") &&
                      rows.count("NS");
    if (!four)
        return {Outcome::Fail, "results table lacks one of the Baseline/Sparse/WP/NS rows"};
    double worst_ratio = 0.0;
    for (const auto& rec : doc["instances"])
        worst_ratio = std::max(worst_ratio, rec["seconds"].get<double>() / 60.0);
    const auto& base = rows["Baseline"];
    const auto& ns = rows["NS"];
    const std::size_t bs = base["solved"], nss = ns["solved"];
    const double bu = base["mean_root_unstable"], nu = ns["mean_root_unstable"];
    const double secs = since(start);
    std::cout << read_file(scratch.dir / "out" / "table.txt");
    return pass_if(nss >= bs && nu <= bu && worst_ratio <= 2.0 && secs < 1800.0,
                   fmt("solved baseline %zu/20 vs NS %zu/20; mean root unstable %.2f vs %.2f; "
                       "slowest instance %.2fx timeout; %.1f s",
                       bs, nss, bu, nu, worst_ratio, secs));
}

Verdict_ repair_honesty()
{
    const auto start = Clock::now();
    std::size_t honest = 0, bookkept = 0, labelled = 0, reached = 0, exercised = 0;
    const std::size_t seeds = 10;
    for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
        auto s = testsupport::repair_scenario(seed);
        auto r = repair(s.net, s.properties, s.data, s.config);
        auto audit = testsupport::audit_repair(s, r);
        honest += audit.honest;
        bookkept += audit.bookkeeping;
        labelled += audit.labels;
        reached += r.report.all_verified;
        exercised += r.report.total_added > 0;
    }
    const bool gate = honest == seeds && bookkept == seeds && labelled == seeds;
    std::string detail = fmt("honest %zu/%zu, bookkeeping %zu/%zu, labels %zu/%zu; %zu seeds added counterexamples; "
                             "all-verified in %zu/%zu seeds (majority target %s, report-only); %.1f s",
                             honest, seeds, bookkept, seeds, labelled, seeds, exercised, reached, seeds,
                             reached * 2 > seeds ? "met" : "missed", since(start));
    return pass_if(gate, detail);
}

Verdict_ determinism()
{
    Scratch scratch;
    const json config = {{"seed", 11},
                         {"model", {{"hidden", {8}}}},
                         {"train", {{"epochs", 8}, {"learning_rate", 0.01}}},
                         {"verify", {{"timeout", 30}}},
                         {"repair", {{"max_iterations", 3}, {"epochs", 4}, {"sample_indices", {0, 1, 2, 3}}}}};
    write_file_atomic(scratch.dir / "c.json", config.dump());
    const std::string cfg = scratch.path("c.json");
    std::vector<std::string> differing;
    for (int run = 0; run < 2; ++run) {
        const std::string tag = std::to_string(run);
        cli_run({"train", "--config", cfg, "--out", scratch.path("model" + tag + ".json")});
        cli_run({"prune", "--config", cfg, "--model", scratch.path("model" + tag + ".json"), "--method", "ns",
                 "--ratio", "0.5", "--fine-tune", "3", "--out", scratch.path("pruned" + tag + ".json")});
        for (int i = 0; i < 6; ++i)
            cli_run({"verify", "--config", cfg, "--model", scratch.path("model" + tag + ".json"), "--robustness",
                     "--sample-index", std::to_string(i), "--epsilon", "0.05", "--out",
                     scratch.path("verify" + tag + "_" + std::to_string(i) + ".json")});
        cli_run({"repair", "--config", cfg, "--model", scratch.path("model" + tag + ".json"), "--out",
                 scratch.path("repaired" + tag + ".json")});
    }
    auto same_file = [&](const std::string& a, const std::string& b) {
        return fs::exists(scratch.dir / a) && read_file(scratch.dir / a) == read_file(scratch.dir / b);
    };
    if (!same_file("model0.json", "model1.json") || !same_file("model0.metrics.json", "model1.metrics.json"))
        differing.push_back("train");
    if (!same_file("pruned0.json", "pruned1.json"))
        differing.push_back("prune");
    for (int i = 0; i < 6; ++i) {
        auto a = json::parse(read_file(scratch.dir / ("verify0_" + std::to_string(i) + ".json")));
        auto b = json::parse(read_file(scratch.dir / ("verify1_" + std::to_string(i) + ".json")));
        a.erase("stats");
        b.erase("stats");
        if (a != b) {
            differing.push_back("verify");
            break;
        }
    }
    if (!same_file("repaired0.json", "repaired1.json") || !same_file("repaired0.repair.json", "repaired1.repair.json"))
        differing.push_back("repair");
    std::string detail = "train, prune, verify and repair outputs identical across two runs";
    if (!differing.empty()) {
        detail = "differing outputs:";
        for (const auto& d : differing)
            detail += " " + d;
    }
    return pass_if(differing.empty(), detail);
}

}  // namespace

int main(int argc, char** argv)
{
    struct Criterion {
        int id;
        const char* name;
        std::function<Verdict_()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "gradient correctness", gradient_correctness},
        {2, "batch-norm fold equivalence", fold_equivalence},
        {3, "training sanity (synthetic)", training_synthetic},
        {4, "training sanity (MNIST)", training_mnist},
        {5, "pruning exactness", pruning_exactness},
        {6, "verifier soundness", verifier_soundness},
        {7, "verifier completeness", verifier_completeness},
        {8, "parser round trip", parser_round_trip},
        {9, "pruning eases verification", table_trend},
        {10, "repair honesty", repair_honesty},
        {11, "determinism", determinism},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i)
        selected.insert(std::atoi(argv[i]));

    int failures = 0;
    for (const auto& c : criteria) {
        if (!selected.empty() && !selected.count(c.id))
            continue;
        Verdict_ v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v = {Outcome::Fail, std::string("threw: ") + e.what()};
        }
        const char* tag = v.outcome == Outcome::Pass ? "PASS" : v.outcome == Outcome::Fail ? "FAIL" : "SKIP";
        std::cout << tag << "  " << c.id << ". " << c.name << ": " << v.detail << std::endl;
        failures += v.outcome == Outcome::Fail;
    }
    return failures == 0 ? 0 : 1;
}
