#include "nnkit/cli/config.hpp"

#include <cmath>
#include <set>

#include "nnkit/atomic_file.hpp"

namespace nnkit::cli {

using nlohmann::json;

namespace {

// Reads one object section, remembering which keys were consumed so the
// leftovers can be reported as unknown.
class Section {
public:
    Section(const json& doc, std::string path) : doc_(doc), path_(std::move(path))
    {
        if (!doc_.is_object())
            throw ConfigError(where() + ": expected an object");
    }

    bool has(const std::string& key)
    {
        seen_.insert(key);
        return doc_.contains(key);
    }

    const json& raw(const std::string& key)
    {
        seen_.insert(key);
        return doc_.at(key);
    }

    std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    double real(const std::string& key, double fallback)
    {
        if (!has(key))
            return fallback;
        const json& v = doc_.at(key);
        if (!v.is_number() || !std::isfinite(v.get<double>()))
            throw ConfigError(key_path(key) + ": expected a finite number");
        return v.get<double>();
    }

    std::uint64_t count(const std::string& key, std::uint64_t fallback)
    {
        if (!has(key))
            return fallback;
        const json& v = doc_.at(key);
        if (!v.is_number_unsigned())
            throw ConfigError(key_path(key) + ": expected a non-negative integer");
        return v.get<std::uint64_t>();
    }

    bool flag(const std::string& key, bool fallback)
    {
        if (!has(key))
            return fallback;
        const json& v = doc_.at(key);
        if (!v.is_boolean())
            throw ConfigError(key_path(key) + ": expected true or false");
        return v.get<bool>();
    }

    std::string text(const std::string& key, std::string fallback)
    {
        if (!has(key))
            return fallback;
        const json& v = doc_.at(key);
        if (!v.is_string())
            throw ConfigError(key_path(key) + ": expected a string");
        return v.get<std::string>();
    }

    std::vector<std::size_t> counts(const std::string& key, std::vector<std::size_t> fallback)
    {
        if (!has(key))
            return fallback;
        const json& v = doc_.at(key);
        if (!v.is_array())
            throw ConfigError(key_path(key) + ": expected an array of non-negative integers");
        std::vector<std::size_t> out;
        for (const auto& e : v) {
            if (!e.is_number_unsigned())
                throw ConfigError(key_path(key) + ": expected an array of non-negative integers");
            out.push_back(e.get<std::size_t>());
        }
        return out;
    }

    void finish() const
    {
        for (const auto& [k, v] : doc_.items())
            if (!seen_.count(k))
                throw ConfigError("unknown key '" + key_path(k) + "'");
    }

private:
    std::string where() const { return path_.empty() ? "config" : path_; }

    const json& doc_;
    std::string path_;
    std::set<std::string> seen_;
};

void require(bool ok, const std::string& message)
{
    if (!ok)
        throw ConfigError(message);
}

BlobSpec parse_blobs(Section s)
{
    BlobSpec b;
    b.seed = s.count("seed", b.seed);
    b.n_per_class = s.count("n_per_class", b.n_per_class);
    b.num_classes = s.count("num_classes", b.num_classes);
    b.dim = s.count("dim", b.dim);
    b.spread = s.real("spread", b.spread);
    s.finish();
    require(b.n_per_class > 0, "data.synthetic.n_per_class must be positive");
    require(b.num_classes >= 2, "data.synthetic.num_classes must be at least 2");
    require(b.dim >= 1, "data.synthetic.dim must be positive");
    require(b.spread >= 0.0, "data.synthetic.spread must be non-negative");
    return b;
}

IdxSpec parse_idx(Section s)
{
    IdxSpec x;
    auto path = [&](const std::string& key) {
        require(s.has(key), s.key_path(key) + " is required");
        return std::filesystem::path(s.text(key, ""));
    };
    x.train_images = path("train_images");
    x.train_labels = path("train_labels");
    x.test_images = path("test_images");
    x.test_labels = path("test_labels");
    x.num_classes = s.count("num_classes", x.num_classes);
    if (s.has("train_limit"))
        x.train_limit = s.count("train_limit", 0);
    if (s.has("test_limit"))
        x.test_limit = s.count("test_limit", 0);
    s.finish();
    require(x.num_classes >= 2, "data.idx.num_classes must be at least 2");
    return x;
}

DataConfig parse_data(Section s)
{
    DataConfig d;
    if (s.has("synthetic"))
        d.synthetic = parse_blobs(Section(s.raw("synthetic"), "data.synthetic"));
    if (s.has("idx"))
        d.idx = parse_idx(Section(s.raw("idx"), "data.idx"));
    s.finish();
    require(d.synthetic.has_value() != d.idx.has_value(),
            "data needs exactly one of 'synthetic' or 'idx'");
    d.from_document = true;
    return d;
}

TrainingConfig parse_train(Section s, TrainingConfig t)
{
    t.learning_rate = s.real("learning_rate", t.learning_rate);
    t.beta1 = s.real("beta1", t.beta1);
    t.beta2 = s.real("beta2", t.beta2);
    t.adam_eps = s.real("adam_eps", t.adam_eps);
    t.l2_lambda = s.real("l2_lambda", t.l2_lambda);
    t.slim_lambda = s.real("slim_lambda", t.slim_lambda);
    t.batch_size = s.count("batch_size", t.batch_size);
    t.epochs = s.count("epochs", t.epochs);
    t.bn_momentum = s.real("bn_momentum", t.bn_momentum);
    s.finish();
    try {
        t.check();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("train: ") + e.what());
    }
    return t;
}

PruningMethod parse_method(const std::string& text, const std::string& where)
{
    if (text == "wp")
        return PruningMethod::WeightPruning;
    if (text == "ns")
        return PruningMethod::NetworkSlimming;
    throw ConfigError(where + ": method must be 'wp' or 'ns', got '" + text + "'");
}

Engine parse_engine(const std::string& text, const std::string& where)
{
    if (text == "bab")
        return Engine::Bab;
    if (text == "ibp")
        return Engine::Ibp;
    throw ConfigError(where + ": engine must be 'ibp' or 'bab', got '" + text + "'");
}

void check_ratio(double r, const std::string& where)
{
    require(r >= 0.0 && r < 1.0, where + " must lie in [0, 1)");
}

}  // namespace

void RunConfig::apply_seed(std::uint64_t s)
{
    seed = s;
    train.seed = s;
    verify.bab.seed = s;
}

RunConfig parse_run_config(const json& doc)
{
    RunConfig c;
    Section top(doc, "");
    c.seed = top.count("seed", c.seed);
    if (top.has("data"))
        c.data = parse_data(Section(top.raw("data"), "data"));
    else
        c.data.synthetic = BlobSpec{};

    if (top.has("model")) {
        Section s(top.raw("model"), "model");
        c.model.name = s.text("name", c.model.name);
        c.model.hidden = s.counts("hidden", c.model.hidden);
        c.model.batch_norm = s.flag("batch_norm", c.model.batch_norm);
        c.model.bn_eps = s.real("bn_eps", c.model.bn_eps);
        s.finish();
        for (std::size_t w : c.model.hidden)
            require(w > 0, "model.hidden widths must be positive");
        require(c.model.bn_eps > 0.0, "model.bn_eps must be positive");
    }

    if (top.has("train"))
        c.train = parse_train(Section(top.raw("train"), "train"), c.train);

    if (top.has("prune")) {
        Section s(top.raw("prune"), "prune");
        c.prune.method = parse_method(s.text("method", "wp"), "prune.method");
        if (s.has("threshold"))
            c.prune.threshold = s.real("threshold", 0.0);
        if (s.has("ratio"))
            c.prune.ratio = s.real("ratio", 0.0);
        c.prune.pre_train_epochs = s.count("pre_train_epochs", c.prune.pre_train_epochs);
        c.prune.fine_tune_epochs = s.count("fine_tune_epochs", c.prune.fine_tune_epochs);
        c.prune.slim_lambda = s.real("slim_lambda", c.prune.slim_lambda);
        s.finish();
        if (c.prune.ratio)
            check_ratio(*c.prune.ratio, "prune.ratio");
        if (c.prune.threshold)
            require(*c.prune.threshold >= 0.0, "prune.threshold must be non-negative");
        require(c.prune.slim_lambda >= 0.0, "prune.slim_lambda must be non-negative");
    }

    if (top.has("verify")) {
        Section s(top.raw("verify"), "verify");
        c.verify.engine = parse_engine(s.text("engine", "bab"), "verify.engine");
        c.verify.bab.max_nodes = s.count("max_nodes", c.verify.bab.max_nodes);
        c.verify.bab.min_box_width = s.real("min_box_width", c.verify.bab.min_box_width);
        c.verify.bab.enum_threshold = s.count("enum_threshold", c.verify.bab.enum_threshold);
        c.verify.bab.time_budget = s.real("timeout", c.verify.bab.time_budget);
        c.verify.bab.sample_count = s.count("sample_count", c.verify.bab.sample_count);
        if (s.has("property"))
            c.verify.property = s.text("property", "");
        if (s.has("sample_index"))
            c.verify.sample_index = s.count("sample_index", 0);
        c.verify.epsilon = s.real("epsilon", c.verify.epsilon);
        s.finish();
        require(c.verify.epsilon >= 0.0, "verify.epsilon must be non-negative");
        try {
            c.verify.bab.check();
        } catch (const std::exception& e) {
            throw ConfigError(std::string("verify: ") + e.what());
        }
    }

    if (top.has("repair")) {
        Section s(top.raw("repair"), "repair");
        c.repair.max_iterations = s.count("max_iterations", c.repair.max_iterations);
        c.repair.epochs = s.count("epochs", c.repair.epochs);
        c.repair.counterexamples_per_property =
            s.count("counterexamples_per_property", c.repair.counterexamples_per_property);
        c.repair.from_scratch = s.flag("from_scratch", c.repair.from_scratch);
        c.repair.sample_indices = s.counts("sample_indices", c.repair.sample_indices);
        c.repair.epsilon = s.real("epsilon", c.repair.epsilon);
        s.finish();
        require(c.repair.max_iterations > 0, "repair.max_iterations must be positive");
        require(c.repair.counterexamples_per_property > 0,
                "repair.counterexamples_per_property must be positive");
        require(c.repair.epsilon >= 0.0, "repair.epsilon must be non-negative");
    }

    if (top.has("experiment")) {
        Section s(top.raw("experiment"), "experiment");
        auto& e = c.experiment;
        e.queries = s.count("queries", e.queries);
        e.epsilon = s.real("epsilon", e.epsilon);
        e.timeout = s.real("timeout", e.timeout);
        e.wp_ratio = s.real("wp_ratio", e.wp_ratio);
        e.ns_ratio = s.real("ns_ratio", e.ns_ratio);
        e.sparse_lambda = s.real("sparse_lambda", e.sparse_lambda);
        e.fine_tune_epochs = s.count("fine_tune_epochs", e.fine_tune_epochs);
        s.finish();
        require(e.epsilon >= 0.0, "experiment.epsilon must be non-negative");
        require(e.timeout > 0.0, "experiment.timeout must be positive");
        check_ratio(e.wp_ratio, "experiment.wp_ratio");
        check_ratio(e.ns_ratio, "experiment.ns_ratio");
        require(e.sparse_lambda > 0.0, "experiment.sparse_lambda must be positive");
    }
    top.finish();
    c.apply_seed(c.seed);
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path)
{
    std::string text;
    try {
        text = read_file(path);
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return parse_run_config(doc);
}

json run_config_to_json(const RunConfig& c)
{
    json data;
    if (c.data.synthetic) {
        const auto& b = *c.data.synthetic;
        data["synthetic"] = {{"seed", b.seed},
                             {"n_per_class", b.n_per_class},
                             {"num_classes", b.num_classes},
                             {"dim", b.dim},
                             {"spread", b.spread}};
    } else {
        const auto& x = *c.data.idx;
        json idx = {{"train_images", x.train_images.string()},
                    {"train_labels", x.train_labels.string()},
                    {"test_images", x.test_images.string()},
                    {"test_labels", x.test_labels.string()},
                    {"num_classes", x.num_classes}};
        if (x.train_limit)
            idx["train_limit"] = *x.train_limit;
        if (x.test_limit)
            idx["test_limit"] = *x.test_limit;
        data["idx"] = idx;
    }
    json prune = {{"method", c.prune.method == PruningMethod::WeightPruning ? "wp" : "ns"},
                  {"pre_train_epochs", c.prune.pre_train_epochs},
                  {"fine_tune_epochs", c.prune.fine_tune_epochs},
                  {"slim_lambda", c.prune.slim_lambda}};
    if (c.prune.threshold)
        prune["threshold"] = *c.prune.threshold;
    if (c.prune.ratio)
        prune["ratio"] = *c.prune.ratio;
    json verify = {{"engine", to_string(c.verify.engine)},
                   {"max_nodes", c.verify.bab.max_nodes},
                   {"min_box_width", c.verify.bab.min_box_width},
                   {"enum_threshold", c.verify.bab.enum_threshold},
                   {"timeout", c.verify.bab.time_budget},
                   {"sample_count", c.verify.bab.sample_count},
                   {"epsilon", c.verify.epsilon}};
    if (c.verify.property)
        verify["property"] = c.verify.property->string();
    if (c.verify.sample_index)
        verify["sample_index"] = *c.verify.sample_index;
    return {
        {"seed", c.seed},
        {"data", data},
        {"model",
         {{"name", c.model.name},
          {"hidden", c.model.hidden},
          {"batch_norm", c.model.batch_norm},
          {"bn_eps", c.model.bn_eps}}},
        {"train",
         {{"learning_rate", c.train.learning_rate},
          {"beta1", c.train.beta1},
          {"beta2", c.train.beta2},
          {"adam_eps", c.train.adam_eps},
          {"l2_lambda", c.train.l2_lambda},
          {"slim_lambda", c.train.slim_lambda},
          {"batch_size", c.train.batch_size},
          {"epochs", c.train.epochs},
          {"bn_momentum", c.train.bn_momentum}}},
        {"prune", prune},
        {"verify", verify},
        {"repair",
         {{"max_iterations", c.repair.max_iterations},
          {"epochs", c.repair.epochs},
          {"counterexamples_per_property", c.repair.counterexamples_per_property},
          {"from_scratch", c.repair.from_scratch},
          {"sample_indices", c.repair.sample_indices},
          {"epsilon", c.repair.epsilon}}},
        {"experiment",
         {{"queries", c.experiment.queries},
          {"epsilon", c.experiment.epsilon},
          {"timeout", c.experiment.timeout},
          {"wp_ratio", c.experiment.wp_ratio},
          {"ns_ratio", c.experiment.ns_ratio},
          {"sparse_lambda", c.experiment.sparse_lambda},
          {"fine_tune_epochs", c.experiment.fine_tune_epochs}}},
    };
}

Dataset load_data(const DataConfig& data)
{
    if (data.synthetic)
        return synth_blobs(*data.synthetic);
    const IdxSpec& x = *data.idx;
    auto train = read_idx_samples(x.train_images, x.train_labels, x.num_classes);
    auto test = read_idx_samples(x.test_images, x.test_labels, x.num_classes);
    if (train.empty())
        throw DatasetError("IDX training split is empty");
    if (x.train_limit && train.size() > *x.train_limit)
        train.resize(*x.train_limit);
    if (x.test_limit && test.size() > *x.test_limit)
        test.resize(*x.test_limit);
    Dataset ds(train.front().input.size(), x.num_classes);
    ds.load_train(std::move(train));
    ds.load_test(std::move(test));
    return ds;
}

const char* to_string(PruningMethod m)
{
    return m == PruningMethod::WeightPruning ? "wp" : "ns";
}

const char* to_string(Engine e)
{
    return e == Engine::Bab ? "bab" : "ibp";
}

}  // namespace nnkit::cli
