#include "nnkit/model_io.hpp"

#include <json.hpp>

#include "nnkit/atomic_file.hpp"

namespace nnkit {

using nlohmann::json;

namespace {

json vector_json(const Tensor& t)
{
    return json(t.data());
}

json matrix_json(const Tensor& t)
{
    json rows = json::array();
    for (std::size_t r = 0; r < t.rows(); ++r) {
        auto row = t.row(r);
        rows.push_back(json(std::vector<double>(row.begin(), row.end())));
    }
    return rows;
}

[[noreturn]] void fail(const std::string& where, const std::string& what)
{
    throw ModelIoError(where + ": " + what);
}

const json& field(const json& obj, const char* key, const std::string& where)
{
    auto it = obj.find(key);
    if (it == obj.end())
        fail(where, std::string("missing field '") + key + "'");
    return *it;
}

double real_at(const json& v, const std::string& where)
{
    if (!v.is_number())
        fail(where, "expected a numeric literal, found " + std::string(v.type_name()));
    return v.get<double>();
}

std::size_t dim_field(const json& obj, const char* key, const std::string& where)
{
    const json& v = field(obj, key, where);
    if (!v.is_number_integer() || v.get<long long>() <= 0)
        fail(where + "." + key, "expected a positive integer");
    return v.get<std::size_t>();
}

Tensor read_vector(const json& obj, const char* key, std::size_t expected, const std::string& where)
{
    const std::string path = where + "." + key;
    const json& arr = field(obj, key, where);
    if (!arr.is_array())
        fail(path, "expected an array");
    if (arr.size() != expected)
        fail(path, "shape inconsistency: expected " + std::to_string(expected) + " entries, found " +
                       std::to_string(arr.size()));
    std::vector<double> data;
    data.reserve(expected);
    for (std::size_t i = 0; i < arr.size(); ++i)
        data.push_back(real_at(arr[i], path + "[" + std::to_string(i) + "]"));
    return Tensor({expected}, std::move(data));
}

Tensor read_matrix(const json& obj, const char* key, std::size_t rows, std::size_t cols,
                   const std::string& where)
{
    const std::string path = where + "." + key;
    const json& arr = field(obj, key, where);
    if (!arr.is_array() || arr.size() != rows)
        fail(path, "shape inconsistency: expected " + std::to_string(rows) + " rows");
    std::vector<double> data;
    data.reserve(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
        const std::string rp = path + "[" + std::to_string(r) + "]";
        if (!arr[r].is_array() || arr[r].size() != cols)
            fail(rp, "shape inconsistency: expected " + std::to_string(cols) + " columns");
        for (std::size_t c = 0; c < cols; ++c)
            data.push_back(real_at(arr[r][c], rp + "[" + std::to_string(c) + "]"));
    }
    return Tensor({rows, cols}, std::move(data));
}

}  // namespace

std::string model_to_json(const SequentialNetwork& net)
{
    require_valid(net);
    json layers = json::array();
    for (const auto& node : net.nodes) {
        if (const auto* fc = std::get_if<FullyConnectedNode>(&node)) {
            layers.push_back({{"kind", "fully_connected"},
                              {"in", fc->in_dim()},
                              {"out", fc->out_dim()},
                              {"weights", matrix_json(fc->weights)},
                              {"bias", vector_json(fc->bias)}});
        } else if (const auto* bn = std::get_if<BatchNorm1DNode>(&node)) {
            layers.push_back({{"kind", "batch_norm_1d"},
                              {"dim", bn->dim()},
                              {"gamma", vector_json(bn->gamma)},
                              {"beta", vector_json(bn->beta)},
                              {"running_mean", vector_json(bn->running_mean)},
                              {"running_var", vector_json(bn->running_var)},
                              {"eps", bn->eps}});
        } else {
            layers.push_back({{"kind", "relu"}, {"dim", std::get<ReLUNode>(node).dim}});
        }
    }
    json doc = {{"format_version", kModelFormatVersion},
                {"name", net.name},
                {"input_dim", net.input_dim},
                {"layers", std::move(layers)}};
    return doc.dump(1) + "\n";
}

SequentialNetwork model_from_json(std::string_view text)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ModelIoError(std::string("malformed model document: ") + e.what());
    }
    if (!doc.is_object())
        fail("document", "top level must be an object");

    const json& version = field(doc, "format_version", "document");
    if (!version.is_number_integer() || version.get<long long>() != kModelFormatVersion)
        fail("format_version", "unsupported version " + version.dump() + " (supported: " +
                                   std::to_string(kModelFormatVersion) + ")");

    SequentialNetwork net;
    const json& name = field(doc, "name", "document");
    if (!name.is_string())
        fail("name", "expected a string");
    net.name = name.get<std::string>();
    net.input_dim = dim_field(doc, "input_dim", "document");

    const json& layers = field(doc, "layers", "document");
    if (!layers.is_array())
        fail("layers", "expected an array");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::string where = "layers[" + std::to_string(i) + "]";
        const json& rec = layers[i];
        if (!rec.is_object())
            fail(where, "expected an object");
        const json& kind_v = field(rec, "kind", where);
        if (!kind_v.is_string())
            fail(where + ".kind", "expected a string");
        const std::string kind = kind_v.get<std::string>();
        if (kind == "fully_connected") {
            std::size_t in = dim_field(rec, "in", where);
            std::size_t out = dim_field(rec, "out", where);
            net.nodes.emplace_back(FullyConnectedNode{read_matrix(rec, "weights", out, in, where),
                                                      read_vector(rec, "bias", out, where)});
        } else if (kind == "batch_norm_1d") {
            std::size_t dim = dim_field(rec, "dim", where);
            BatchNorm1DNode bn{read_vector(rec, "gamma", dim, where),
                               read_vector(rec, "beta", dim, where),
                               read_vector(rec, "running_mean", dim, where),
                               read_vector(rec, "running_var", dim, where),
                               real_at(field(rec, "eps", where), where + ".eps")};
            net.nodes.emplace_back(std::move(bn));
        } else if (kind == "relu") {
            net.nodes.emplace_back(ReLUNode{dim_field(rec, "dim", where)});
        } else {
            fail(where + ".kind", "unknown layer kind '" + kind + "'");
        }
    }

    auto issues = validate(net);
    if (!issues.empty()) {
        std::string msg = "model document does not describe a valid network";
        for (const auto& issue : issues)
            msg += "\n  layers[" + std::to_string(issue.node_index) + "]: " + issue.message;
        throw ModelIoError(msg);
    }
    return net;
}

void save_model(const SequentialNetwork& net, const std::filesystem::path& path)
{
    write_file_atomic(path, model_to_json(net));
}

SequentialNetwork load_model(const std::filesystem::path& path)
{
    std::string text;
    try {
        text = read_file(path);
    } catch (const std::exception& e) {
        throw ModelIoError(e.what());
    }
    return model_from_json(text);
}

}  // namespace nnkit
