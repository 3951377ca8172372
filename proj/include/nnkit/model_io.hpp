#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "nnkit/network.hpp"

namespace nnkit {

inline constexpr int kModelFormatVersion = 1;

class ModelIoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// JSON model document:
//   {"format_version":1,"name":...,"input_dim":...,"layers":[...]}
// with layer records tagged by "kind" (fully_connected, batch_norm_1d, relu).
// Reals are written in shortest round-trip form, so save/load is bit-exact.
std::string model_to_json(const SequentialNetwork& net);
SequentialNetwork model_from_json(std::string_view text);

void save_model(const SequentialNetwork& net, const std::filesystem::path& path);
SequentialNetwork load_model(const std::filesystem::path& path);

}  // namespace nnkit
