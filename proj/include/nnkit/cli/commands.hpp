#pragma once

#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nnkit/verifier.hpp"

namespace nnkit::cli {

// Process exit codes. verify maps its verdict onto 0/1/2; every other
// command returns kOk or kError.
inline constexpr int kOk = 0;
inline constexpr int kVerified = 0;
inline constexpr int kFalsified = 1;
inline constexpr int kUnknown = 2;
inline constexpr int kError = 3;

int exit_code(Verdict v);

// {status, input, output, disjunct, stats}; input/output/disjunct are null
// unless the verdict is Falsified.
nlohmann::json result_record(const VerificationResult& result);

// Runs one command line (args excludes the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nnkit::cli
