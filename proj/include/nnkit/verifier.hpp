#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nnkit/interval.hpp"
#include "nnkit/lp.hpp"
#include "nnkit/network.hpp"
#include "nnkit/property.hpp"

namespace nnkit {

enum class Verdict { Verified, Falsified, Unknown };

const char* to_string(Verdict v);

struct Counterexample {
    Vector input;
    Vector output;
    std::size_t disjunct = 0;
};

struct VerificationStats {
    std::size_t nodes = 0;
    std::size_t lp_calls = 0;
    double wall_seconds = 0.0;
    std::size_t root_unstable = 0;  // unstable ReLUs under interval bounds of the whole input box
    std::string reason;             // why the result is Unknown
};

// Verified never carries a counterexample; Falsified always carries one that
// re-validates under forward() within kWitnessTolerance.
struct VerificationResult {
    Verdict status = Verdict::Unknown;
    std::optional<Counterexample> counterexample;
    VerificationStats stats;
};

struct BabConfig {
    std::size_t max_nodes = 100000;
    double min_box_width = 1e-6;
    std::size_t enum_threshold = 12;  // max unstable ReLUs for an exact node decision
    double time_budget = 600.0;       // seconds
    std::size_t sample_count = 32;
    std::uint64_t seed = 0;

    void check() const;
};

// Box corners (when d <= 12) then n seeded uniform points; returns the first
// point whose output satisfies a disjunct. Deterministic for a fixed seed.
std::optional<Counterexample> falsify_sample(const SequentialNetwork& net, const Property& property,
                                             std::size_t n_samples, std::uint64_t seed);

// Interval refutation, then the box centre plus sample_count random points.
VerificationResult verify_ibp(const SequentialNetwork& net, const Property& property,
                              std::size_t sample_count = 32, std::uint64_t seed = 0);

// Input-splitting branch and bound. Each node is refuted by interval bounds,
// falsified by sampling, decided exactly when at most enum_threshold ReLUs are
// unstable, or split at the midpoint of its widest dimension.
VerificationResult verify_bab(const SequentialNetwork& net, const Property& property,
                              const BabConfig& config = {});

enum class PhaseState : std::int8_t { Active, Inactive, Free };
using ActivationPattern = std::vector<PhaseState>;

struct PatternCheck {
    enum class Status { Infeasible, Witness, Spurious, Undecided } status = Status::Undecided;
    Vector point;  // witness input when status == Witness (or the rejected point when Spurious)
};

// Exact feasibility of one disjunct inside the linear region selected by a
// total activation pattern (one entry per hidden neuron of the folded net).
PatternCheck check_pattern(const SequentialNetwork& net, const Box& box,
                           const ActivationPattern& pattern, const Conjunction& disjunct);

}  // namespace nnkit
