#pragma once

#include <cstddef>
#include <span>

#include "nnkit/property.hpp"

namespace nnkit {

enum class LpStatus { Feasible, Infeasible, Undecided };

struct LpResult {
    LpStatus status = LpStatus::Undecided;
    Vector point;  // set when Feasible
    std::size_t iterations = 0;
};

inline constexpr double kLpTolerance = 1e-9;

// Finds a point in `bounds` satisfying every constraint (atom.coeffs . x <=
// atom.rhs) via a phase-one simplex with Bland's rule. A returned point is
// re-checked: each row, scaled by its largest coefficient, holds within
// kLpTolerance. Iteration-limit hits and failed re-checks are Undecided.
LpResult lp_feasible(std::span<const LinearAtom> constraints, const Box& bounds,
                     std::size_t max_iterations = 100000);

}  // namespace nnkit
