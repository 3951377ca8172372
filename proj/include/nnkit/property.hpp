#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "nnkit/tensor.hpp"

namespace nnkit {

// Tolerance used whenever a concrete point is checked against a disjunct.
inline constexpr double kWitnessTolerance = 1e-7;

class PropertyError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct Box {
    Vector lo;
    Vector hi;

    std::size_t dim() const { return lo.size(); }
    Vector center() const;
    bool contains(std::span<const double> x) const;
    // Lowest index among the widest dimensions.
    std::size_t widest_dimension() const;
    double max_width() const;
    void check() const;
    bool operator==(const Box&) const = default;
};

enum class VarKind { Input, Output };

// coeffs . v <= rhs, with v the input (X) or output (Y) vector.
struct LinearAtom {
    VarKind kind = VarKind::Output;
    Vector coeffs;
    double rhs = 0.0;

    double lhs(std::span<const double> v) const;
    bool holds(std::span<const double> v, double tolerance = 0.0) const;
    bool operator==(const LinearAtom&) const = default;
};

using Conjunction = std::vector<LinearAtom>;

struct RobustnessInfo {
    Vector center;
    std::size_t label = 0;
    double epsilon = 0.0;
    bool operator==(const RobustnessInfo&) const = default;
};

// Violation-oriented: the property is violated iff some x in input_box maps to
// an output satisfying every atom of at least one disjunct.
struct Property {
    Box input_box;
    std::size_t num_outputs = 0;
    std::vector<Conjunction> disjuncts;
    std::optional<RobustnessInfo> robustness;

    std::size_t input_dim() const { return input_box.dim(); }
    void check() const;
};

// Index of the first disjunct whose atoms all hold at output y.
std::optional<std::size_t> satisfied_disjunct(const Property& property, std::span<const double> y,
                                              double tolerance = kWitnessTolerance);

// L-infinity ball of radius epsilon around x0 clipped to `domain`; one
// disjunct Y_j - Y_label >= 0 for every j != label.
Property robustness_property(std::span<const double> x0, std::size_t label,
                             std::size_t num_classes, double epsilon, const Box& domain);

Box unit_box(std::size_t dim);

// Same box, same output count, and the same set of disjuncts up to atom order.
bool equivalent(const Property& a, const Property& b);

}  // namespace nnkit
