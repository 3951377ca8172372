#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

#include "nnkit/property.hpp"

namespace nnkit {

inline constexpr std::size_t kMaxDisjuncts = 64;

class SmtLibError : public std::runtime_error {
public:
    SmtLibError(const std::string& what, std::size_t line, std::size_t column);
    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

// Linear-arithmetic SMT-LIB subset over X_<i> (inputs) and Y_<j> (outputs).
// Input atoms must each bound a single variable and appear only in
// conjunctive position; output assertions are conjoined and expanded to
// disjunctive normal form (at most kMaxDisjuncts disjuncts). Strict
// comparisons are read as their non-strict closures.
Property parse_smtlib(std::string_view text);

// Declares every X and Y variable, asserts the box bounds, then asserts the
// violation condition as a disjunction of conjunctions.
std::string emit_smtlib(const Property& property);

}  // namespace nnkit
