#include "nnkit/property.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace nnkit {

Vector Box::center() const
{
    Vector c(dim());
    for (std::size_t i = 0; i < c.size(); ++i)
        c[i] = lo[i] + 0.5 * (hi[i] - lo[i]);
    return c;
}

bool Box::contains(std::span<const double> x) const
{
    if (x.size() != dim())
        return false;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!(x[i] >= lo[i] && x[i] <= hi[i]))
            return false;
    return true;
}

std::size_t Box::widest_dimension() const
{
    std::size_t best = 0;
    for (std::size_t i = 1; i < dim(); ++i)
        if (hi[i] - lo[i] > hi[best] - lo[best])
            best = i;
    return best;
}

double Box::max_width() const
{
    double w = 0.0;
    for (std::size_t i = 0; i < dim(); ++i)
        w = std::max(w, hi[i] - lo[i]);
    return w;
}

void Box::check() const
{
    if (lo.empty() || lo.size() != hi.size())
        throw PropertyError("box needs matching, nonempty lower and upper bound vectors");
    for (std::size_t i = 0; i < lo.size(); ++i) {
        if (!std::isfinite(lo[i]) || !std::isfinite(hi[i]))
            throw PropertyError("box bound " + std::to_string(i) + " is not finite");
        if (lo[i] > hi[i])
            throw PropertyError("box is empty in dimension " + std::to_string(i));
    }
}

double LinearAtom::lhs(std::span<const double> v) const
{
    double acc = 0.0;
    for (std::size_t i = 0; i < coeffs.size(); ++i)
        acc += coeffs[i] * v[i];
    return acc;
}

bool LinearAtom::holds(std::span<const double> v, double tolerance) const
{
    return lhs(v) <= rhs + tolerance;
}

void Property::check() const
{
    input_box.check();
    if (num_outputs == 0)
        throw PropertyError("property needs at least one output variable");
    if (disjuncts.empty())
        throw PropertyError("property needs at least one violation disjunct");
    for (std::size_t k = 0; k < disjuncts.size(); ++k) {
        if (disjuncts[k].empty())
            throw PropertyError("violation disjunct " + std::to_string(k) + " is empty");
        for (const auto& atom : disjuncts[k]) {
            if (atom.kind != VarKind::Output || atom.coeffs.size() != num_outputs)
                throw PropertyError("violation atoms must range over the " +
                                    std::to_string(num_outputs) + " outputs");
            if (std::all_of(atom.coeffs.begin(), atom.coeffs.end(), [](double c) { return c == 0.0; }))
                throw PropertyError("violation atom has all-zero coefficients");
            if (!std::isfinite(atom.rhs))
                throw PropertyError("violation atom has a non-finite bound");
        }
    }
}

std::optional<std::size_t> satisfied_disjunct(const Property& property, std::span<const double> y,
                                              double tolerance)
{
    for (std::size_t k = 0; k < property.disjuncts.size(); ++k) {
        const auto& conj = property.disjuncts[k];
        if (std::all_of(conj.begin(), conj.end(),
                        [&](const LinearAtom& a) { return a.holds(y, tolerance); }))
            return k;
    }
    return std::nullopt;
}

Property robustness_property(std::span<const double> x0, std::size_t label,
                             std::size_t num_classes, double epsilon, const Box& domain)
{
    domain.check();
    if (x0.size() != domain.dim())
        throw PropertyError("robustness centre has the wrong dimension");
    if (!domain.contains(x0))
        throw PropertyError("robustness centre lies outside the input domain");
    if (label >= num_classes)
        throw PropertyError("robustness label out of range");
    if (num_classes < 2)
        throw PropertyError("robustness needs at least two classes");
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
        throw PropertyError("robustness epsilon must be a nonnegative real");

    Property p;
    p.num_outputs = num_classes;
    p.input_box.lo.resize(x0.size());
    p.input_box.hi.resize(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i) {
        p.input_box.lo[i] = std::max(x0[i] - epsilon, domain.lo[i]);
        p.input_box.hi[i] = std::min(x0[i] + epsilon, domain.hi[i]);
    }
    for (std::size_t j = 0; j < num_classes; ++j) {
        if (j == label)
            continue;
        LinearAtom atom{VarKind::Output, Vector(num_classes, 0.0), 0.0};
        atom.coeffs[label] = 1.0;
        atom.coeffs[j] = -1.0;
        p.disjuncts.push_back({atom});
    }
    p.robustness = RobustnessInfo{Vector(x0.begin(), x0.end()), label, epsilon};
    return p;
}

Box unit_box(std::size_t dim)
{
    return Box{Vector(dim, 0.0), Vector(dim, 1.0)};
}

namespace {

bool atom_less(const LinearAtom& a, const LinearAtom& b)
{
    if (a.coeffs != b.coeffs)
        return a.coeffs < b.coeffs;
    return a.rhs < b.rhs;
}

std::vector<Conjunction> canonical_disjuncts(const Property& p)
{
    auto out = p.disjuncts;
    for (auto& conj : out)
        std::sort(conj.begin(), conj.end(), atom_less);
    std::sort(out.begin(), out.end(), [](const Conjunction& a, const Conjunction& b) {
        return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), atom_less);
    });
    return out;
}

}  // namespace

bool equivalent(const Property& a, const Property& b)
{
    return a.input_box == b.input_box && a.num_outputs == b.num_outputs &&
           canonical_disjuncts(a) == canonical_disjuncts(b);
}

}  // namespace nnkit
