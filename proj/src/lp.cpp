#include "nnkit/lp.hpp"

#include <algorithm>
#include <cmath>

namespace nnkit {

namespace {

constexpr double kPivotTolerance = 1e-11;

// Dense tableau for: minimize sum(artificials) subject to A u + S s + R r = rhs,
// u, s, r >= 0, with rhs >= 0.
class PhaseOne {
public:
    PhaseOne(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), t_((rows + 1) * (cols + 1), 0.0), basis_(rows) {}

    double& at(std::size_t r, std::size_t c) { return t_[r * (cols_ + 1) + c]; }
    double& rhs(std::size_t r) { return t_[r * (cols_ + 1) + cols_]; }
    double& cost(std::size_t c) { return t_[rows_ * (cols_ + 1) + c]; }
    std::size_t& basis(std::size_t r) { return basis_[r]; }

    // Returns false on iteration limit.
    bool solve(std::size_t max_iterations, std::size_t& iterations)
    {
        for (iterations = 0; iterations < max_iterations; ++iterations) {
            std::size_t enter = cols_;
            for (std::size_t c = 0; c < cols_; ++c)
                if (cost(c) < -kPivotTolerance) {
                    enter = c;
                    break;
                }
            if (enter == cols_)
                return true;
            std::size_t leave = rows_;
            double best = 0.0;
            for (std::size_t r = 0; r < rows_; ++r) {
                double a = at(r, enter);
                if (a <= kPivotTolerance)
                    continue;
                double ratio = rhs(r) / a;
                if (leave == rows_ || ratio < best - 1e-12 ||
                    (ratio <= best + 1e-12 && basis_[r] < basis_[leave])) {
                    leave = r;
                    best = ratio;
                }
            }
            if (leave == rows_)
                return true;  // unbounded direction cannot occur in phase one; treat as optimal
            pivot(leave, enter);
        }
        return false;
    }

    double objective() { return -t_[rows_ * (cols_ + 1) + cols_]; }

private:
    void pivot(std::size_t pr, std::size_t pc)
    {
        const std::size_t w = cols_ + 1;
        double inv = 1.0 / at(pr, pc);
        for (std::size_t c = 0; c < w; ++c)
            t_[pr * w + c] *= inv;
        at(pr, pc) = 1.0;
        for (std::size_t r = 0; r <= rows_; ++r) {
            if (r == pr)
                continue;
            double f = t_[r * w + pc];
            if (f == 0.0)
                continue;
            for (std::size_t c = 0; c < w; ++c)
                t_[r * w + c] -= f * t_[pr * w + c];
            t_[r * w + pc] = 0.0;
        }
        basis_[pr] = pc;
    }

    std::size_t rows_;
    std::size_t cols_;
    std::vector<double> t_;
    std::vector<std::size_t> basis_;
};

}  // namespace

LpResult lp_feasible(std::span<const LinearAtom> constraints, const Box& bounds,
                     std::size_t max_iterations)
{
    bounds.check();
    const std::size_t n = bounds.dim();
    LpResult res;

    // Shift to u = x - lo in [0, width]; normalize each row by its largest coefficient.
    struct Row {
        Vector a;
        double b;
    };
    std::vector<Row> rows;
    for (const auto& c : constraints) {
        if (c.coeffs.size() != n)
            throw ShapeError("lp_feasible: constraint has " + std::to_string(c.coeffs.size()) +
                             " coefficients for " + std::to_string(n) + " variables");
        double scale = 0.0;
        for (double v : c.coeffs)
            scale = std::max(scale, std::abs(v));
        double shifted = c.rhs;
        for (std::size_t i = 0; i < n; ++i)
            shifted -= c.coeffs[i] * bounds.lo[i];
        if (scale == 0.0) {
            if (c.rhs < -kLpTolerance) {
                res.status = LpStatus::Infeasible;
                return res;
            }
            continue;
        }
        Row row{Vector(n), shifted / scale};
        for (std::size_t i = 0; i < n; ++i)
            row.a[i] = c.coeffs[i] / scale;
        rows.push_back(std::move(row));
    }
    for (std::size_t i = 0; i < n; ++i) {
        Row row{Vector(n, 0.0), bounds.hi[i] - bounds.lo[i]};
        row.a[i] = 1.0;
        rows.push_back(std::move(row));
    }

    const std::size_t m = rows.size();
    std::size_t n_art = 0;
    for (const auto& r : rows)
        n_art += r.b < 0.0;
    const std::size_t cols = n + m + n_art;
    PhaseOne lp(m, cols);
    std::size_t art = n + m;
    for (std::size_t r = 0; r < m; ++r) {
        const double sign = rows[r].b < 0.0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < n; ++i)
            lp.at(r, i) = sign * rows[r].a[i];
        lp.at(r, n + r) = sign;
        lp.rhs(r) = sign * rows[r].b;
        if (sign < 0.0) {
            lp.at(r, art) = 1.0;
            lp.basis(r) = art;
            // Cost row holds reduced costs: subtract the artificial's row.
            for (std::size_t c = 0; c < cols; ++c)
                lp.cost(c) -= lp.at(r, c);
            lp.cost(art) += 1.0;
            lp.cost(cols) -= lp.rhs(r);
            ++art;
        } else {
            lp.basis(r) = n + r;
        }
    }

    if (!lp.solve(max_iterations, res.iterations)) {
        res.status = LpStatus::Undecided;
        return res;
    }
    if (lp.objective() > kLpTolerance) {
        res.status = LpStatus::Infeasible;
        return res;
    }

    Vector u(n, 0.0);
    for (std::size_t r = 0; r < m; ++r)
        if (lp.basis(r) < n)
            u[lp.basis(r)] = lp.rhs(r);
    Vector x(n);
    for (std::size_t i = 0; i < n; ++i)
        x[i] = std::clamp(bounds.lo[i] + u[i], bounds.lo[i], bounds.hi[i]);

    for (const auto& c : constraints) {
        double scale = 0.0;
        double lhs = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            scale = std::max(scale, std::abs(c.coeffs[i]));
            lhs += c.coeffs[i] * x[i];
        }
        if (scale > 0.0 && (lhs - c.rhs) / scale > kLpTolerance) {
            res.status = LpStatus::Undecided;
            return res;
        }
    }
    res.status = LpStatus::Feasible;
    res.point = std::move(x);
    return res;
}

}  // namespace nnkit
