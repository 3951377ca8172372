#include "nnkit/verifier.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <stdexcept>
#include <utility>

namespace nnkit {

const char* to_string(Verdict v)
{
    switch (v) {
    case Verdict::Verified:
        return "verified";
    case Verdict::Falsified:
        return "falsified";
    case Verdict::Unknown:
        break;
    }
    return "unknown";
}

void BabConfig::check() const
{
    if (max_nodes == 0 || !(min_box_width > 0.0) || !(time_budget > 0.0))
        throw std::invalid_argument("bab config: max_nodes, min_box_width and time_budget must be positive");
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void check_against(const SequentialNetwork& net, const Property& property)
{
    property.check();
    if (property.input_dim() != net.input_dim)
        throw PropertyError("property has " + std::to_string(property.input_dim()) +
                            " inputs, network has " + std::to_string(net.input_dim));
    if (property.num_outputs != net.output_dim())
        throw PropertyError("property has " + std::to_string(property.num_outputs) +
                            " outputs, network has " + std::to_string(net.output_dim()));
}

// Confirms a candidate with the exact network forward; clamps into the box.
std::optional<Counterexample> confirm(const SequentialNetwork& net, const Property& property,
                                      const Box& box, Vector x)
{
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = std::clamp(x[i], box.lo[i], box.hi[i]);
    Vector y = forward(net, x);
    auto k = satisfied_disjunct(property, y);
    if (!k)
        return std::nullopt;
    return Counterexample{std::move(x), std::move(y), *k};
}

// Which disjuncts survive interval refutation on this box.
std::vector<std::size_t> open_disjuncts(const PiecewiseLinearNet& pl, const std::vector<LayerBounds>& bounds,
                                        const Box& box, const Property& property)
{
    std::vector<std::size_t> open;
    for (std::size_t k = 0; k < property.disjuncts.size(); ++k) {
        bool refuted = false;
        for (const auto& atom : property.disjuncts[k])
            if (output_lower_bound(pl, bounds, box, atom.coeffs) > atom.rhs) {
                refuted = true;
                break;
            }
        if (!refuted)
            open.push_back(k);
    }
    return open;
}

std::optional<Counterexample> sample_box(const SequentialNetwork& net, const PiecewiseLinearNet& pl,
                                         const Property& property, const Box& box,
                                         std::size_t count, std::uint64_t seed)
{
    auto try_point = [&](Vector x) -> std::optional<Counterexample> {
        Vector y = pl.evaluate(x);
        if (!satisfied_disjunct(property, y))
            return std::nullopt;
        return confirm(net, property, box, std::move(x));
    };
    if (auto cex = try_point(box.center()))
        return cex;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t s = 0; s < count; ++s) {
        Vector x(box.dim());
        for (std::size_t i = 0; i < x.size(); ++i)
            x[i] = box.lo[i] + unit(rng) * (box.hi[i] - box.lo[i]);
        if (auto cex = try_point(std::move(x)))
            return cex;
    }
    return std::nullopt;
}

// Rows of coefficients over the network input plus offsets.
struct AffineForm {
    std::vector<Vector> rows;
    Vector offset;
};

AffineForm identity_form(std::size_t d)
{
    AffineForm f;
    f.rows.assign(d, Vector(d, 0.0));
    f.offset.assign(d, 0.0);
    for (std::size_t i = 0; i < d; ++i)
        f.rows[i][i] = 1.0;
    return f;
}

AffineForm apply_layer(const AffineLayer& layer, const AffineForm& in, std::size_t d)
{
    const std::size_t width = layer.bias.size();
    AffineForm out;
    out.rows.assign(width, Vector(d, 0.0));
    out.offset = layer.bias;
    for (std::size_t o = 0; o < width; ++o) {
        Vector& row = out.rows[o];
        for (std::size_t j = 0; j < in.rows.size(); ++j) {
            const double w = layer.weights(o, j);
            if (w == 0.0)
                continue;
            for (std::size_t i = 0; i < d; ++i)
                row[i] += w * in.rows[j][i];
            out.offset[o] += w * in.offset[j];
        }
    }
    return out;
}

LinearAtom sign_constraint(const AffineForm& pre, std::size_t j, bool active)
{
    // active: pre_j(x) >= 0  <=>  -row . x <= offset; inactive: row . x <= -offset.
    LinearAtom atom{VarKind::Input, pre.rows[j], active ? pre.offset[j] : -pre.offset[j]};
    if (active)
        for (double& c : atom.coeffs)
            c = -c;
    return atom;
}

std::vector<LinearAtom> disjunct_constraints(const AffineForm& out, const Conjunction& conj)
{
    std::vector<LinearAtom> cons;
    const std::size_t d = out.rows.empty() ? 0 : out.rows[0].size();
    for (const auto& atom : conj) {
        LinearAtom c{VarKind::Input, Vector(d, 0.0), atom.rhs};
        for (std::size_t o = 0; o < atom.coeffs.size(); ++o) {
            const double a = atom.coeffs[o];
            if (a == 0.0)
                continue;
            for (std::size_t i = 0; i < d; ++i)
                c.coeffs[i] += a * out.rows[o][i];
            c.rhs -= a * out.offset[o];
        }
        cons.push_back(std::move(c));
    }
    return cons;
}

enum class Decision { Safe, Witness, Undecided, Timeout };

// Depth-first enumeration of the unstable neurons' phases with LP pruning of
// infeasible partial patterns. Exact up to LP numerics; numeric trouble is
// reported as Undecided rather than Safe.
class ExactSearch {
public:
    ExactSearch(const SequentialNetwork& net, const PiecewiseLinearNet& pl, const Property& property,
                const Box& box, const std::vector<LayerBounds>& bounds, std::vector<std::size_t> open,
                Clock::time_point start, double budget, VerificationStats& stats)
        : net_(net), pl_(pl), property_(property), box_(box), bounds_(bounds), open_(std::move(open)),
          start_(start), budget_(budget), stats_(stats)
    {
    }

    Decision run()
    {
        std::vector<LinearAtom> cons;
        descend(0, identity_form(box_.dim()), cons);
        if (timed_out_)
            return Decision::Timeout;
        if (witness_)
            return Decision::Witness;
        return undecided_ ? Decision::Undecided : Decision::Safe;
    }

    std::optional<Counterexample> witness() const { return witness_; }

private:
    bool stop() const { return witness_.has_value() || timed_out_; }

    LpStatus feasible(const std::vector<LinearAtom>& cons, Vector* point = nullptr)
    {
        if (seconds_since(start_) > budget_) {
            timed_out_ = true;
            return LpStatus::Undecided;
        }
        ++stats_.lp_calls;
        LpResult r = lp_feasible(cons, box_);
        if (point && r.status == LpStatus::Feasible)
            *point = std::move(r.point);
        return r.status;
    }

    void descend(std::size_t layer, const AffineForm& input, std::vector<LinearAtom>& cons)
    {
        const std::size_t d = box_.dim();
        AffineForm pre = apply_layer(pl_.layers[layer], input, d);
        if (layer + 1 == pl_.layers.size()) {
            leaf(pre, cons);
            return;
        }
        AffineForm post = pre;
        assign(layer, 0, pre, post, cons);
    }

    void assign(std::size_t layer, std::size_t j, const AffineForm& pre, AffineForm& post,
                std::vector<LinearAtom>& cons)
    {
        if (stop())
            return;
        if (j == pre.rows.size()) {
            descend(layer + 1, post, cons);
            return;
        }
        const double lo = bounds_[layer].pre_lo[j];
        const double hi = bounds_[layer].pre_hi[j];
        if (lo >= 0.0) {
            assign(layer, j + 1, pre, post, cons);
            return;
        }
        if (hi <= 0.0) {
            Vector saved = std::exchange(post.rows[j], Vector(box_.dim(), 0.0));
            double saved_off = std::exchange(post.offset[j], 0.0);
            assign(layer, j + 1, pre, post, cons);
            post.rows[j] = std::move(saved);
            post.offset[j] = saved_off;
            return;
        }
        for (bool active : {true, false}) {
            if (stop())
                return;
            cons.push_back(sign_constraint(pre, j, active));
            LpStatus st = feasible(cons);
            if (st == LpStatus::Feasible) {
                if (active) {
                    assign(layer, j + 1, pre, post, cons);
                } else {
                    Vector saved = std::exchange(post.rows[j], Vector(box_.dim(), 0.0));
                    double saved_off = std::exchange(post.offset[j], 0.0);
                    assign(layer, j + 1, pre, post, cons);
                    post.rows[j] = std::move(saved);
                    post.offset[j] = saved_off;
                }
            } else if (st == LpStatus::Undecided) {
                undecided_ = true;
            }
            cons.pop_back();
        }
    }

    void leaf(const AffineForm& out, std::vector<LinearAtom>& cons)
    {
        for (std::size_t k : open_) {
            if (stop())
                return;
            auto extra = disjunct_constraints(out, property_.disjuncts[k]);
            const std::size_t base = cons.size();
            cons.insert(cons.end(), extra.begin(), extra.end());
            Vector x;
            LpStatus st = feasible(cons, &x);
            cons.resize(base);
            if (st == LpStatus::Undecided) {
                undecided_ = true;
            } else if (st == LpStatus::Feasible) {
                if (auto cex = confirm(net_, property_, box_, std::move(x)))
                    witness_ = std::move(cex);
                else
                    undecided_ = true;  // spurious LP solution
            }
        }
    }

    const SequentialNetwork& net_;
    const PiecewiseLinearNet& pl_;
    const Property& property_;
    const Box& box_;
    const std::vector<LayerBounds>& bounds_;
    std::vector<std::size_t> open_;
    Clock::time_point start_;
    double budget_;
    VerificationStats& stats_;
    std::optional<Counterexample> witness_;
    bool undecided_ = false;
    bool timed_out_ = false;
};

VerificationResult finish(VerificationResult r, Clock::time_point start)
{
    r.stats.wall_seconds = seconds_since(start);
    if (r.status != Verdict::Unknown)
        r.stats.reason.clear();
    return r;
}

}  // namespace

std::optional<Counterexample> falsify_sample(const SequentialNetwork& net, const Property& property,
                                             std::size_t n_samples, std::uint64_t seed)
{
    check_against(net, property);
    const PiecewiseLinearNet pl = to_piecewise_linear(net);
    const Box& box = property.input_box;
    const std::size_t d = box.dim();

    // Candidate points are generated serially (fixed RNG stream) and screened
    // in parallel chunks; the lowest-index confirmed witness wins.
    auto screen = [&](const std::vector<Vector>& pts) -> std::optional<Counterexample> {
        const auto n = static_cast<std::ptrdiff_t>(pts.size());
        std::vector<char> hit(pts.size(), 0);
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < n; ++i)
            hit[i] = satisfied_disjunct(property, pl.evaluate(pts[i])).has_value();
        for (std::size_t i = 0; i < pts.size(); ++i)
            if (hit[i])
                if (auto cex = confirm(net, property, box, pts[i]))
                    return cex;
        return std::nullopt;
    };

    if (d <= 12) {
        std::vector<Vector> corners(std::size_t{1} << d, Vector(d));
        for (std::size_t mask = 0; mask < corners.size(); ++mask)
            for (std::size_t i = 0; i < d; ++i)
                corners[mask][i] = (mask >> i) & 1 ? box.hi[i] : box.lo[i];
        if (auto cex = screen(corners))
            return cex;
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    constexpr std::size_t kChunk = 4096;
    std::vector<Vector> chunk;
    for (std::size_t done = 0; done < n_samples;) {
        const std::size_t take = std::min(kChunk, n_samples - done);
        chunk.assign(take, Vector(d));
        for (auto& x : chunk)
            for (std::size_t i = 0; i < d; ++i)
                x[i] = box.lo[i] + unit(rng) * (box.hi[i] - box.lo[i]);
        if (auto cex = screen(chunk))
            return cex;
        done += take;
    }
    return std::nullopt;
}

VerificationResult verify_ibp(const SequentialNetwork& net, const Property& property,
                              std::size_t sample_count, std::uint64_t seed)
{
    const auto start = Clock::now();
    check_against(net, property);
    const PiecewiseLinearNet pl = to_piecewise_linear(net);
    VerificationResult r;
    r.stats.nodes = 1;
    auto bounds = interval_forward(pl, property.input_box);
    r.stats.root_unstable = count_unstable(bounds);
    if (open_disjuncts(pl, bounds, property.input_box, property).empty()) {
        r.status = Verdict::Verified;
        return finish(r, start);
    }
    if (auto cex = sample_box(net, pl, property, property.input_box, sample_count, seed)) {
        r.status = Verdict::Falsified;
        r.counterexample = std::move(cex);
        return finish(r, start);
    }
    r.status = Verdict::Unknown;
    r.stats.reason = "IBP inconclusive";
    return finish(r, start);
}

VerificationResult verify_bab(const SequentialNetwork& net, const Property& property,
                              const BabConfig& config)
{
    const auto start = Clock::now();
    config.check();
    check_against(net, property);
    const PiecewiseLinearNet pl = to_piecewise_linear(net);

    VerificationResult r;
    std::vector<Box> stack{property.input_box};
    bool unresolved = false;

    while (!stack.empty()) {
        if (r.stats.nodes >= config.max_nodes) {
            r.stats.reason = "node budget exhausted";
            return finish(r, start);
        }
        if (seconds_since(start) > config.time_budget) {
            r.stats.reason = "time budget exhausted";
            return finish(r, start);
        }
        Box box = std::move(stack.back());
        stack.pop_back();
        const std::uint64_t node_id = r.stats.nodes++;

        auto bounds = interval_forward(pl, box);
        const std::size_t unstable = count_unstable(bounds);
        if (node_id == 0)
            r.stats.root_unstable = unstable;
        auto open = open_disjuncts(pl, bounds, box, property);
        if (open.empty())
            continue;

        const std::uint64_t node_seed = config.seed ^ (0x9e3779b97f4a7c15ULL * (node_id + 1));
        if (auto cex = sample_box(net, pl, property, box, config.sample_count, node_seed)) {
            r.status = Verdict::Falsified;
            r.counterexample = std::move(cex);
            return finish(r, start);
        }

        if (unstable <= config.enum_threshold) {
            ExactSearch search(net, pl, property, box, bounds, open, start, config.time_budget, r.stats);
            Decision dec = search.run();
            if (dec == Decision::Safe)
                continue;
            if (dec == Decision::Witness) {
                r.status = Verdict::Falsified;
                r.counterexample = search.witness();
                return finish(r, start);
            }
            if (dec == Decision::Timeout) {
                r.stats.reason = "time budget exhausted";
                return finish(r, start);
            }
        }

        if (box.max_width() < config.min_box_width) {
            unresolved = true;
            continue;
        }
        const std::size_t dim = box.widest_dimension();
        const double mid = box.lo[dim] + 0.5 * (box.hi[dim] - box.lo[dim]);
        Box lower = box;
        Box upper = std::move(box);
        lower.hi[dim] = mid;
        upper.lo[dim] = mid;
        stack.push_back(std::move(upper));
        stack.push_back(std::move(lower));
    }

    if (unresolved) {
        r.stats.reason = "sub-box below min_box_width left undecided";
        return finish(r, start);
    }
    r.status = Verdict::Verified;
    return finish(r, start);
}

PatternCheck check_pattern(const SequentialNetwork& net, const Box& box,
                           const ActivationPattern& pattern, const Conjunction& disjunct)
{
    box.check();
    const PiecewiseLinearNet pl = to_piecewise_linear(net);
    if (box.dim() != pl.input_dim)
        throw ShapeError("check_pattern: box dimension does not match the network");
    if (pattern.size() != pl.hidden_neurons())
        throw ShapeError("check_pattern: pattern has " + std::to_string(pattern.size()) +
                         " entries, network has " + std::to_string(pl.hidden_neurons()) +
                         " hidden neurons");

    const std::size_t d = box.dim();
    std::vector<LinearAtom> cons;
    AffineForm form = identity_form(d);
    std::size_t idx = 0;
    for (std::size_t l = 0; l + 1 < pl.layers.size(); ++l) {
        AffineForm pre = apply_layer(pl.layers[l], form, d);
        for (std::size_t j = 0; j < pre.rows.size(); ++j, ++idx) {
            if (pattern[idx] == PhaseState::Free)
                throw std::invalid_argument("check_pattern: pattern must not contain Free entries");
            const bool active = pattern[idx] == PhaseState::Active;
            cons.push_back(sign_constraint(pre, j, active));
            if (!active) {
                pre.rows[j].assign(d, 0.0);
                pre.offset[j] = 0.0;
            }
        }
        form = std::move(pre);
    }
    AffineForm out = apply_layer(pl.layers.back(), form, d);
    auto extra = disjunct_constraints(out, disjunct);
    cons.insert(cons.end(), extra.begin(), extra.end());

    PatternCheck res;
    LpResult lp = lp_feasible(cons, box);
    if (lp.status == LpStatus::Infeasible) {
        res.status = PatternCheck::Status::Infeasible;
        return res;
    }
    if (lp.status == LpStatus::Undecided) {
        res.status = PatternCheck::Status::Undecided;
        return res;
    }
    res.point = lp.point;
    Vector y = forward(net, lp.point);
    const bool ok = std::all_of(disjunct.begin(), disjunct.end(),
                                [&](const LinearAtom& a) { return a.holds(y, kWitnessTolerance); });
    res.status = ok ? PatternCheck::Status::Witness : PatternCheck::Status::Spurious;
    return res;
}

}  // namespace nnkit
