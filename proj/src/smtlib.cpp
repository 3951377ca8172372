#include "nnkit/smtlib.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <vector>

namespace nnkit {

SmtLibError::SmtLibError(const std::string& what, std::size_t line, std::size_t column)
    : std::runtime_error("smtlib:" + std::to_string(line) + ":" + std::to_string(column) + ": " + what),
      line_(line),
      column_(column)
{
}

namespace {

struct SExpr {
    bool is_list = false;
    std::string atom;
    std::vector<SExpr> items;
    std::size_t line = 1;
    std::size_t column = 1;
};

[[noreturn]] void fail(const SExpr& at, const std::string& what)
{
    throw SmtLibError(what, at.line, at.column);
}

class Reader {
public:
    explicit Reader(std::string_view text) : text_(text) {}

    std::vector<SExpr> read_all()
    {
        std::vector<SExpr> out;
        skip();
        while (pos_ < text_.size()) {
            out.push_back(read());
            skip();
        }
        return out;
    }

private:
    void advance()
    {
        if (text_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    void skip()
    {
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if (c == ';') {
                while (pos_ < text_.size() && text_[pos_] != '\n')
                    advance();
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else {
                break;
            }
        }
    }

    SExpr read()
    {
        SExpr e;
        e.line = line_;
        e.column = col_;
        char c = text_[pos_];
        if (c == ')')
            throw SmtLibError("unexpected ')'", line_, col_);
        if (c == '(') {
            e.is_list = true;
            advance();
            skip();
            while (true) {
                if (pos_ >= text_.size())
                    throw SmtLibError("unterminated list opened here", e.line, e.column);
                if (text_[pos_] == ')') {
                    advance();
                    break;
                }
                e.items.push_back(read());
                skip();
            }
            return e;
        }
        if (c == '|' || c == '"')
            throw SmtLibError("quoted symbols and strings are not supported", line_, col_);
        while (pos_ < text_.size()) {
            char d = text_[pos_];
            if (d == '(' || d == ')' || d == ';' || std::isspace(static_cast<unsigned char>(d)))
                break;
            e.atom.push_back(d);
            advance();
        }
        return e;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::size_t col_ = 1;
};

struct VarRef {
    VarKind kind;
    std::size_t index;
    bool operator<(const VarRef& o) const
    {
        return kind != o.kind ? kind < o.kind : index < o.index;
    }
};

std::optional<VarRef> parse_var_name(const std::string& name)
{
    if (name.size() < 3 || name[1] != '_' || (name[0] != 'X' && name[0] != 'Y'))
        return std::nullopt;
    std::size_t idx = 0;
    const char* first = name.data() + 2;
    const char* last = name.data() + name.size();
    auto [ptr, ec] = std::from_chars(first, last, idx);
    if (ec != std::errc() || ptr != last || (name.size() > 3 && name[2] == '0'))
        return std::nullopt;
    return VarRef{name[0] == 'X' ? VarKind::Input : VarKind::Output, idx};
}

std::optional<double> parse_decimal(const std::string& s)
{
    std::size_t i = (!s.empty() && s[0] == '-') ? 1 : 0;
    std::size_t digits = 0;
    std::size_t dots = 0;
    for (std::size_t k = i; k < s.size(); ++k) {
        if (std::isdigit(static_cast<unsigned char>(s[k])))
            ++digits;
        else if (s[k] == '.' && dots == 0 && digits > 0)
            ++dots;
        else
            return std::nullopt;
    }
    if (digits == 0 || s.back() == '.')
        return std::nullopt;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
        return std::nullopt;
    return v;
}

struct LinExpr {
    std::map<VarRef, double> coeffs;
    double constant = 0.0;

    bool is_constant() const
    {
        return std::all_of(coeffs.begin(), coeffs.end(), [](const auto& kv) { return kv.second == 0.0; });
    }
    void add(const LinExpr& o, double sign)
    {
        for (const auto& [v, c] : o.coeffs)
            coeffs[v] += sign * c;
        constant += sign * o.constant;
    }
    void scale(double s)
    {
        for (auto& [v, c] : coeffs)
            c *= s;
        constant *= s;
    }
};

struct Formula {
    enum class Kind { Atom, And, Or } kind = Kind::Atom;
    LinearAtom atom;  // over X or Y, depending on atom.kind
    std::vector<Formula> children;
    const SExpr* source = nullptr;
};

class Parser {
public:
    Property parse(std::string_view text)
    {
        exprs_ = Reader(text).read_all();
        for (const auto& cmd : exprs_)
            declare_pass(cmd);

        input_dim_ = contiguous(VarKind::Input);
        output_dim_ = contiguous(VarKind::Output);

        std::vector<Formula> output_conjuncts;
        lo_.assign(input_dim_, -std::numeric_limits<double>::infinity());
        hi_.assign(input_dim_, std::numeric_limits<double>::infinity());
        for (const auto& cmd : exprs_) {
            if (head(cmd) != "assert")
                continue;
            if (cmd.items.size() != 2)
                fail(cmd, "assert takes exactly one formula");
            split_assertion(formula(cmd.items[1]), output_conjuncts);
        }

        Property p;
        p.num_outputs = output_dim_;
        for (std::size_t i = 0; i < input_dim_; ++i) {
            if (!std::isfinite(lo_[i]) || !std::isfinite(hi_[i]))
                throw SmtLibError("input X_" + std::to_string(i) + " lacks a lower or upper bound", 1, 1);
            if (lo_[i] > hi_[i])
                throw SmtLibError("input box is empty in X_" + std::to_string(i), 1, 1);
        }
        p.input_box = Box{lo_, hi_};
        if (output_conjuncts.empty())
            throw SmtLibError("no assertion constrains the outputs", 1, 1);

        Formula all;
        all.kind = Formula::Kind::And;
        all.children = std::move(output_conjuncts);
        p.disjuncts = dnf(all);
        if (p.disjuncts.empty())
            throw SmtLibError("violation condition has no disjuncts", 1, 1);
        p.check();
        return p;
    }

private:
    static std::string head(const SExpr& e)
    {
        if (!e.is_list || e.items.empty() || e.items[0].is_list)
            return {};
        return e.items[0].atom;
    }

    void declare_pass(const SExpr& cmd)
    {
        if (!cmd.is_list || cmd.items.empty() || cmd.items[0].is_list)
            fail(cmd, "expected a command");
        const std::string h = cmd.items[0].atom;
        if (h == "declare-const" || h == "declare-fun") {
            const bool fun = h == "declare-fun";
            const std::size_t arity = fun ? 4 : 3;
            if (cmd.items.size() != arity || cmd.items[1].is_list)
                fail(cmd, h + ": malformed declaration");
            if (fun && (!cmd.items[2].is_list || !cmd.items[2].items.empty()))
                fail(cmd.items[2], "declare-fun: only nullary functions are supported");
            const SExpr& sort = cmd.items[arity - 1];
            if (sort.is_list || sort.atom != "Real")
                fail(sort, "only sort Real is supported");
            auto ref = parse_var_name(cmd.items[1].atom);
            if (!ref)
                fail(cmd.items[1], "unknown symbol '" + cmd.items[1].atom +
                                       "' (variables must be named X_<i> or Y_<j>)");
            if (!declared_.insert({cmd.items[1].atom, *ref}).second)
                fail(cmd.items[1], "duplicate declaration of " + cmd.items[1].atom);
        } else if (h == "assert") {
        } else if (h == "set-logic" || h == "set-info" || h == "set-option" || h == "check-sat" ||
                   h == "exit" || h == "get-model") {
        } else {
            fail(cmd, "unsupported command '" + h + "'");
        }
    }

    std::size_t contiguous(VarKind kind)
    {
        std::vector<std::size_t> idx;
        for (const auto& [name, ref] : declared_)
            if (ref.kind == kind)
                idx.push_back(ref.index);
        std::sort(idx.begin(), idx.end());
        for (std::size_t i = 0; i < idx.size(); ++i)
            if (idx[i] != i)
                throw SmtLibError(std::string(kind == VarKind::Input ? "X" : "Y") + "_" +
                                      std::to_string(i) + " is not declared", 1, 1);
        if (idx.empty())
            throw SmtLibError(std::string("no ") + (kind == VarKind::Input ? "input (X_i)" : "output (Y_j)") +
                                  " variables declared", 1, 1);
        return idx.size();
    }

    LinExpr term(const SExpr& e)
    {
        LinExpr out;
        if (!e.is_list) {
            if (auto v = parse_decimal(e.atom)) {
                out.constant = *v;
                return out;
            }
            auto it = declared_.find(e.atom);
            if (it == declared_.end())
                fail(e, "unknown symbol '" + e.atom + "'");
            out.coeffs[it->second] = 1.0;
            return out;
        }
        const std::string op = head(e);
        if (op == "+") {
            if (e.items.size() < 2)
                fail(e, "'+' needs at least one argument");
            for (std::size_t i = 1; i < e.items.size(); ++i)
                out.add(term(e.items[i]), 1.0);
            return out;
        }
        if (op == "-") {
            if (e.items.size() == 2) {
                out.add(term(e.items[1]), -1.0);
                return out;
            }
            if (e.items.size() != 3)
                fail(e, "'-' takes one or two arguments");
            out.add(term(e.items[1]), 1.0);
            out.add(term(e.items[2]), -1.0);
            return out;
        }
        if (op == "*") {
            if (e.items.size() != 3)
                fail(e, "'*' takes exactly two arguments");
            LinExpr a = term(e.items[1]);
            LinExpr b = term(e.items[2]);
            if (a.is_constant()) {
                b.scale(a.constant);
                return b;
            }
            if (b.is_constant()) {
                a.scale(b.constant);
                return a;
            }
            fail(e, "nonlinear product");
        }
        if (op.empty())
            fail(e, "malformed term");
        fail(e, "unknown symbol '" + op + "'");
    }

    Formula atom_formula(const SExpr& e, const std::string& op)
    {
        if (e.items.size() != 3)
            fail(e, "'" + op + "' takes exactly two arguments");
        LinExpr lhs = term(e.items[1]);
        LinExpr rhs = term(e.items[2]);
        // lhs <= rhs  becomes  lhs - rhs <= 0; lhs >= rhs becomes rhs - lhs <= 0.
        LinExpr diff;
        if (op == "<=" || op == "<") {
            diff.add(lhs, 1.0);
            diff.add(rhs, -1.0);
        } else {
            diff.add(rhs, 1.0);
            diff.add(lhs, -1.0);
        }
        bool has_x = false;
        bool has_y = false;
        for (const auto& [v, c] : diff.coeffs) {
            if (c == 0.0)
                continue;
            (v.kind == VarKind::Input ? has_x : has_y) = true;
        }
        if (has_x && has_y)
            fail(e, "atom mixes input and output variables");
        if (!has_x && !has_y)
            fail(e, "atom has no variables");

        Formula f;
        f.source = &e;
        f.atom.kind = has_x ? VarKind::Input : VarKind::Output;
        f.atom.coeffs.assign(has_x ? input_dim_ : output_dim_, 0.0);
        for (const auto& [v, c] : diff.coeffs)
            if (v.kind == f.atom.kind)
                f.atom.coeffs[v.index] += c;
        f.atom.rhs = -diff.constant;
        return f;
    }

    Formula formula(const SExpr& e)
    {
        const std::string op = head(e);
        if (op == "<=" || op == ">=" || op == "<" || op == ">")
            return atom_formula(e, op);
        if (op == "and" || op == "or") {
            if (e.items.size() < 2)
                fail(e, "'" + op + "' needs at least one argument");
            Formula f;
            f.source = &e;
            f.kind = op == "and" ? Formula::Kind::And : Formula::Kind::Or;
            for (std::size_t i = 1; i < e.items.size(); ++i)
                f.children.push_back(formula(e.items[i]));
            return f;
        }
        if (op.empty())
            fail(e, e.is_list ? "malformed formula" : "unknown symbol '" + e.atom + "'");
        fail(e, "unknown symbol '" + op + "'");
    }

    static bool mentions_input(const Formula& f)
    {
        if (f.kind == Formula::Kind::Atom)
            return f.atom.kind == VarKind::Input;
        return std::any_of(f.children.begin(), f.children.end(), mentions_input);
    }

    void bound_input(const Formula& f)
    {
        std::size_t var = 0;
        std::size_t nonzero = 0;
        for (std::size_t i = 0; i < f.atom.coeffs.size(); ++i)
            if (f.atom.coeffs[i] != 0.0) {
                var = i;
                ++nonzero;
            }
        if (nonzero != 1)
            fail(*f.source, "non-box input constraint: each input atom must bound a single variable");
        const double a = f.atom.coeffs[var];
        const double bound = f.atom.rhs / a;
        if (a > 0.0)
            hi_[var] = std::min(hi_[var], bound);
        else
            lo_[var] = std::max(lo_[var], bound);
    }

    // Top-level conjunctions are flattened; input atoms there become box
    // bounds, everything else joins the output condition.
    void split_assertion(Formula f, std::vector<Formula>& outputs)
    {
        if (f.kind == Formula::Kind::And) {
            for (auto& c : f.children)
                split_assertion(std::move(c), outputs);
            return;
        }
        if (f.kind == Formula::Kind::Atom && f.atom.kind == VarKind::Input) {
            bound_input(f);
            return;
        }
        if (mentions_input(f))
            fail(*f.source, "non-box input constraint: input atoms may not appear under 'or'");
        outputs.push_back(std::move(f));
    }

    std::vector<Conjunction> dnf(const Formula& f) const
    {
        if (f.kind == Formula::Kind::Atom)
            return {{f.atom}};
        if (f.kind == Formula::Kind::Or) {
            std::vector<Conjunction> out;
            for (const auto& c : f.children) {
                auto part = dnf(c);
                out.insert(out.end(), part.begin(), part.end());
                if (out.size() > kMaxDisjuncts)
                    fail(*f.source, "disjunctive normal form exceeds " + std::to_string(kMaxDisjuncts) +
                                        " disjuncts");
            }
            return out;
        }
        std::vector<Conjunction> acc{{}};
        for (const auto& c : f.children) {
            auto part = dnf(c);
            if (acc.size() * part.size() > kMaxDisjuncts)
                fail(*(c.source ? c.source : f.source),
                     "disjunctive normal form exceeds " + std::to_string(kMaxDisjuncts) + " disjuncts");
            std::vector<Conjunction> next;
            for (const auto& a : acc)
                for (const auto& b : part) {
                    Conjunction merged = a;
                    merged.insert(merged.end(), b.begin(), b.end());
                    next.push_back(std::move(merged));
                }
            acc = std::move(next);
        }
        return acc;
    }

    std::vector<SExpr> exprs_;
    std::map<std::string, VarRef> declared_;
    std::size_t input_dim_ = 0;
    std::size_t output_dim_ = 0;
    Vector lo_;
    Vector hi_;
};

std::string number(double v)
{
    if (v == 0.0)
        v = 0.0;  // drop the sign of negative zero
    char buf[512];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed);
    if (ec != std::errc())
        throw std::runtime_error("cannot format number for SMT-LIB output");
    return std::string(buf, ptr);
}

}  // namespace

Property parse_smtlib(std::string_view text)
{
    return Parser().parse(text);
}

std::string emit_smtlib(const Property& property)
{
    property.check();
    std::ostringstream out;
    out << "; violation condition: the property fails iff some input in the box\n"
        << "; yields outputs satisfying one of the asserted disjuncts\n";
    for (std::size_t i = 0; i < property.input_dim(); ++i)
        out << "(declare-const X_" << i << " Real)\n";
    for (std::size_t j = 0; j < property.num_outputs; ++j)
        out << "(declare-const Y_" << j << " Real)\n";
    for (std::size_t i = 0; i < property.input_dim(); ++i) {
        out << "(assert (>= X_" << i << " " << number(property.input_box.lo[i]) << "))\n";
        out << "(assert (<= X_" << i << " " << number(property.input_box.hi[i]) << "))\n";
    }
    out << "(assert (or";
    for (const auto& conj : property.disjuncts) {
        out << "\n  (and";
        for (const auto& atom : conj) {
            out << " (<= (+";
            for (std::size_t j = 0; j < atom.coeffs.size(); ++j)
                if (atom.coeffs[j] != 0.0)
                    out << " (* " << number(atom.coeffs[j]) << " Y_" << j << ")";
            out << ") " << number(atom.rhs) << ")";
        }
        out << ")";
    }
    out << "))\n";
    return out.str();
}

}  // namespace nnkit
