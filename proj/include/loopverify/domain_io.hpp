#pragma once

// Domain files: JSON documents with formulas written as S-expression strings.
// See docs/domain-format.md for the grammar.

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "loopverify/error.hpp"
#include "loopverify/sexpr.hpp"
#include "loopverify/theory.hpp"

namespace loopverify {

using json = nlohmann::json;

WorldState state_from_json(const json& obj, const Domain& d);

namespace detail {

inline std::optional<Value> parse_integer(std::string_view s)
{
    Value v{};
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (!s.empty() && s.front() == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || first == last) return std::nullopt;
    return v;
}

inline std::optional<double> parse_real(std::string_view s)
{
    try {
        std::size_t used = 0;
        const double v = std::stod(std::string(s), &used);
        if (used != s.size()) return std::nullopt;
        return v;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

inline std::optional<Comparison> comparison_of(std::string_view op)
{
    if (op == "=") return Comparison::Eq;
    if (op == "!=") return Comparison::Ne;
    if (op == "<") return Comparison::Lt;
    if (op == "<=") return Comparison::Le;
    if (op == ">") return Comparison::Gt;
    if (op == ">=") return Comparison::Ge;
    return std::nullopt;
}

inline Comparison flip(Comparison c)
{
    switch (c) {
    case Comparison::Lt: return Comparison::Gt;
    case Comparison::Le: return Comparison::Ge;
    case Comparison::Gt: return Comparison::Lt;
    case Comparison::Ge: return Comparison::Le;
    default: return c;
    }
}

inline const char* comparison_token(Comparison c)
{
    switch (c) {
    case Comparison::Eq: return "=";
    case Comparison::Ne: return "!=";
    case Comparison::Lt: return "<";
    case Comparison::Le: return "<=";
    case Comparison::Gt: return ">";
    case Comparison::Ge: return ">=";
    }
    return "?";
}

class FormulaParser {
public:
    FormulaParser(const Domain& domain, std::string context) : domain_(domain), context_(std::move(context)) {}

    Formula formula(std::string_view text)
    {
        SExpr e;
        try {
            e = parse_sexpr(text);
        } catch (const ParseError& err) {
            throw ParseError(context_ + ": " + err.what(), err.position());
        }
        return formula(e, false);
    }

    Term term(std::string_view text)
    {
        SExpr e;
        try {
            e = parse_sexpr(text);
        } catch (const ParseError& err) {
            throw ParseError(context_ + ": " + err.what(), err.position());
        }
        return term(e);
    }

    Formula formula(const SExpr& e, bool inside_epistemic)
    {
        if (!e.is_list) {
            if (e.atom == "true") return make_true();
            if (e.atom == "false") return node(Connective::False);
            fail(e, "expected a formula, got '" + e.atom + "'");
        }
        const std::string_view head = e.head();
        if (head.empty()) fail(e, "formula must start with an operator");
        const auto arity = e.items.size() - 1;

        if (head == "not") {
            if (arity != 1) fail(e, "'not' takes one argument");
            return connective(Connective::Not, {formula(e.items[1], inside_epistemic)});
        }
        if (head == "and" || head == "or") {
            std::vector<Formula> args;
            for (std::size_t i = 1; i < e.items.size(); ++i) args.push_back(formula(e.items[i], inside_epistemic));
            return connective(head == "and" ? Connective::And : Connective::Or, std::move(args));
        }
        if (head == "implies") {
            if (arity != 2) fail(e, "'implies' takes two arguments");
            return connective(Connective::Implies,
                              {formula(e.items[1], inside_epistemic), formula(e.items[2], inside_epistemic)});
        }
        if (head == "know") {
            if (arity != 1) fail(e, "'know' takes one argument");
            if (inside_epistemic) fail(e, "epistemic atoms cannot be nested");
            return connective(Connective::Know, {formula(e.items[1], true)});
        }
        if (head == "bel") fail(e, "'bel' must be compared against a number, e.g. (> (bel f) 0.8)");
        if (auto cmp = comparison_of(head)) {
            if (arity != 2) fail(e, "comparison takes two arguments");
            const SExpr& a = e.items[1];
            const SExpr& b = e.items[2];
            if (a.head() == "bel" || b.head() == "bel") {
                if (inside_epistemic) fail(e, "epistemic atoms cannot be nested");
                const bool bel_left = a.head() == "bel";
                const SExpr& bel = bel_left ? a : b;
                const SExpr& num = bel_left ? b : a;
                if (bel.items.size() != 2) fail(bel, "'bel' takes one argument");
                auto kappa = num.is_list ? std::nullopt : parse_real(num.atom);
                if (!kappa) fail(num, "belief threshold must be a number");
                if (*kappa < 0.0 || *kappa > 1.0) fail(num, "belief threshold must lie in [0,1]");
                auto f = std::make_shared<FormulaNode>();
                f->op = Connective::Bel;
                f->cmp = bel_left ? *cmp : flip(*cmp);
                f->threshold = *kappa;
                f->args.push_back(formula(bel.items[1], true));
                return f;
            }
            Term lhs = term(a);
            Term rhs = term(b);
            if (lhs->type != rhs->type) fail(e, "comparison between integer and symbolic values");
            if (lhs->type == ValueType::Symbol && *cmp != Comparison::Eq && *cmp != Comparison::Ne)
                fail(e, "symbolic values only support = and !=");
            auto f = std::make_shared<FormulaNode>();
            f->op = Connective::Compare;
            f->cmp = *cmp;
            f->lhs = std::move(lhs);
            f->rhs = std::move(rhs);
            return f;
        }
        fail(e, "unknown formula operator '" + std::string(head) + "'");
    }

    Term term(const SExpr& e)
    {
        auto t = std::make_shared<TermNode>();
        if (!e.is_list) {
            if (auto f = domain_.find_fluent(e.atom)) {
                t->op = TermOp::Fluent;
                t->fluent = *f;
                t->type = domain_.fluents[*f].type;
                return t;
            }
            if (auto v = parse_integer(e.atom)) {
                t->op = TermOp::Constant;
                t->constant = *v;
                return t;
            }
            if (auto s = domain_.find_symbol(e.atom)) {
                t->op = TermOp::Constant;
                t->constant = *s;
                t->type = ValueType::Symbol;
                return t;
            }
            fail(e, "unknown identifier '" + e.atom + "'");
        }
        const std::string_view head = e.head();
        const auto arity = e.items.size() - 1;
        auto integer_args = [&](std::size_t from) {
            for (std::size_t i = from; i < e.items.size(); ++i) {
                t->args.push_back(term(e.items[i]));
                if (t->args.back()->type != ValueType::Integer) fail(e.items[i], "arithmetic on a symbolic value");
            }
        };
        if (head == "+" || head == "*") {
            if (arity < 1) fail(e, "'" + std::string(head) + "' needs arguments");
            t->op = head == "+" ? TermOp::Add : TermOp::Mul;
            integer_args(1);
            return t;
        }
        if (head == "-") {
            if (arity == 1) t->op = TermOp::Neg;
            else if (arity == 2) t->op = TermOp::Sub;
            else fail(e, "'-' takes one or two arguments");
            integer_args(1);
            return t;
        }
        if (head == "min" || head == "max") {
            if (arity != 2) fail(e, "'" + std::string(head) + "' takes two arguments");
            t->op = head == "min" ? TermOp::Min : TermOp::Max;
            integer_args(1);
            return t;
        }
        if (head == "ite") {
            if (arity != 3) fail(e, "'ite' takes a condition and two terms");
            t->op = TermOp::Ite;
            t->condition = formula(e.items[1], true);
            if (!is_objective(t->condition)) fail(e.items[1], "'ite' condition must be objective");
            t->args.push_back(term(e.items[2]));
            t->args.push_back(term(e.items[3]));
            if (t->args[0]->type != t->args[1]->type) fail(e, "'ite' branches have different types");
            t->type = t->args[0]->type;
            return t;
        }
        fail(e, "unknown term operator '" + std::string(head) + "'");
    }

private:
    static Formula node(Connective op)
    {
        auto f = std::make_shared<FormulaNode>();
        f->op = op;
        return f;
    }

    static Formula connective(Connective op, std::vector<Formula> args)
    {
        auto f = std::make_shared<FormulaNode>();
        f->op = op;
        f->args = std::move(args);
        return f;
    }

    [[noreturn]] void fail(const SExpr& e, const std::string& msg) const
    {
        throw SemanticError(context_ + ": " + msg + " (at offset " + std::to_string(e.position) + ")");
    }

    const Domain& domain_;
    std::string context_;
};

inline void print_term(std::ostream& os, const Term& t, const Domain& d);

inline void print_formula(std::ostream& os, const Formula& f, const Domain& d)
{
    auto list = [&](const char* head) {
        os << '(' << head;
        for (const auto& g : f->args) {
            os << ' ';
            print_formula(os, g, d);
        }
        os << ')';
    };
    switch (f->op) {
    case Connective::True: os << "true"; return;
    case Connective::False: os << "false"; return;
    case Connective::Compare:
        os << '(' << comparison_token(f->cmp) << ' ';
        print_term(os, f->lhs, d);
        os << ' ';
        print_term(os, f->rhs, d);
        os << ')';
        return;
    case Connective::Not: list("not"); return;
    case Connective::And: list("and"); return;
    case Connective::Or: list("or"); return;
    case Connective::Implies: list("implies"); return;
    case Connective::Know: list("know"); return;
    case Connective::Bel:
        os << '(' << comparison_token(f->cmp) << " (bel ";
        print_formula(os, f->args[0], d);
        os << ") " << f->threshold << ')';
        return;
    }
}

inline void print_term(std::ostream& os, const Term& t, const Domain& d)
{
    auto list = [&](const char* head) {
        os << '(' << head;
        for (const auto& a : t->args) {
            os << ' ';
            print_term(os, a, d);
        }
        os << ')';
    };
    switch (t->op) {
    case TermOp::Constant:
        if (t->type == ValueType::Symbol) os << d.symbols.at(static_cast<std::size_t>(t->constant));
        else os << t->constant;
        return;
    case TermOp::Fluent: os << d.fluents[t->fluent].name; return;
    case TermOp::Add: list("+"); return;
    case TermOp::Sub:
    case TermOp::Neg: list("-"); return;
    case TermOp::Mul: list("*"); return;
    case TermOp::Min: list("min"); return;
    case TermOp::Max: list("max"); return;
    case TermOp::Ite:
        os << "(ite ";
        print_formula(os, t->condition, d);
        for (const auto& a : t->args) {
            os << ' ';
            print_term(os, a, d);
        }
        os << ')';
        return;
    }
}

inline std::uint64_t state_space_size(const Domain& d, const std::vector<FluentId>& fluents)
{
    std::uint64_t n = 1;
    for (FluentId f : fluents) {
        n *= d.fluents[f].domain.size();
        if (n > (1ULL << 40)) return n;
    }
    return n;
}

/// Calls `fn` on every assignment of the listed fluents (others keep `base` values).
template <typename Fn>
void for_each_assignment(const Domain& d, const std::vector<FluentId>& fluents, WorldState base, Fn&& fn)
{
    std::vector<std::size_t> idx(fluents.size(), 0);
    for (std::size_t i = 0; i < fluents.size(); ++i) base.values[fluents[i]] = d.fluents[fluents[i]].domain[0];
    for (;;) {
        fn(base);
        std::size_t k = 0;
        for (; k < fluents.size(); ++k) {
            const auto& dom = d.fluents[fluents[k]].domain;
            if (++idx[k] < dom.size()) {
                base.values[fluents[k]] = dom[idx[k]];
                break;
            }
            idx[k] = 0;
            base.values[fluents[k]] = dom[0];
        }
        if (k == fluents.size()) return;
    }
}

inline constexpr std::uint64_t kStaticCheckLimit = 1ULL << 20;

class DomainReader {
public:
    Domain read(const json& doc)
    {
        if (!doc.is_object()) throw SemanticError("domain: top level must be a JSON object");
        static const std::set<std::string> known{"fluents", "actions", "outcome_models", "sensing_models",
                                                 "initial", "goal", "name", "comment", "description"};
        for (const auto& [key, _] : doc.items())
            if (!known.count(key)) throw SemanticError("domain: unknown key '" + key + "'");
        read_fluents(require(doc, "fluents", "domain"));
        // actions are declared before formulas are parsed so alternatives can refer forward
        const json& actions = require(doc, "actions", "domain");
        declare_actions(actions);
        if (doc.contains("sensing_models")) read_sensing(doc["sensing_models"]);
        check_sensing_actions();
        read_actions(actions);
        if (doc.contains("outcome_models")) read_outcomes(doc["outcome_models"]);
        d_.index();
        read_initial(require(doc, "initial", "domain"));
        d_.goal = doc.contains("goal") ? FormulaParser(d_, "goal").formula(string_at(doc["goal"], "goal")) : make_true();
        check_actions();
        check_sensing_coverage();
        return std::move(d_);
    }

private:
    static const json& require(const json& obj, const char* key, const std::string& ctx)
    {
        if (!obj.is_object() || !obj.contains(key)) throw SemanticError(ctx + ": missing '" + key + "'");
        return obj.at(key);
    }

    static std::string string_at(const json& j, const std::string& ctx)
    {
        if (!j.is_string()) throw SemanticError(ctx + ": expected a string");
        return j.get<std::string>();
    }

    static double number_at(const json& j, const std::string& ctx)
    {
        if (!j.is_number()) throw SemanticError(ctx + ": expected a number");
        return j.get<double>();
    }

    Value intern(const std::string& s)
    {
        if (auto v = d_.find_symbol(s)) return *v;
        d_.symbols.push_back(s);
        return static_cast<Value>(d_.symbols.size() - 1);
    }

    ObservationId observation(const std::string& token)
    {
        if (auto o = d_.find_observation(token)) return *o;
        d_.observations.push_back(token);
        return d_.observations.size() - 1;
    }

    void read_fluents(const json& arr)
    {
        if (!arr.is_array() || arr.empty()) throw SemanticError("fluents: expected a nonempty array");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string ctx = "fluents[" + std::to_string(i) + "]";
            FluentDecl f;
            f.name = string_at(require(arr[i], "name", ctx), ctx + ".name");
            if (d_.find_fluent(f.name)) throw SemanticError(ctx + ": duplicate fluent '" + f.name + "'");
            const json& dom = require(arr[i], "domain", ctx);
            if (dom.is_object() && dom.contains("range")) {
                const json& r = dom["range"];
                if (!r.is_array() || r.size() != 2 || !r[0].is_number_integer() || !r[1].is_number_integer())
                    throw SemanticError(ctx + ".domain.range: expected [lo, hi]");
                for (Value v = r[0].get<Value>(); v <= r[1].get<Value>(); ++v) f.domain.push_back(v);
            } else if (dom.is_array()) {
                bool any_symbol = false, any_int = false;
                for (const auto& v : dom) {
                    if (v.is_number_integer()) {
                        any_int = true;
                        f.domain.push_back(v.get<Value>());
                    } else if (v.is_string()) {
                        any_symbol = true;
                        f.domain.push_back(intern(v.get<std::string>()));
                    } else {
                        throw SemanticError(ctx + ".domain: values must be integers or strings");
                    }
                }
                if (any_int && any_symbol) throw SemanticError(ctx + ".domain: mixes integers and symbols");
                if (any_symbol) f.type = ValueType::Symbol;
            } else {
                throw SemanticError(ctx + ".domain: expected an array or {\"range\": [lo, hi]}");
            }
            if (f.domain.empty()) throw SemanticError(ctx + ": empty domain for '" + f.name + "'");
            std::set<Value> distinct(f.domain.begin(), f.domain.end());
            if (distinct.size() != f.domain.size()) throw SemanticError(ctx + ": repeated value in domain of '" + f.name + "'");
            d_.fluents.push_back(std::move(f));
        }
    }

    void declare_actions(const json& arr)
    {
        if (!arr.is_array() || arr.empty()) throw SemanticError("actions: expected a nonempty array");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string ctx = "actions[" + std::to_string(i) + "]";
            GroundAction a;
            a.name = string_at(require(arr[i], "name", ctx), ctx + ".name");
            if (a.name.empty()) throw SemanticError(ctx + ": empty action name");
            if (d_.find_action(a.name)) throw SemanticError(ctx + ": duplicate action '" + a.name + "'");
            const std::string kind = arr[i].contains("kind") ? string_at(arr[i]["kind"], ctx + ".kind") : "physical";
            if (kind == "physical") a.kind = ActionKind::Physical;
            else if (kind == "sensing") a.kind = ActionKind::Sensing;
            else throw SemanticError(ctx + ".kind: expected 'physical' or 'sensing'");
            if (arr[i].contains("advisable")) a.advisable = arr[i]["advisable"].get<bool>();
            d_.actions.push_back(std::move(a));
        }
    }

    void read_actions(const json& arr)
    {
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string ctx = "actions[" + std::to_string(i) + "]";
            GroundAction& a = d_.actions[i];
            a.precondition = arr[i].contains("precondition")
                                 ? FormulaParser(d_, ctx + ".precondition").formula(string_at(arr[i]["precondition"], ctx))
                                 : make_true();
            if (!is_objective(a.precondition)) throw SemanticError(ctx + ".precondition: must be objective");
            if (!arr[i].contains("effects")) continue;
            const json& effs = arr[i]["effects"];
            if (!effs.is_array()) throw SemanticError(ctx + ".effects: expected an array");
            if (a.kind == ActionKind::Sensing && !effs.empty())
                throw SemanticError(ctx + ": sensing action '" + a.name + "' cannot have physical effects");
            for (std::size_t k = 0; k < effs.size(); ++k) {
                const std::string ectx = ctx + ".effects[" + std::to_string(k) + "]";
                Effect eff;
                const std::string fname = string_at(require(effs[k], "fluent", ectx), ectx + ".fluent");
                auto f = d_.find_fluent(fname);
                if (!f) throw SemanticError(ectx + ": unknown fluent '" + fname + "'");
                eff.fluent = *f;
                for (const auto& other : a.effects)
                    if (other.fluent == eff.fluent)
                        throw SemanticError(ectx + ": fluent '" + fname + "' assigned twice by '" + a.name + "'");
                const json& val = require(effs[k], "value", ectx);
                FormulaParser p(d_, ectx + ".value");
                if (val.is_number_integer()) eff.value = p.term(std::to_string(val.get<Value>()));
                else eff.value = p.term(string_at(val, ectx + ".value"));
                if (eff.value->type != d_.fluents[eff.fluent].type)
                    throw SemanticError(ectx + ": value type does not match fluent '" + fname + "'");
                if (effs[k].contains("clamp")) eff.clamp = effs[k]["clamp"].get<bool>();
                if (eff.clamp && d_.fluents[eff.fluent].type != ValueType::Integer)
                    throw SemanticError(ectx + ": clamp only applies to integer fluents");
                a.effects.push_back(std::move(eff));
            }
        }
    }

    ActionId action_ref(const json& j, const std::string& ctx)
    {
        const std::string name = string_at(j, ctx);
        auto a = d_.find_action(name);
        if (!a) throw SemanticError(ctx + ": unknown action '" + name + "'");
        return *a;
    }

    Likelihood likelihood_at(const json& j, const std::string& ctx)
    {
        Likelihood l;
        if (j.is_number()) {
            l.otherwise = j.get<double>();
        } else if (j.is_object()) {
            if (j.contains("cases")) {
                for (std::size_t i = 0; i < j["cases"].size(); ++i) {
                    const json& c = j["cases"][i];
                    const std::string cctx = ctx + ".cases[" + std::to_string(i) + "]";
                    if (!c.is_array() || c.size() != 2) throw SemanticError(cctx + ": expected [formula, likelihood]");
                    Formula when = FormulaParser(d_, cctx).formula(string_at(c[0], cctx));
                    if (!is_objective(when)) throw SemanticError(cctx + ": condition must be objective");
                    l.cases.emplace_back(std::move(when), number_at(c[1], cctx));
                }
            }
            l.otherwise = j.contains("otherwise") ? number_at(j["otherwise"], ctx + ".otherwise") : 0.0;
        } else {
            throw SemanticError(ctx + ": expected a number or {\"cases\": ..., \"otherwise\": ...}");
        }
        auto negative = [](double v) { return !(v >= 0.0) || !std::isfinite(v); };
        if (negative(l.otherwise)) throw SemanticError(ctx + ": likelihoods must be finite and nonnegative");
        for (const auto& [_, v] : l.cases)
            if (negative(v)) throw SemanticError(ctx + ": likelihoods must be finite and nonnegative");
        return l;
    }

    void read_outcomes(const json& arr)
    {
        if (!arr.is_array()) throw SemanticError("outcome_models: expected an array");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string ctx = "outcome_models[" + std::to_string(i) + "]";
            OutcomeModel m;
            m.intended = action_ref(require(arr[i], "intended", ctx), ctx + ".intended");
            if (d_.actions[m.intended].kind != ActionKind::Physical)
                throw SemanticError(ctx + ": intended action '" + d_.actions[m.intended].name + "' must be physical");
            if (std::any_of(d_.outcome_models.begin(), d_.outcome_models.end(),
                            [&](const OutcomeModel& o) { return o.intended == m.intended; }))
                throw SemanticError(ctx + ": second outcome model for '" + d_.actions[m.intended].name + "'");
            const json& outs = require(arr[i], "outcomes", ctx);
            if (!outs.is_array() || outs.empty()) throw SemanticError(ctx + ".outcomes: expected a nonempty array");
            std::optional<GaussianSpec> gauss;
            double gauss_mean = 0.0;
            if (arr[i].contains("gaussian")) {
                const json& g = arr[i]["gaussian"];
                gauss_mean = number_at(require(g, "mean", ctx + ".gaussian"), ctx + ".gaussian.mean");
                gauss = GaussianSpec{0, number_at(require(g, "variance", ctx + ".gaussian"), ctx + ".gaussian.variance")};
                if (!(gauss->variance > 0.0)) throw SemanticError(ctx + ".gaussian: variance must be > 0");
            }
            for (std::size_t k = 0; k < outs.size(); ++k) {
                const std::string octx = ctx + ".outcomes[" + std::to_string(k) + "]";
                Alternative alt;
                alt.action = action_ref(require(outs[k], "action", octx), octx + ".action");
                if (d_.actions[alt.action].kind != ActionKind::Physical)
                    throw SemanticError(octx + ": alternative '" + d_.actions[alt.action].name + "' must be physical");
                for (const auto& other : m.outcomes)
                    if (other.action == alt.action) throw SemanticError(octx + ": repeated alternative");
                if (gauss) {
                    if (outs[k].contains("likelihood"))
                        throw SemanticError(octx + ": give either a gaussian model or explicit likelihoods");
                    const double y = number_at(require(outs[k], "value", octx), octx + ".value");
                    alt.likelihood.otherwise = gaussian_density(y, gauss_mean, gauss->variance);
                } else {
                    alt.likelihood = likelihood_at(require(outs[k], "likelihood", octx), octx + ".likelihood");
                }
                m.outcomes.push_back(std::move(alt));
            }
            const bool constant = std::none_of(m.outcomes.begin(), m.outcomes.end(),
                                               [](const Alternative& a) { return a.likelihood.state_dependent(); });
            if (constant) {
                double sum = 0.0;
                for (const auto& alt : m.outcomes) sum += alt.likelihood.otherwise;
                if (!(sum > 0.0)) throw SemanticError(ctx + ": all likelihoods are zero");
                for (auto& alt : m.outcomes) alt.likelihood.otherwise /= sum;
                m.scale = sum;
            }
            d_.outcome_models.push_back(std::move(m));
            d_.index();
        }
    }

    void read_sensing(const json& arr)
    {
        if (!arr.is_array()) throw SemanticError("sensing_models: expected an array");
        d_.index();
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string ctx = "sensing_models[" + std::to_string(i) + "]";
            SensingModel m;
            m.action = action_ref(require(arr[i], "action", ctx), ctx + ".action");
            for (const auto& other : d_.sensing_models)
                if (other.action == m.action)
                    throw SemanticError(ctx + ": second sensing model for '" + d_.actions[m.action].name + "'");
            if (arr[i].contains("readings")) {
                const json& rs = arr[i]["readings"];
                for (std::size_t k = 0; k < rs.size(); ++k) {
                    const std::string rctx = ctx + ".readings[" + std::to_string(k) + "]";
                    ReadingDecl r;
                    r.token = string_at(require(rs[k], "token", rctx), rctx + ".token");
                    if (r.token.empty()) throw SemanticError(rctx + ": empty reading token");
                    for (const auto& other : m.readings)
                        if (other.token == r.token) throw SemanticError(rctx + ": repeated reading '" + r.token + "'");
                    if (rs[k].contains("value")) r.value = number_at(rs[k]["value"], rctx + ".value");
                    r.observation = observation(rs[k].contains("observation")
                                                    ? string_at(rs[k]["observation"], rctx + ".observation")
                                                    : r.token);
                    m.readings.push_back(std::move(r));
                }
            }
            if (arr[i].contains("gaussian")) {
                const json& g = arr[i]["gaussian"];
                const std::string fname = string_at(require(g, "mean_fluent", ctx + ".gaussian"), ctx + ".gaussian.mean_fluent");
                auto f = d_.find_fluent(fname);
                if (!f) throw SemanticError(ctx + ".gaussian: unknown fluent '" + fname + "'");
                if (d_.fluents[*f].type != ValueType::Integer)
                    throw SemanticError(ctx + ".gaussian: mean fluent must be integer-valued");
                GaussianSpec spec{*f, number_at(require(g, "variance", ctx + ".gaussian"), ctx + ".gaussian.variance")};
                if (!(spec.variance > 0.0)) throw SemanticError(ctx + ".gaussian: variance must be > 0");
                for (const auto& r : m.readings)
                    if (!r.value) throw SemanticError(ctx + ": gaussian readings need a numeric 'value'");
                m.gaussian = spec;
            } else {
                if (m.readings.empty()) throw SemanticError(ctx + ": table sensing model needs readings");
                const json& table = require(arr[i], "table", ctx);
                for (std::size_t k = 0; k < table.size(); ++k) {
                    const std::string tctx = ctx + ".table[" + std::to_string(k) + "]";
                    TableRow row;
                    row.when = table[k].contains("when")
                                   ? FormulaParser(d_, tctx + ".when").formula(string_at(table[k]["when"], tctx))
                                   : make_true();
                    if (!is_objective(row.when)) throw SemanticError(tctx + ".when: must be objective");
                    row.likelihood.assign(m.readings.size(), 0.0);
                    for (const auto& [token, v] : require(table[k], "likelihoods", tctx).items()) {
                        auto it = std::find_if(m.readings.begin(), m.readings.end(),
                                               [&](const ReadingDecl& r) { return r.token == token; });
                        if (it == m.readings.end()) throw SemanticError(tctx + ": unknown reading '" + token + "'");
                        const double l = number_at(v, tctx + ".likelihoods." + token);
                        if (!(l >= 0.0) || !std::isfinite(l)) throw SemanticError(tctx + ": likelihoods must be nonnegative");
                        row.likelihood[static_cast<std::size_t>(it - m.readings.begin())] = l;
                    }
                    m.table.push_back(std::move(row));
                }
            }
            d_.sensing_models.push_back(std::move(m));
        }
    }

    void check_sensing_actions() const
    {
        for (std::size_t i = 0; i < d_.actions.size(); ++i) {
            const bool has_model = std::any_of(d_.sensing_models.begin(), d_.sensing_models.end(),
                                               [&](const SensingModel& m) { return m.action == i; });
            if (d_.actions[i].kind == ActionKind::Sensing && !has_model)
                throw SemanticError("sensing action '" + d_.actions[i].name + "' has no sensing model");
        }
    }

    WorldState read_state(const json& obj, const std::string& ctx)
    {
        try {
            return state_from_json(obj, d_);
        } catch (const SemanticError& e) {
            throw SemanticError(ctx + ": " + e.what());
        }
    }

    void read_initial(const json& arr)
    {
        if (!arr.is_array() || arr.empty()) throw SemanticError("initial: expected a nonempty array");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string ctx = "initial[" + std::to_string(i) + "]";
            InitialWorld iw;
            iw.state = read_state(require(arr[i], "state", ctx), ctx + ".state");
            iw.weight = arr[i].contains("weight") ? number_at(arr[i]["weight"], ctx + ".weight") : 1.0;
            if (!(iw.weight >= 0.0) || !std::isfinite(iw.weight)) throw SemanticError(ctx + ": weight must be nonnegative");
            for (const auto& other : d_.initial_worlds)
                if (other.state == iw.state) throw SemanticError(ctx + ": repeated initial world");
            d_.initial_worlds.push_back(std::move(iw));
        }
        if (!(d_.total_initial_weight() > 0.0)) throw SemanticError("initial: total prior weight is zero");
    }

    // Effects that can leave the fluent's domain must opt in to clamping.
    void check_actions()
    {
        for (ActionId a = 0; a < d_.actions.size(); ++a) {
            const GroundAction& act = d_.actions[a];
            for (const auto& eff : act.effects) {
                if (eff.clamp) continue;
                std::vector<FluentId> mentioned;
                collect_fluents(act.precondition, mentioned);
                collect_fluents(eff.value, mentioned);
                if (state_space_size(d_, mentioned) > kStaticCheckLimit) continue;
                WorldState base{std::vector<Value>(d_.fluents.size(), 0)};
                for (FluentId f = 0; f < d_.fluents.size(); ++f) base.values[f] = d_.fluents[f].domain[0];
                for_each_assignment(d_, mentioned, base, [&](const WorldState& w) {
                    if (!eval_objective(act.precondition, w)) return;
                    const Value v = eval_term(eff.value, w);
                    if (!d_.fluents[eff.fluent].contains(v))
                        throw SemanticError("action '" + act.name + "' can set '" + d_.fluents[eff.fluent].name +
                                            "' to " + std::to_string(v) +
                                            ", outside its domain; guard the precondition or set \"clamp\": true");
                });
            }
        }
    }

    void check_sensing_coverage()
    {
        std::vector<FluentId> all(d_.fluents.size());
        for (FluentId f = 0; f < all.size(); ++f) all[f] = f;
        if (state_space_size(d_, all) > kStaticCheckLimit) return;
        for (const auto& m : d_.sensing_models) {
            if (m.gaussian) continue;
            WorldState base{std::vector<Value>(d_.fluents.size(), 0)};
            for_each_assignment(d_, all, base, [&](const WorldState& w) {
                for (std::size_t r = 0; r < m.readings.size(); ++r)
                    if (d_.reading_likelihood(m, r, w) > 0.0) return;
                throw SemanticError("sensing model of '" + d_.actions[m.action].name +
                                    "' gives every reading likelihood 0 in some state");
            });
        }
    }

    Domain d_;
};

} // namespace detail

inline Formula parse_formula(std::string_view text, const Domain& d, const std::string& context = "formula")
{
    return detail::FormulaParser(d, context).formula(text);
}

inline std::string to_string(const Formula& f, const Domain& d)
{
    std::ostringstream os;
    detail::print_formula(os, f, d);
    return os.str();
}

inline Domain parse_domain(std::string_view text)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("domain: invalid JSON: ") + e.what(), e.byte);
    }
    try {
        return detail::DomainReader().read(doc);
    } catch (const json::exception& e) {
        throw SemanticError(std::string("domain: ") + e.what());
    }
}

inline std::string read_text_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline Domain load_domain(const std::string& path)
{
    return parse_domain(read_text_file(path));
}

inline json state_to_json(const WorldState& w, const Domain& d)
{
    json out = json::object();
    for (FluentId f = 0; f < d.fluents.size(); ++f) {
        if (d.fluents[f].type == ValueType::Symbol) out[d.fluents[f].name] = d.value_name(f, w[f]);
        else out[d.fluents[f].name] = w[f];
    }
    return out;
}

/// Parses a total world-state assignment such as {"d": 3, "kind": "wood"}.
inline WorldState state_from_json(const json& obj, const Domain& d)
{
    if (!obj.is_object()) throw SemanticError("world state: expected an object");
    WorldState w{std::vector<Value>(d.fluents.size(), 0)};
    std::vector<bool> seen(d.fluents.size(), false);
    for (const auto& [name, v] : obj.items()) {
        auto f = d.find_fluent(name);
        if (!f) throw SemanticError("world state: unknown fluent '" + name + "'");
        Value val = 0;
        if (d.fluents[*f].type == ValueType::Symbol) {
            auto s = v.is_string() ? d.find_symbol(v.get<std::string>()) : std::nullopt;
            if (!s) throw SemanticError("world state: bad symbol for '" + name + "'");
            val = *s;
        } else {
            if (!v.is_number_integer()) throw SemanticError("world state: '" + name + "' needs an integer");
            val = v.get<Value>();
        }
        if (!d.fluents[*f].contains(val)) throw SemanticError("world state: '" + name + "' outside its domain");
        w.values[*f] = val;
        seen[*f] = true;
    }
    for (FluentId f = 0; f < seen.size(); ++f)
        if (!seen[f]) throw SemanticError("world state: fluent '" + d.fluents[f].name + "' is not assigned");
    return w;
}

inline std::string state_to_string(const WorldState& w, const Domain& d)
{
    std::string s = "{";
    for (FluentId f = 0; f < d.fluents.size(); ++f) {
        if (f) s += ", ";
        s += d.fluents[f].name + ": " + d.value_name(f, w[f]);
    }
    return s + "}";
}

} // namespace loopverify
