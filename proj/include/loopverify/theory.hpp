#pragma once

// Grounded finite-domain action theories: fluents, actions, noise models,
// priors and goals, plus evaluation of formulas and transitions over world
// states. Situations are collapsed to WorldStates: every precondition, effect
// and likelihood depends only on current fluent values.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "loopverify/error.hpp"

namespace loopverify {

using Value = std::int64_t;
using FluentId = std::size_t;
using ActionId = std::size_t;
using ObservationId = std::size_t;

/// Observation returned by actions without a sensing model.
inline constexpr ObservationId kNullObservation = 0;
inline constexpr std::string_view kNullToken = "0";

enum class ValueType { Integer, Symbol, Boolean };

struct FluentDecl {
    std::string name;
    ValueType type = ValueType::Integer;
    std::vector<Value> domain; // symbol ids for symbolic fluents

    bool contains(Value v) const { return std::find(domain.begin(), domain.end(), v) != domain.end(); }
};

/// Total assignment of values to fluents, indexed by FluentId.
struct WorldState {
    std::vector<Value> values;

    Value operator[](FluentId f) const { return values[f]; }
    friend bool operator==(const WorldState&, const WorldState&) = default;
    friend auto operator<=>(const WorldState&, const WorldState&) = default;
};

struct WorldStateHash {
    std::size_t operator()(const WorldState& w) const noexcept
    {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (Value v : w.values) {
            h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        }
        return static_cast<std::size_t>(h);
    }
};

// ---------------------------------------------------------------------------
// Terms and formulas

struct TermNode;
struct FormulaNode;
using Term = std::shared_ptr<const TermNode>;
using Formula = std::shared_ptr<const FormulaNode>;

enum class TermOp { Constant, Fluent, Add, Sub, Neg, Mul, Min, Max, Ite };

struct TermNode {
    TermOp op = TermOp::Constant;
    ValueType type = ValueType::Integer;
    Value constant = 0;
    FluentId fluent = 0;
    std::vector<Term> args;
    Formula condition; // Ite only
};

enum class Connective { True, False, Compare, Not, And, Or, Implies, Bel, Know };
enum class Comparison { Eq, Ne, Lt, Le, Gt, Ge };

struct FormulaNode {
    Connective op = Connective::True;
    Comparison cmp = Comparison::Eq; // Compare and Bel
    Term lhs, rhs;                   // Compare
    std::vector<Formula> args;       // connectives; Bel/Know hold their objective body in args[0]
    double threshold = 0.0;          // Bel
};

inline Formula make_true()
{
    static const Formula t = std::make_shared<FormulaNode>(FormulaNode{Connective::True, {}, {}, {}, {}, 0.0});
    return t;
}

template <typename T>
bool compare_values(Comparison c, T a, T b)
{
    switch (c) {
    case Comparison::Eq: return a == b;
    case Comparison::Ne: return a != b;
    case Comparison::Lt: return a < b;
    case Comparison::Le: return a <= b;
    case Comparison::Gt: return a > b;
    case Comparison::Ge: return a >= b;
    }
    return false;
}

inline bool is_objective(const Formula& f)
{
    if (f->op == Connective::Bel || f->op == Connective::Know) return false;
    return std::all_of(f->args.begin(), f->args.end(), [](const Formula& g) { return is_objective(g); });
}

bool eval_objective(const Formula& f, const WorldState& w);

inline Value eval_term(const Term& t, const WorldState& w)
{
    switch (t->op) {
    case TermOp::Constant: return t->constant;
    case TermOp::Fluent: return w[t->fluent];
    case TermOp::Add: {
        Value acc = 0;
        for (const auto& a : t->args) acc += eval_term(a, w);
        return acc;
    }
    case TermOp::Sub: return eval_term(t->args[0], w) - eval_term(t->args[1], w);
    case TermOp::Neg: return -eval_term(t->args[0], w);
    case TermOp::Mul: {
        Value acc = 1;
        for (const auto& a : t->args) acc *= eval_term(a, w);
        return acc;
    }
    case TermOp::Min: return std::min(eval_term(t->args[0], w), eval_term(t->args[1], w));
    case TermOp::Max: return std::max(eval_term(t->args[0], w), eval_term(t->args[1], w));
    case TermOp::Ite: return eval_objective(t->condition, w) ? eval_term(t->args[0], w) : eval_term(t->args[1], w);
    }
    return 0;
}

/// Truth of an objective formula at a world. Epistemic atoms are a caller bug here.
inline bool eval_objective(const Formula& f, const WorldState& w)
{
    switch (f->op) {
    case Connective::True: return true;
    case Connective::False: return false;
    case Connective::Compare: return compare_values(f->cmp, eval_term(f->lhs, w), eval_term(f->rhs, w));
    case Connective::Not: return !eval_objective(f->args[0], w);
    case Connective::And:
        return std::all_of(f->args.begin(), f->args.end(), [&](const Formula& g) { return eval_objective(g, w); });
    case Connective::Or:
        return std::any_of(f->args.begin(), f->args.end(), [&](const Formula& g) { return eval_objective(g, w); });
    case Connective::Implies: return !eval_objective(f->args[0], w) || eval_objective(f->args[1], w);
    case Connective::Bel:
    case Connective::Know: throw std::logic_error("eval_objective: epistemic atom in objective context");
    }
    return false;
}

/// Collects fluents mentioned by a term or formula (used for static domain checks).
inline void collect_fluents(const Term& t, std::vector<FluentId>& out);

inline void collect_fluents(const Formula& f, std::vector<FluentId>& out)
{
    if (f->lhs) collect_fluents(f->lhs, out);
    if (f->rhs) collect_fluents(f->rhs, out);
    for (const auto& g : f->args) collect_fluents(g, out);
}

inline void collect_fluents(const Term& t, std::vector<FluentId>& out)
{
    if (t->op == TermOp::Fluent && std::find(out.begin(), out.end(), t->fluent) == out.end()) out.push_back(t->fluent);
    for (const auto& a : t->args) collect_fluents(a, out);
    if (t->condition) collect_fluents(t->condition, out);
}

/// N(z; mean, variance), a density rather than a probability.
inline double gaussian_density(double z, double mean, double variance)
{
    const double diff = z - mean;
    return std::exp(-diff * diff / (2.0 * variance)) / std::sqrt(2.0 * std::numbers::pi * variance);
}

// ---------------------------------------------------------------------------
// Actions and noise models

enum class ActionKind { Physical, Sensing };

struct Effect {
    FluentId fluent = 0;
    Term value;
    bool clamp = false;
};

struct GroundAction {
    std::string name;
    ActionKind kind = ActionKind::Physical;
    Formula precondition;
    std::vector<Effect> effects;
    bool advisable = true; // false for nature-only alternatives such as a failed chop
};

/// Likelihood of one alternative: first matching case wins, else `otherwise`.
struct Likelihood {
    std::vector<std::pair<Formula, double>> cases;
    double otherwise = 0.0;

    bool state_dependent() const { return !cases.empty(); }
    double at(const WorldState& w) const
    {
        for (const auto& [when, value] : cases)
            if (eval_objective(when, w)) return value;
        return otherwise;
    }
};

struct Alternative {
    ActionId action = 0;
    Likelihood likelihood;
};

struct OutcomeModel {
    ActionId intended = 0;
    std::vector<Alternative> outcomes;
    double scale = 1.0; // sum of the constant likelihoods as written in the file

    bool trivial() const { return outcomes.size() == 1 && outcomes.front().action == intended; }
};

struct ReadingDecl {
    std::string token;
    std::optional<double> value;
    ObservationId observation = kNullObservation;
};

struct GaussianSpec {
    FluentId mean_fluent = 0;
    double variance = 1.0;
};

struct TableRow {
    Formula when;
    std::vector<double> likelihood; // one entry per declared reading
};

struct SensingModel {
    ActionId action = 0;
    std::vector<ReadingDecl> readings;
    std::optional<GaussianSpec> gaussian;
    std::vector<TableRow> table;

    bool quantized() const { return !readings.empty(); }
};

/// A sensor reading: a declared token, a raw value for density models, or both.
struct Reading {
    std::string token;
    std::optional<double> value;

    static Reading null() { return Reading{std::string(kNullToken), std::nullopt}; }
    friend bool operator==(const Reading&, const Reading&) = default;
};

struct Outcome {
    ActionId action = 0;
    double likelihood = 0.0;
};

struct InitialWorld {
    WorldState state;
    double weight = 0.0;
};

// ---------------------------------------------------------------------------
// Domain

class Domain {
public:
    std::vector<FluentDecl> fluents;
    std::vector<std::string> symbols;
    std::vector<GroundAction> actions;
    std::vector<OutcomeModel> outcome_models;
    std::vector<SensingModel> sensing_models;
    std::vector<std::string> observations{std::string(kNullToken)};
    std::vector<InitialWorld> initial_worlds;
    Formula goal = make_true();

    /// Rebuilds lookup indices. Must be called after the public fields change.
    void index()
    {
        outcome_model_of_.assign(actions.size(), std::nullopt);
        sensing_model_of_.assign(actions.size(), std::nullopt);
        for (std::size_t i = 0; i < outcome_models.size(); ++i) outcome_model_of_[outcome_models[i].intended] = i;
        for (std::size_t i = 0; i < sensing_models.size(); ++i) sensing_model_of_[sensing_models[i].action] = i;
    }

    std::optional<FluentId> find_fluent(std::string_view name) const { return find_named(fluents, name); }
    std::optional<ActionId> find_action(std::string_view name) const { return find_named(actions, name); }

    std::optional<ObservationId> find_observation(std::string_view token) const
    {
        for (std::size_t i = 0; i < observations.size(); ++i)
            if (observations[i] == token) return i;
        return std::nullopt;
    }

    std::optional<Value> find_symbol(std::string_view s) const
    {
        for (std::size_t i = 0; i < symbols.size(); ++i)
            if (symbols[i] == s) return static_cast<Value>(i);
        return std::nullopt;
    }

    const OutcomeModel* outcome_model(ActionId a) const
    {
        return outcome_model_of_.at(a) ? &outcome_models[*outcome_model_of_[a]] : nullptr;
    }

    const SensingModel* sensing_model(ActionId a) const
    {
        return sensing_model_of_.at(a) ? &sensing_models[*sensing_model_of_[a]] : nullptr;
    }

    std::string value_name(FluentId f, Value v) const
    {
        return fluents[f].type == ValueType::Symbol ? symbols.at(static_cast<std::size_t>(v)) : std::to_string(v);
    }

    double total_initial_weight() const
    {
        double total = 0.0;
        for (const auto& iw : initial_worlds) total += iw.weight;
        return total;
    }

    /// Every outcome model is the trivial alt axiom (an action is only alt-related to itself).
    bool noise_free_acting() const
    {
        return std::all_of(outcome_models.begin(), outcome_models.end(), [](const OutcomeModel& m) { return m.trivial(); });
    }

    /// Every sensing model yields one observation per state (checked row by row).
    bool sensing_deterministic() const
    {
        for (const auto& m : sensing_models) {
            if (m.gaussian) return false;
            for (const auto& row : m.table) {
                std::optional<ObservationId> seen;
                for (std::size_t r = 0; r < m.readings.size(); ++r) {
                    if (row.likelihood[r] <= 0.0) continue;
                    if (seen && *seen != m.readings[r].observation) return false;
                    seen = m.readings[r].observation;
                }
            }
        }
        return true;
    }

    bool poss(ActionId a, const WorldState& w) const { return eval_objective(actions[a].precondition, w); }

    /// Simultaneous effect application; unaffected fluents keep their value.
    WorldState apply(ActionId a, const WorldState& w) const
    {
        const GroundAction& act = actions[a];
        if (!poss(a, w)) throw std::logic_error("apply: precondition of '" + act.name + "' violated");
        WorldState next = w;
        for (const auto& eff : act.effects) next.values[eff.fluent] = settle(eff, eval_term(eff.value, w), act);
        return next;
    }

    /// Alt-related actions of `a` executable at `w`, with their likelihoods at `w`.
    std::vector<Outcome> outcomes_of(ActionId a, const WorldState& w) const
    {
        std::vector<Outcome> out;
        const OutcomeModel* model = outcome_model(a);
        if (!model) {
            if (poss(a, w)) out.push_back({a, 1.0});
            return out;
        }
        double norm = 1.0;
        if (std::any_of(model->outcomes.begin(), model->outcomes.end(),
                        [](const Alternative& alt) { return alt.likelihood.state_dependent(); })) {
            norm = 0.0;
            for (const auto& alt : model->outcomes) norm += alt.likelihood.at(w);
            if (norm <= 0.0) return out;
        }
        for (const auto& alt : model->outcomes) {
            const double l = alt.likelihood.at(w) / norm;
            if (l > 0.0 && poss(alt.action, w)) out.push_back({alt.action, l});
        }
        return out;
    }

    /// Likelihood of declared reading `r` of the sensing model attached to `a`, at `w`.
    double reading_likelihood(const SensingModel& m, std::size_t r, const WorldState& w) const
    {
        if (m.gaussian) return gaussian_density(*m.readings[r].value, static_cast<double>(w[m.gaussian->mean_fluent]),
                                                m.gaussian->variance);
        for (const auto& row : m.table)
            if (eval_objective(row.when, w)) return row.likelihood[r];
        return 0.0;
    }

    /// Likelihood of an arbitrary reading for the action `a` at `w`. Actions without a
    /// sensing model produce the null reading with certainty.
    double likelihood(ActionId a, const Reading& reading, const WorldState& w) const
    {
        const SensingModel* m = sensing_model(a);
        if (!m) return reading.token == kNullToken && !reading.value ? 1.0 : 0.0;
        if (auto r = declared_reading(*m, reading.token)) {
            if (m->gaussian && reading.value)
                return gaussian_density(*reading.value, static_cast<double>(w[m->gaussian->mean_fluent]), m->gaussian->variance);
            return reading_likelihood(*m, *r, w);
        }
        if (m->gaussian && reading.value && reading.token.empty())
            return gaussian_density(*reading.value, static_cast<double>(w[m->gaussian->mean_fluent]), m->gaussian->variance);
        throw SemanticError("reading '" + describe(reading) + "' is not declared for '" + actions[a].name + "'");
    }

    /// Observation token produced by `reading` for action `a`. Raw density values map to the
    /// nearest declared reading.
    ObservationId observation_of(ActionId a, const Reading& reading) const
    {
        const SensingModel* m = sensing_model(a);
        if (!m) {
            if (reading.token == kNullToken && !reading.value) return kNullObservation;
            throw SemanticError("action '" + actions[a].name + "' has no sensing model; only the null reading applies");
        }
        if (auto r = declared_reading(*m, reading.token)) return m->readings[*r].observation;
        if (m->gaussian && reading.value && reading.token.empty()) {
            if (!m->quantized())
                throw SemanticError("sensing model of '" + actions[a].name + "' declares no readings to map values onto");
            return m->readings[nearest_reading(*m, *reading.value)].observation;
        }
        throw SemanticError("reading '" + describe(reading) + "' is not declared for '" + actions[a].name + "'");
    }

    std::size_t nearest_reading(const SensingModel& m, double z) const
    {
        std::size_t best = 0;
        double best_dist = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < m.readings.size(); ++r) {
            const double dist = std::abs(*m.readings[r].value - z);
            if (dist < best_dist) {
                best = r;
                best_dist = dist;
            }
        }
        return best;
    }

    /// SF(a, w) for exact sensing, evaluated in the pre-state.
    ObservationId exact_observation(ActionId a, const WorldState& w) const
    {
        const SensingModel* m = sensing_model(a);
        if (!m) return kNullObservation;
        if (m->gaussian)
            throw UnsupportedModel("sensing model of '" + actions[a].name +
                                   "' is noisy; use the epistemic (belief-based) semantics");
        std::optional<ObservationId> obs;
        for (std::size_t r = 0; r < m->readings.size(); ++r) {
            if (reading_likelihood(*m, r, w) <= 0.0) continue;
            if (obs && *obs != m->readings[r].observation)
                throw UnsupportedModel("sensing model of '" + actions[a].name +
                                       "' is not deterministic; use the epistemic (belief-based) semantics");
            obs = m->readings[r].observation;
        }
        if (!obs) throw SemanticError("no reading of '" + actions[a].name + "' has positive likelihood");
        return *obs;
    }

    /// Observations action `a` (or any of its alternatives) can produce, ascending by id.
    std::vector<ObservationId> relevant_observations(ActionId a) const
    {
        std::vector<ObservationId> out;
        auto add_for = [&](ActionId b) {
            const SensingModel* m = sensing_model(b);
            if (!m) {
                out.push_back(kNullObservation);
                return;
            }
            for (const auto& r : m->readings) out.push_back(r.observation);
        };
        if (const OutcomeModel* model = outcome_model(a)) {
            for (const auto& alt : model->outcomes) add_for(alt.action);
        } else {
            add_for(a);
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    std::vector<ActionId> advisable_actions() const
    {
        std::vector<ActionId> out;
        for (ActionId a = 0; a < actions.size(); ++a)
            if (actions[a].advisable) out.push_back(a);
        return out;
    }

    static std::string describe(const Reading& r)
    {
        if (!r.token.empty()) return r.token;
        if (!r.value) return "?";
        char buf[32];
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, *r.value);
        return std::string(buf, ptr);
    }

private:
    template <typename T>
    static std::optional<std::size_t> find_named(const std::vector<T>& items, std::string_view name)
    {
        for (std::size_t i = 0; i < items.size(); ++i)
            if (items[i].name == name) return i;
        return std::nullopt;
    }

    static std::optional<std::size_t> declared_reading(const SensingModel& m, std::string_view token)
    {
        if (token.empty()) return std::nullopt;
        for (std::size_t r = 0; r < m.readings.size(); ++r)
            if (m.readings[r].token == token) return r;
        return std::nullopt;
    }

    Value settle(const Effect& eff, Value v, const GroundAction& act) const
    {
        const FluentDecl& fl = fluents[eff.fluent];
        if (fl.contains(v)) return v;
        if (!eff.clamp || fl.type != ValueType::Integer)
            throw ExecutionError("effect of '" + act.name + "' sets '" + fl.name + "' to out-of-domain value " +
                                 std::to_string(v));
        // nearest declared value; ties go to the smaller one
        Value best = fl.domain.front();
        for (Value c : fl.domain) {
            const auto dc = std::abs(c - v), db = std::abs(best - v);
            if (dc < db || (dc == db && c < best)) best = c;
        }
        return best;
    }

    std::vector<std::optional<std::size_t>> outcome_model_of_;
    std::vector<std::optional<std::size_t>> sensing_model_of_;
};

} // namespace loopverify
