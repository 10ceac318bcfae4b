#pragma once

// Execution over belief states (V*): the agent's belief is progressed and
// conditioned while a designated real world supplies outcomes and readings.
// Scenarios fix those choices step by step; verify_def9 quantifies over them.

#include <cmath>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "loopverify/belief.hpp"
#include "loopverify/controller.hpp"
#include "loopverify/exec_exact.hpp"
#include "loopverify/parallel.hpp"
#include "loopverify/theory.hpp"

namespace loopverify {

struct ScenarioStep {
    std::string advised_action;
    std::optional<std::string> actual_outcome; // physical actions with several alternatives
    std::optional<Reading> reading;            // sensing actions, or sensing alternatives
};

using Scenario = std::vector<ScenarioStep>;

struct EpistemicConfig {
    std::size_t control = 0;
    BeliefState belief;
    WorldState real;
};

struct EpistemicOptions {
    bool poss_at_real = false;  // check executability at the real world instead of at every possible world
    bool real_intended = false; // move the real world by the intended action rather than the actual outcome
    BeliefOptions belief;
    std::size_t depth_bound = 64;
    std::size_t node_budget = 2'000'000; // per initial world; exceeding it yields Unknown
    unsigned workers = 1;
};

/// Raised when execution reaches a configuration it cannot leave (a non-goal sink).
class DeadEnd : public ExecutionError {
public:
    using ExecutionError::ExecutionError;
};

struct VStep {
    EpistemicConfig next;
    ActionId actual = 0;
    Reading reading;
    ObservationId observation = kNullObservation;
};

namespace detail {

/// Readings that alternative `b` may return at `w` with positive likelihood.
inline std::vector<Reading> possible_readings(const Domain& d, ActionId b, const WorldState& w)
{
    const SensingModel* m = d.sensing_model(b);
    if (!m) return {Reading::null()};
    if (!m->quantized())
        throw UnsupportedModel("sensing model of '" + d.actions[b].name + "' declares no finite reading set");
    std::vector<Reading> out;
    for (std::size_t r = 0; r < m->readings.size(); ++r)
        if (d.reading_likelihood(*m, r, w) > 0.0) out.push_back(Reading{m->readings[r].token, m->readings[r].value});
    return out;
}

inline ObservationId observation_for(const Domain& d, ActionId b, const Reading& r)
{
    return d.sensing_model(b) ? d.observation_of(b, r) : kNullObservation;
}

inline void require_executable(const CompiledController& cc, const Domain& d, const EpistemicConfig& cfg,
                               const EpistemicOptions& opt)
{
    if (cc.is_final(cfg.control)) throw DeadEnd("final state advises no action");
    const ActionId a = cc.advice[cfg.control];
    if (opt.poss_at_real) {
        if (!d.poss(a, cfg.real)) throw DeadEnd("'" + d.actions[a].name + "' inexecutable at the real world");
        return;
    }
    for (const auto& [key, w] : cfg.belief.particles())
        if (w > 0.0 && !d.poss(a, key.world))
            throw DeadEnd("'" + d.actions[a].name + "' inexecutable in belief");
}

/// The V step once the actual alternative and reading are fixed. Both must have
/// positive likelihood at the real world.
inline VStep advance(const CompiledController& cc, const Domain& d, const EpistemicConfig& cfg, ActionId actual,
                     const Reading& reading, const EpistemicOptions& opt)
{
    const ActionId a = cc.advice[cfg.control];
    VStep out;
    out.actual = actual;
    out.reading = reading;
    out.observation = observation_for(d, actual, reading);
    if (d.actions[a].kind == ActionKind::Sensing) {
        out.next.belief = condition(cfg.belief, a, reading, d, opt.belief);
        out.next.real = cfg.real;
    } else {
        out.next.belief = progress_observed(cfg.belief, a, reading, d, opt.belief);
        const ActionId mover = opt.real_intended ? a : actual;
        if (!d.poss(mover, cfg.real)) throw DeadEnd("'" + d.actions[mover].name + "' inexecutable at the real world");
        out.next.real = d.apply(mover, cfg.real);
    }
    auto to = cc.delta(cfg.control, out.observation);
    if (!to)
        throw DeadEnd("stuck: no transition from '" + cc.names[cfg.control] + "' on '" + d.observations[out.observation] + "'");
    out.next.control = *to;
    return out;
}

} // namespace detail

/// One V step driven by a scenario step. Scenario inconsistencies raise
/// ExecutionError; dead ends raise DeadEnd.
inline VStep step_V(const CompiledController& cc, const Domain& d, const EpistemicConfig& cfg, const ScenarioStep& step,
                    const EpistemicOptions& opt = {})
{
    detail::require_executable(cc, d, cfg, opt);
    const ActionId a = cc.advice[cfg.control];
    if (step.advised_action != d.actions[a].name)
        throw ExecutionError("scenario inconsistent: controller advises '" + d.actions[a].name + "', scenario says '" +
                             step.advised_action + "'");

    ActionId actual = a;
    if (d.actions[a].kind == ActionKind::Physical) {
        const auto outcomes = d.outcomes_of(a, cfg.real);
        if (step.actual_outcome) {
            auto b = d.find_action(*step.actual_outcome);
            if (!b) throw ExecutionError("scenario names unknown outcome '" + *step.actual_outcome + "'");
            actual = *b;
            if (std::none_of(outcomes.begin(), outcomes.end(), [&](const Outcome& o) { return o.action == actual; }))
                throw ExecutionError("scenario invalid: outcome '" + *step.actual_outcome + "' of '" + d.actions[a].name +
                                     "' has zero likelihood at the real world");
        } else if (outcomes.size() == 1) {
            actual = outcomes.front().action;
        } else if (outcomes.empty()) {
            throw DeadEnd("'" + d.actions[a].name + "' has no executable outcome at the real world");
        } else {
            throw ExecutionError("scenario must name the actual outcome of '" + d.actions[a].name + "'");
        }
    } else if (step.actual_outcome && *step.actual_outcome != d.actions[a].name) {
        throw ExecutionError("scenario gives an outcome for sensing action '" + d.actions[a].name + "'");
    }

    Reading reading = Reading::null();
    if (step.reading) {
        reading = *step.reading;
        if (detail::reading_factor(d, actual, reading, cfg.real) <= 0.0)
            throw ExecutionError("scenario invalid: reading '" + Domain::describe(reading) + "' has zero likelihood at the real world");
    } else if (d.sensing_model(actual)) {
        auto options = detail::possible_readings(d, actual, cfg.real);
        if (options.size() != 1) throw ExecutionError("scenario must give the reading of '" + d.actions[actual].name + "'");
        reading = options.front();
    }
    return detail::advance(cc, d, cfg, actual, reading, opt);
}

struct ScenarioSnapshot {
    std::size_t control = 0;
    ActionId action = 0;
    ActionId actual = 0;
    Reading reading;
    ObservationId observation = kNullObservation;
    EpistemicConfig after;
};

struct ScenarioResult {
    Status status = Status::Unknown;
    std::string detail;
    EpistemicConfig initial;
    std::vector<ScenarioSnapshot> steps;
    EpistemicConfig final_config;
};

inline ScenarioResult run_scenario(const Controller& c, const Domain& d, const WorldState& real0, const Scenario& sc,
                                   const EpistemicOptions& opt = {})
{
    const CompiledController cc = compile(c, d);
    ScenarioResult res;
    res.initial = EpistemicConfig{cc.initial, initial_belief(d, opt.belief), real0};
    if (!res.initial.belief.possible(real0)) throw ExecutionError("real world has zero prior weight");
    EpistemicConfig cfg = res.initial;
    std::size_t i = 0;
    while (!cc.is_final(cfg.control)) {
        if (i == sc.size()) {
            res.status = Status::Unknown;
            res.detail = "scenario ends before the final state";
            res.final_config = cfg;
            return res;
        }
        try {
            VStep s = step_V(cc, d, cfg, sc[i], opt);
            res.steps.push_back({cfg.control, cc.advice[cfg.control], s.actual, s.reading, s.observation, s.next});
            cfg = std::move(s.next);
        } catch (const DeadEnd& e) {
            res.status = Status::Fails;
            res.detail = std::string("dead end at step ") + std::to_string(i) + ": " + e.what();
            res.final_config = cfg;
            return res;
        }
        ++i;
    }
    if (i < sc.size()) throw ExecutionError("scenario has " + std::to_string(sc.size() - i) + " step(s) past the final state");
    res.final_config = cfg;
    const bool ok = eval_goal(cfg.belief, d.goal);
    res.status = ok ? Status::Holds : Status::Fails;
    res.detail = ok ? "final state reached with the goal true at the belief" : "final state reached with the goal false at the belief";
    return res;
}

// ---------------------------------------------------------------------------
// Def. 9 search

enum class Def9Mode { Existential, Adversarial };

namespace detail {

enum class Tri { False, True, Unknown };

struct NodeKey {
    std::vector<std::int64_t> data;
    friend bool operator==(const NodeKey&, const NodeKey&) = default;
};

struct NodeKeyHash {
    std::size_t operator()(const NodeKey& k) const noexcept
    {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (auto v : k.data) {
            h ^= static_cast<std::uint64_t>(v);
            h *= 0x100000001b3ULL;
        }
        return static_cast<std::size_t>(h);
    }
};

/// Control state, real world and the belief with normalised weights rounded to 1e-9.
inline NodeKey node_key(const EpistemicConfig& cfg)
{
    NodeKey k;
    k.data.push_back(static_cast<std::int64_t>(cfg.control));
    for (auto v : cfg.real.values) k.data.push_back(v);
    const double total = cfg.belief.total();
    for (const auto& [key, w] : cfg.belief.particles()) {
        const auto rounded = static_cast<std::int64_t>(std::llround(w / total * 1e9));
        if (rounded == 0) continue;
        k.data.push_back(-1);
        for (auto v : key.world.values) k.data.push_back(v);
        for (auto a : key.history) k.data.push_back(-2 - static_cast<std::int64_t>(a));
        k.data.push_back(rounded);
    }
    return k;
}

class Def9Search {
public:
    Def9Search(const CompiledController& cc, const Domain& d, Def9Mode mode, const EpistemicOptions& opt)
        : cc_(cc), d_(d), mode_(mode), opt_(opt)
    {
    }

    struct Result {
        Tri value = Tri::Unknown;
        Trace trace; // decisive run: a success (existential) or a failure (adversarial)
        std::string why;
    };

    Result run(const WorldState& real0)
    {
        EpistemicConfig root{cc_.initial, initial_belief(d_, opt_.belief), real0};
        auto r = visit(root, 0);
        Result out{r.value, {}, r.why};
        out.trace = std::move(r.trace);
        return out;
    }

private:
    struct Outcome {
        Tri value = Tri::Unknown;
        bool path_dependent = false; // touched a cycle cut or the depth bound
        Trace trace;
        std::string why;
    };

    bool decisive(Tri t) const { return mode_ == Def9Mode::Existential ? t == Tri::True : t == Tri::False; }

    Outcome leaf(Tri v, const EpistemicConfig& cfg, std::string why, bool path_dependent = false) const
    {
        Outcome o{v, path_dependent, {}, std::move(why)};
        o.trace.push_back({Config{cfg.control, cfg.real}, std::nullopt, std::nullopt});
        return o;
    }

    Outcome visit(const EpistemicConfig& cfg, std::size_t depth)
    {
        if (cc_.is_final(cfg.control)) {
            const bool ok = eval_goal(cfg.belief, d_.goal);
            return leaf(ok ? Tri::True : Tri::False, cfg, ok ? "goal holds at the final belief" : "goal fails at the final belief");
        }
        if (depth >= opt_.depth_bound) return leaf(Tri::Unknown, cfg, "depth bound exceeded", true);
        if (++nodes_ > opt_.node_budget) return leaf(Tri::Unknown, cfg, "node budget exceeded", true);

        NodeKey key = node_key(cfg);
        if (auto it = memo_.find(key); it != memo_.end()) return it->second;
        if (on_path_.count(key)) return leaf(Tri::False, cfg, "run cycles without reaching the final state", true);

        on_path_.insert(key);
        Outcome result = expand(cfg, depth);
        on_path_.erase(key);
        if (!result.path_dependent) memo_.emplace(std::move(key), result);
        return result;
    }

    Outcome expand(const EpistemicConfig& cfg, std::size_t depth)
    {
        try {
            require_executable(cc_, d_, cfg, opt_);
        } catch (const DeadEnd& e) {
            return leaf(Tri::False, cfg, e.what());
        }
        const ActionId a = cc_.advice[cfg.control];
        std::vector<ActionId> actuals;
        if (d_.actions[a].kind == ActionKind::Physical) {
            for (const auto& oc : d_.outcomes_of(a, cfg.real)) actuals.push_back(oc.action);
        } else {
            actuals.push_back(a);
        }
        if (actuals.empty()) return leaf(Tri::False, cfg, "no outcome of '" + d_.actions[a].name + "' is executable at the real world");

        const bool existential = mode_ == Def9Mode::Existential;
        Outcome combined{existential ? Tri::False : Tri::True, false, {}, {}};
        bool saw_unknown = false;
        for (ActionId b : actuals) {
            for (const Reading& r : possible_readings(d_, b, cfg.real)) {
                Outcome child;
                ObservationId obs = kNullObservation;
                try {
                    VStep s = advance(cc_, d_, cfg, b, r, opt_);
                    obs = s.observation;
                    child = visit(s.next, depth + 1);
                } catch (const ExecutionError& e) {
                    child = leaf(Tri::False, cfg, e.what());
                    child.trace.clear();
                }
                combined.path_dependent = combined.path_dependent || child.path_dependent;
                if (decisive(child.value)) {
                    Outcome out{child.value, child.path_dependent, {}, std::move(child.why)};
                    out.trace.push_back({Config{cfg.control, cfg.real}, b, obs});
                    out.trace.insert(out.trace.end(), child.trace.begin(), child.trace.end());
                    return out;
                }
                if (child.value == Tri::Unknown && !saw_unknown) {
                    saw_unknown = true;
                    combined.why = child.why;
                }
                if (combined.why.empty()) combined.why = child.why;
            }
        }
        if (saw_unknown) combined.value = Tri::Unknown;
        combined.trace.push_back({Config{cfg.control, cfg.real}, std::nullopt, std::nullopt});
        return combined;
    }

    const CompiledController& cc_;
    const Domain& d_;
    Def9Mode mode_;
    const EpistemicOptions& opt_;
    std::size_t nodes_ = 0;
    std::unordered_map<NodeKey, Outcome, NodeKeyHash> memo_;
    std::unordered_set<NodeKey, NodeKeyHash> on_path_;
};

} // namespace detail

/// Epistemic correctness from every positive-weight initial world taken as the real
/// world. Existential: some run of positive likelihood reaches QF with the goal true
/// at the final belief. Adversarial: every such run does. Runs that revisit a belief
/// configuration count as non-terminating; exceeding the depth bound yields Unknown.
inline Verdict verify_def9(const Controller& c, const Domain& d, Def9Mode mode, const EpistemicOptions& opt = {})
{
    const CompiledController cc = compile(c, d);
    std::vector<std::size_t> worlds;
    for (std::size_t i = 0; i < d.initial_worlds.size(); ++i)
        if (d.initial_worlds[i].weight > 0.0) worlds.push_back(i);
    auto results = parallel_map(worlds.size(), opt.workers, [&](std::size_t k) {
        detail::Def9Search search(cc, d, mode, opt);
        return search.run(d.initial_worlds[worlds[k]].state);
    });

    Verdict v;
    v.status = Status::Holds;
    std::optional<std::size_t> unknown;
    for (std::size_t k = 0; k < results.size(); ++k) {
        auto& r = results[k];
        if (r.value == detail::Tri::False) {
            Verdict fail;
            fail.status = Status::Fails;
            fail.counterexample_world = d.initial_worlds[worlds[k]].state;
            if (!r.trace.empty()) fail.witnesses.push_back(std::move(r.trace));
            fail.detail = r.why;
            return fail;
        }
        if (r.value == detail::Tri::Unknown && !unknown) unknown = k;
        if (r.value == detail::Tri::True && !r.trace.empty()) v.witnesses.push_back(std::move(r.trace));
    }
    if (unknown) {
        v.status = Status::Unknown;
        v.witnesses.clear();
        v.counterexample_world = d.initial_worlds[worlds[*unknown]].state;
        v.detail = results[*unknown].why;
    }
    return v;
}

// ---------------------------------------------------------------------------
// Scenario files

inline Reading reading_from_json(const json& j)
{
    if (j.is_number()) return Reading{"", j.get<double>()};
    if (j.is_string()) return Reading{j.get<std::string>(), std::nullopt};
    throw SemanticError("scenario: a reading is a token string or a number");
}

/// A JSON list of {"action", "outcome"?, "reading"?}.
inline Scenario scenario_from_json(const json& j)
{
    if (!j.is_array()) throw SemanticError("scenario: expected a JSON array of steps");
    Scenario sc;
    try {
        for (const auto& s : j) {
            ScenarioStep step;
            step.advised_action = s.at("action").get<std::string>();
            if (s.contains("outcome")) step.actual_outcome = s["outcome"].get<std::string>();
            if (s.contains("reading")) step.reading = reading_from_json(s["reading"]);
            sc.push_back(std::move(step));
        }
    } catch (const json::exception& e) {
        throw SemanticError(std::string("scenario: ") + e.what());
    }
    return sc;
}

inline Scenario parse_scenario(std::string_view text)
{
    try {
        return scenario_from_json(json::parse(text));
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("scenario: invalid JSON: ") + e.what(), e.byte);
    }
}

inline Scenario load_scenario(const std::string& path) { return parse_scenario(read_text_file(path)); }

} // namespace loopverify
