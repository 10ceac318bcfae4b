#pragma once

// Execution over world states with exact sensing: the deterministic relation T*
// and its noisy-acting generalisation U*, decided as reachability over the
// finite product graph of control states x world states.

#include <algorithm>
#include <deque>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "loopverify/controller.hpp"
#include "loopverify/domain_io.hpp"
#include "loopverify/parallel.hpp"
#include "loopverify/theory.hpp"

namespace loopverify {

enum class Status { Holds, Fails, Unknown };

inline const char* to_string(Status s)
{
    switch (s) {
    case Status::Holds: return "holds";
    case Status::Fails: return "fails";
    case Status::Unknown: return "unknown";
    }
    return "?";
}

struct Config {
    std::size_t control = 0;
    WorldState world;

    friend bool operator==(const Config&, const Config&) = default;
};

struct ConfigHash {
    std::size_t operator()(const Config& c) const noexcept { return WorldStateHash{}(c.world) * 31 + c.control; }
};

/// One configuration of a run; `action`/`observation` are absent on the last entry.
struct TraceStep {
    Config config;
    std::optional<ActionId> action;
    std::optional<ObservationId> observation;
};

using Trace = std::vector<TraceStep>;

struct Verdict {
    Status status = Status::Unknown;
    std::vector<Trace> witnesses;
    std::optional<WorldState> counterexample_world;
    std::optional<double> measure; // goal-reaching prior mass for the (#) criterion
    std::string detail;
};

struct ExactOptions {
    unsigned workers = 1;
};

/// One T step. Absent at the final state, when the advised action is inexecutable,
/// or when delta has no entry for the observation.
inline std::optional<Config> step_T(const CompiledController& cc, const Domain& d, const Config& cfg)
{
    if (cc.is_final(cfg.control)) return std::nullopt;
    const ActionId a = cc.advice[cfg.control];
    if (!d.poss(a, cfg.world)) return std::nullopt;
    const ObservationId o = d.exact_observation(a, cfg.world);
    auto next = cc.delta(cfg.control, o);
    if (!next) return std::nullopt;
    return Config{*next, d.apply(a, cfg.world)};
}

struct Successor {
    Config config;
    ActionId action = 0;
    ObservationId observation = kNullObservation;
    double probability = 0.0; // share of the executable alternatives' likelihood
};

/// One U step: a successor per executable alt-alternative whose observation has a
/// delta entry, ordered by (action name, observation token).
inline std::vector<Successor> step_U(const CompiledController& cc, const Domain& d, const Config& cfg)
{
    std::vector<Successor> out;
    if (cc.is_final(cfg.control)) return out;
    const auto outcomes = d.outcomes_of(cc.advice[cfg.control], cfg.world);
    double total = 0.0;
    for (const auto& oc : outcomes) total += oc.likelihood;
    for (const auto& oc : outcomes) {
        const ObservationId o = d.exact_observation(oc.action, cfg.world);
        auto next = cc.delta(cfg.control, o);
        if (!next) continue;
        out.push_back({Config{*next, d.apply(oc.action, cfg.world)}, oc.action, o, oc.likelihood / total});
    }
    std::sort(out.begin(), out.end(), [&](const Successor& x, const Successor& y) {
        const auto& xn = d.actions[x.action].name;
        const auto& yn = d.actions[y.action].name;
        if (xn != yn) return xn < yn;
        return d.observations[x.observation] < d.observations[y.observation];
    });
    return out;
}

/// Forward-explored U graph with BFS parent links for witness extraction.
class ProductGraph {
public:
    struct Edge {
        std::size_t to;
        ActionId action;
        ObservationId observation;
        double probability;
    };

    ProductGraph(const CompiledController& cc, const Domain& d, const std::vector<WorldState>& roots) : cc_(cc)
    {
        std::deque<std::size_t> queue;
        for (const auto& w : roots) {
            auto [id, fresh] = intern(Config{cc.initial, w});
            if (fresh) {
                root_.push_back(id);
                queue.push_back(id);
            }
        }
        while (!queue.empty()) {
            const std::size_t n = queue.front();
            queue.pop_front();
            for (auto& s : step_U(cc, d, nodes_[n])) {
                auto [id, fresh] = intern(s.config);
                edges_[n].push_back({id, s.action, s.observation, s.probability});
                if (fresh) {
                    parent_[id] = Parent{n, s.action, s.observation};
                    queue.push_back(id);
                }
            }
        }
    }

    std::size_t size() const { return nodes_.size(); }
    const Config& node(std::size_t n) const { return nodes_[n]; }
    const std::vector<Edge>& edges(std::size_t n) const { return edges_[n]; }
    bool is_final(std::size_t n) const { return cc_.is_final(nodes_[n].control); }

    std::optional<std::size_t> find(const Config& c) const
    {
        auto it = index_.find(c);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    /// Nodes from which some final node is reachable.
    std::vector<bool> coreachable_final() const
    {
        std::vector<std::vector<std::size_t>> preds(nodes_.size());
        for (std::size_t n = 0; n < nodes_.size(); ++n)
            for (const auto& e : edges_[n]) preds[e.to].push_back(n);
        std::vector<bool> mark(nodes_.size(), false);
        std::vector<std::size_t> stack;
        for (std::size_t n = 0; n < nodes_.size(); ++n)
            if (is_final(n)) {
                mark[n] = true;
                stack.push_back(n);
            }
        while (!stack.empty()) {
            const std::size_t n = stack.back();
            stack.pop_back();
            for (std::size_t p : preds[n])
                if (!mark[p]) {
                    mark[p] = true;
                    stack.push_back(p);
                }
        }
        return mark;
    }

    /// BFS-tree path from a root to `n`.
    Trace path_to(std::size_t n) const
    {
        Trace rev;
        rev.push_back({nodes_[n], std::nullopt, std::nullopt});
        while (parent_[n]) {
            const Parent& p = *parent_[n];
            rev.push_back({nodes_[p.node], p.action, p.observation});
            n = p.node;
        }
        return Trace(rev.rbegin(), rev.rend());
    }

private:
    struct Parent {
        std::size_t node;
        ActionId action;
        ObservationId observation;
    };

    std::pair<std::size_t, bool> intern(const Config& c)
    {
        auto [it, fresh] = index_.try_emplace(c, nodes_.size());
        if (fresh) {
            nodes_.push_back(c);
            edges_.emplace_back();
            parent_.emplace_back();
        }
        return {it->second, fresh};
    }

    const CompiledController& cc_;
    std::vector<Config> nodes_;
    std::vector<std::vector<Edge>> edges_;
    std::vector<std::optional<Parent>> parent_;
    std::vector<std::size_t> root_;
    std::unordered_map<Config, std::size_t, ConfigHash> index_;
};

namespace detail {

inline void require_objective_goal(const Domain& d, const char* criterion)
{
    if (!is_objective(d.goal))
        throw UnsupportedModel(std::string(criterion) + ": goal mentions Bel/Know; use the epistemic criterion def9");
}

inline std::vector<std::size_t> positive_worlds(const Domain& d)
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < d.initial_worlds.size(); ++i)
        if (d.initial_worlds[i].weight > 0.0) out.push_back(i);
    return out;
}

/// Shortest U path from (Q0, w) to a final configuration satisfying the goal.
inline std::optional<Trace> weak_plan(const CompiledController& cc, const Domain& d, const WorldState& w)
{
    ProductGraph g(cc, d, {w});
    for (std::size_t n = 0; n < g.size(); ++n)
        if (g.is_final(n) && eval_objective(d.goal, g.node(n).world)) return g.path_to(n);
    return std::nullopt;
}

struct WorldCheck {
    bool ok = false;
    Trace trace;
};

inline std::vector<WorldCheck> weak_plans(const CompiledController& cc, const Domain& d,
                                          const std::vector<std::size_t>& worlds, unsigned workers)
{
    return parallel_map(worlds.size(), workers, [&](std::size_t k) {
        auto plan = weak_plan(cc, d, d.initial_worlds[worlds[k]].state);
        return plan ? WorldCheck{true, std::move(*plan)} : WorldCheck{false, {}};
    });
}

} // namespace detail

/// Correctness under T*: every positive-weight initial world's unique run ends in
/// QF with the goal true. An inexecutable advised action or missing transition
/// counts as a failed run.
inline Verdict verify_def4(const Controller& c, const Domain& d, const ExactOptions& opt = {})
{
    if (!d.noise_free_acting())
        throw UnsupportedModel("def4: domain has noisy actions; use def6 (U* semantics)");
    detail::require_objective_goal(d, "def4");
    const CompiledController cc = compile(c, d);
    const auto worlds = detail::positive_worlds(d);

    struct Run {
        bool ok = false;
        Trace trace;
        std::string why;
    };
    auto runs = parallel_map(worlds.size(), opt.workers, [&](std::size_t k) {
        Run run;
        Config cfg{cc.initial, d.initial_worlds[worlds[k]].state};
        std::unordered_set<Config, ConfigHash> seen{cfg};
        for (;;) {
            if (cc.is_final(cfg.control)) {
                run.trace.push_back({cfg, std::nullopt, std::nullopt});
                run.ok = eval_objective(d.goal, cfg.world);
                if (!run.ok) run.why = "run ends in the final state with the goal false";
                return run;
            }
            const ActionId a = cc.advice[cfg.control];
            auto next = step_T(cc, d, cfg);
            if (!next) {
                run.trace.push_back({cfg, a, std::nullopt});
                run.why = d.poss(a, cfg.world) ? "no transition for the observation" : "advised action '" + d.actions[a].name + "' is inexecutable";
                return run;
            }
            run.trace.push_back({cfg, a, d.exact_observation(a, cfg.world)});
            if (!seen.insert(*next).second) {
                run.trace.push_back({*next, std::nullopt, std::nullopt});
                run.why = "run revisits a configuration and never terminates";
                return run;
            }
            cfg = std::move(*next);
        }
    });

    Verdict v;
    v.status = Status::Holds;
    for (std::size_t k = 0; k < runs.size(); ++k) {
        if (!runs[k].ok) {
            Verdict fail;
            fail.status = Status::Fails;
            fail.counterexample_world = d.initial_worlds[worlds[k]].state;
            fail.witnesses.push_back(std::move(runs[k].trace));
            fail.detail = runs[k].why;
            return fail;
        }
        v.witnesses.push_back(std::move(runs[k].trace));
    }
    return v;
}

/// Correctness under U*: every positive-weight initial world admits some U path to
/// QF with the goal true (a weak plan).
inline Verdict verify_def6(const Controller& c, const Domain& d, const ExactOptions& opt = {})
{
    detail::require_objective_goal(d, "def6");
    const CompiledController cc = compile(c, d);
    const auto worlds = detail::positive_worlds(d);
    auto checks = detail::weak_plans(cc, d, worlds, opt.workers);
    Verdict v;
    v.status = Status::Holds;
    for (std::size_t k = 0; k < checks.size(); ++k) {
        if (!checks[k].ok) {
            Verdict fail;
            fail.status = Status::Fails;
            fail.counterexample_world = d.initial_worlds[worlds[k]].state;
            fail.detail = "no execution path reaches the final state with the goal true";
            return fail;
        }
        v.witnesses.push_back(std::move(checks[k].trace));
    }
    return v;
}

/// Every configuration U-reachable from a positive-weight initial world can still
/// U-reach QF.
inline Verdict verify_termination(const Controller& c, const Domain& d, const ExactOptions& = {})
{
    const CompiledController cc = compile(c, d);
    std::vector<WorldState> roots;
    for (std::size_t i : detail::positive_worlds(d)) roots.push_back(d.initial_worlds[i].state);
    ProductGraph g(cc, d, roots);
    const auto live = g.coreachable_final();
    Verdict v;
    v.status = Status::Holds;
    for (std::size_t n = 0; n < g.size(); ++n) {
        if (live[n]) continue;
        v.status = Status::Fails;
        Trace path = g.path_to(n);
        v.counterexample_world = path.front().config.world;
        v.witnesses.push_back(std::move(path));
        v.detail = "reachable configuration from which the final state is unreachable";
        return v;
    }
    return v;
}

/// The (‡) criterion: initial worlds with weight strictly greater than kappa each
/// admit a weak plan.
inline Verdict verify_weight_threshold(const Controller& c, const Domain& d, double kappa, const ExactOptions& opt = {})
{
    detail::require_objective_goal(d, "weight");
    const CompiledController cc = compile(c, d);
    std::vector<std::size_t> worlds;
    for (std::size_t i = 0; i < d.initial_worlds.size(); ++i)
        if (d.initial_worlds[i].weight > kappa) worlds.push_back(i);
    auto checks = detail::weak_plans(cc, d, worlds, opt.workers);
    Verdict v;
    v.status = Status::Holds;
    if (kappa < 0.0 || kappa >= d.total_initial_weight())
        v.detail = "kappa " + std::to_string(kappa) + " lies outside [0, total weight); the criterion is degenerate";
    for (std::size_t k = 0; k < checks.size(); ++k) {
        if (!checks[k].ok) {
            v.status = Status::Fails;
            v.witnesses.clear();
            v.counterexample_world = d.initial_worlds[worlds[k]].state;
            const std::string note = v.detail;
            v.detail = "a world of weight " + std::to_string(d.initial_worlds[worlds[k]].weight) +
                       " > kappa has no execution path to the goal";
            if (!note.empty()) v.detail += "; " + note;
            return v;
        }
        v.witnesses.push_back(std::move(checks[k].trace));
    }
    return v;
}

/// The (♯) criterion: the prior mass of initial worlds admitting a weak plan is at
/// least kappa.
inline Verdict verify_belief_threshold(const Controller& c, const Domain& d, double kappa, const ExactOptions& opt = {})
{
    detail::require_objective_goal(d, "mass");
    const CompiledController cc = compile(c, d);
    const auto worlds = detail::positive_worlds(d);
    auto checks = detail::weak_plans(cc, d, worlds, opt.workers);
    // identical summation order for both sums, so all-pass gives exactly 1
    double good = 0.0, total = 0.0;
    std::optional<std::size_t> first_bad;
    for (std::size_t k = 0; k < checks.size(); ++k) {
        const double w = d.initial_worlds[worlds[k]].weight;
        total += w;
        good += checks[k].ok ? w : 0.0;
        if (!checks[k].ok && !first_bad) first_bad = k;
    }
    Verdict v;
    v.measure = good / total;
    v.status = *v.measure >= kappa ? Status::Holds : Status::Fails;
    v.detail = "goal-reaching prior mass " + std::to_string(*v.measure);
    if (first_bad) v.counterexample_world = d.initial_worlds[worlds[*first_bad]].state;
    for (auto& ch : checks)
        if (ch.ok) v.witnesses.push_back(std::move(ch.trace));
    return v;
}

} // namespace loopverify
