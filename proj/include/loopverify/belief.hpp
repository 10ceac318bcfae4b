#pragma once

// Belief states as finite maps from possible worlds to unnormalised weight, with
// progression through noisy actions and Bayesian conditioning on readings.
// Weights are never renormalised; Bel divides by the total at query time.

#include <compare>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "loopverify/domain_io.hpp"
#include "loopverify/error.hpp"
#include "loopverify/theory.hpp"

namespace loopverify {

/// A particle: a world plus, when tracing, the outcome history that produced it.
struct ParticleKey {
    WorldState world;
    std::vector<ActionId> history; // empty unless particles are traced

    friend auto operator<=>(const ParticleKey&, const ParticleKey&) = default;
    friend bool operator==(const ParticleKey&, const ParticleKey&) = default;
};

struct BeliefOptions {
    bool trace_particles = false; // keep one particle per outcome history instead of merging equal worlds
    double prune = 0.0;           // drop particles whose share of the total falls below this; 0 keeps everything
};

class BeliefState {
public:
    using Map = std::map<ParticleKey, double>;

    BeliefState() = default;
    explicit BeliefState(Map particles) : particles_(std::move(particles)) {}

    const Map& particles() const { return particles_; }
    bool empty() const { return particles_.empty(); }
    std::size_t size() const { return particles_.size(); }

    double total() const
    {
        double t = 0.0;
        for (const auto& [k, w] : particles_) t += w;
        return t;
    }

    /// Weight per world, merging histories.
    std::map<WorldState, double> by_world() const
    {
        std::map<WorldState, double> out;
        for (const auto& [k, w] : particles_) out[k.world] += w;
        return out;
    }

    bool possible(const WorldState& w) const
    {
        for (const auto& [k, weight] : particles_)
            if (k.world == w && weight > 0.0) return true;
        return false;
    }

    void add(ParticleKey key, double weight)
    {
        if (weight > 0.0) particles_[std::move(key)] += weight;
    }

    friend bool operator==(const BeliefState&, const BeliefState&) = default;

private:
    Map particles_;
};

namespace detail {

inline void prune(BeliefState::Map& m, double threshold)
{
    if (threshold <= 0.0) return;
    double total = 0.0;
    for (const auto& [k, w] : m) total += w;
    std::erase_if(m, [&](const auto& kv) { return kv.second < threshold * total; });
}

/// Likelihood that alternative `b` yields `r` at `w`; zero when `r` is not one of b's readings.
inline double reading_factor(const Domain& d, ActionId b, const Reading& r, const WorldState& w)
{
    const SensingModel* m = d.sensing_model(b);
    if (!m) return r.token == kNullToken && !r.value ? 1.0 : 0.0;
    if (r.token == kNullToken && !r.value) return 0.0;
    bool declared = r.token.empty();
    for (const auto& rd : m->readings) declared = declared || rd.token == r.token;
    return declared ? d.likelihood(b, r, w) : 0.0;
}

inline BeliefState update(const BeliefState& b, ActionId a, const Reading* reading, const Domain& d,
                          const BeliefOptions& opt, const char* annihilated)
{
    BeliefState::Map out;
    for (const auto& [key, weight] : b.particles()) {
        for (const auto& oc : d.outcomes_of(a, key.world)) {
            double w = weight * oc.likelihood;
            if (reading) w *= reading_factor(d, oc.action, *reading, key.world);
            if (w <= 0.0) continue;
            ParticleKey next{d.apply(oc.action, key.world), {}};
            if (opt.trace_particles) {
                next.history = key.history;
                next.history.push_back(oc.action);
            }
            out[std::move(next)] += w;
        }
    }
    prune(out, opt.prune);
    double total = 0.0;
    for (const auto& [k, w] : out) total += w;
    if (!(total > 0.0)) throw ExecutionError(annihilated);
    return BeliefState(std::move(out));
}

} // namespace detail

inline BeliefState initial_belief(const Domain& d, const BeliefOptions& = {})
{
    BeliefState b;
    for (const auto& iw : d.initial_worlds) b.add(ParticleKey{iw.state, {}}, iw.weight);
    return b;
}

/// Progression through physical action `a` with no sensing information: every
/// executable alternative contributes prior weight times its likelihood.
inline BeliefState progress(const BeliefState& b, ActionId a, const Domain& d, const BeliefOptions& opt = {})
{
    if (d.actions[a].kind != ActionKind::Physical)
        throw std::logic_error("progress: '" + d.actions[a].name + "' is a sensing action");
    return detail::update(b, a, nullptr, d, opt, "belief annihilated");
}

/// Progression through physical action `a` whose alternatives themselves sense,
/// conditioned on having observed reading `r` (evaluated in the pre-state).
inline BeliefState progress_observed(const BeliefState& b, ActionId a, const Reading& r, const Domain& d,
                                     const BeliefOptions& opt = {})
{
    return detail::update(b, a, &r, d, opt, "belief annihilated");
}

/// Bayesian conditioning on reading `r` of sensing action `a`.
inline BeliefState condition(const BeliefState& b, ActionId a, const Reading& r, const Domain& d,
                             const BeliefOptions& opt = {})
{
    if (!d.sensing_model(a)) throw SemanticError("condition: '" + d.actions[a].name + "' has no sensing model");
    return detail::update(b, a, &r, d, opt, "observation impossible under current belief");
}

/// Normalised weight of the particles satisfying objective `f`.
inline double bel(const BeliefState& b, const Formula& f)
{
    double yes = 0.0, all = 0.0;
    for (const auto& [key, w] : b.particles()) {
        all += w;
        if (eval_objective(f, key.world)) yes += w;
    }
    if (!(all > 0.0)) throw ExecutionError("bel: belief has no weight");
    return yes == all ? 1.0 : yes / all;
}

inline constexpr double kKnowTolerance = 1e-12;

inline bool know(const BeliefState& b, const Formula& f) { return bel(b, f) >= 1.0 - kKnowTolerance; }

namespace detail {

inline bool eval_mixed(const Formula& f, const WorldState& w, const BeliefState& b)
{
    switch (f->op) {
    case Connective::Bel: return compare_values(f->cmp, bel(b, f->args[0]), f->threshold);
    case Connective::Know: return know(b, f->args[0]);
    case Connective::Not: return !eval_mixed(f->args[0], w, b);
    case Connective::And:
        for (const auto& g : f->args)
            if (!eval_mixed(g, w, b)) return false;
        return true;
    case Connective::Or:
        for (const auto& g : f->args)
            if (eval_mixed(g, w, b)) return true;
        return false;
    case Connective::Implies: return !eval_mixed(f->args[0], w, b) || eval_mixed(f->args[1], w, b);
    default: return eval_objective(f, w);
    }
}

} // namespace detail

/// Truth of a goal at a belief: `f` must hold at every positive-weight particle,
/// with epistemic atoms evaluated against the belief as a whole.
inline bool eval_goal(const BeliefState& b, const Formula& f)
{
    for (const auto& [key, w] : b.particles())
        if (w > 0.0 && !detail::eval_mixed(f, key.world, b)) return false;
    return true;
}

/// The first Bel/Know body in `f`, or `f` itself when it is objective.
inline std::optional<Formula> tracked_formula(const Formula& f)
{
    if (f->op == Connective::Bel || f->op == Connective::Know) return f->args[0];
    for (const auto& g : f->args)
        if (auto t = tracked_formula(g); t && !is_objective(g)) return t;
    if (is_objective(f)) return f;
    return std::nullopt;
}

inline json belief_to_json(const BeliefState& b, const Domain& d)
{
    json out = json::array();
    for (const auto& [key, w] : b.particles()) {
        json p{{"state", state_to_json(key.world, d)}, {"weight", w}};
        if (!key.history.empty()) {
            json h = json::array();
            for (ActionId a : key.history) h.push_back(d.actions[a].name);
            p["history"] = h;
        }
        out.push_back(std::move(p));
    }
    return out;
}

} // namespace loopverify
