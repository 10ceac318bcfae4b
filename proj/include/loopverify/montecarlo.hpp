#pragma once

// Monte-Carlo execution of a controller: initial world drawn from the prior,
// outcomes from their likelihoods, readings from the sensing model. Used as a
// statistical cross-check of the exact verdicts.
//
// Generator: std::mt19937_64. Runs are split into blocks of kSimBlock; block k
// uses its own generator seeded with std::seed_seq{seed_lo, seed_hi, k}, and its
// runs consume that generator in run order. The result therefore depends on the
// seed alone, never on the worker count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <unordered_map>
#include <vector>

#include "loopverify/belief.hpp"
#include "loopverify/controller.hpp"
#include "loopverify/domain_io.hpp"
#include "loopverify/exec_exact.hpp"
#include "loopverify/parallel.hpp"
#include "loopverify/theory.hpp"

namespace loopverify {

inline constexpr std::size_t kSimBlock = 1024;

struct SimOptions {
    std::uint64_t runs = 1000;
    std::optional<std::size_t> step_cap; // default: 10 x |Q| x |state space|
    std::uint64_t seed = 0;
    bool track_belief = false; // forced on when the goal is epistemic
    unsigned workers = 1;
};

struct SimReport {
    std::uint64_t runs = 0;
    double success_rate = 0.0;
    double termination_rate = 0.0;
    double truncated_rate = 0.0; // runs cut off by the step cap
    std::optional<double> mean_final_bel;
    double std_error = 0.0;
    std::uint64_t seed = 0;
    std::size_t step_cap = 0;
};

inline json report_to_json(const SimReport& r)
{
    json j{{"runs", r.runs},
           {"success_rate", r.success_rate},
           {"termination_rate", r.termination_rate},
           {"truncated_rate", r.truncated_rate},
           {"std_error", r.std_error},
           {"seed", r.seed},
           {"step_cap", r.step_cap}};
    j["mean_final_bel"] = r.mean_final_bel ? json(*r.mean_final_bel) : json(nullptr);
    return j;
}

inline std::size_t default_step_cap(const CompiledController& cc, const Domain& d)
{
    std::vector<FluentId> all(d.fluents.size());
    for (FluentId f = 0; f < all.size(); ++f) all[f] = f;
    const std::uint64_t space = detail::state_space_size(d, all);
    const std::uint64_t cap = 10ULL * cc.size() * space;
    return static_cast<std::size_t>(std::min<std::uint64_t>(cap, 100'000'000ULL));
}

namespace detail {

inline double uniform01(std::mt19937_64& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

inline double standard_normal(std::mt19937_64& g)
{
    const double u1 = 1.0 - uniform01(g); // (0, 1]
    const double u2 = uniform01(g);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Declared readings ordered by value, with the midpoints separating them, so a
/// sampled value maps to its nearest reading by binary search.
struct ReadingCuts {
    std::vector<double> cuts;          // size n-1
    std::vector<std::size_t> readings; // size n, ascending value

    explicit ReadingCuts(const SensingModel& m)
    {
        for (std::size_t r = 0; r < m.readings.size(); ++r) readings.push_back(r);
        std::stable_sort(readings.begin(), readings.end(),
                         [&](std::size_t a, std::size_t b) { return *m.readings[a].value < *m.readings[b].value; });
        for (std::size_t k = 1; k < readings.size(); ++k)
            cuts.push_back(0.5 * (*m.readings[readings[k - 1]].value + *m.readings[readings[k]].value));
    }

    /// A value exactly on a midpoint goes to the lower reading.
    std::size_t nearest(double z) const
    {
        const auto it = std::lower_bound(cuts.begin(), cuts.end(), z);
        return readings[static_cast<std::size_t>(it - cuts.begin())];
    }

    /// Probability that N(mean, variance) lands nearest each reading (indexed by declaration).
    std::vector<double> masses(double mean, double variance, std::size_t n) const
    {
        std::vector<double> out(n, 0.0);
        const double sd = std::sqrt(variance);
        auto cdf = [&](double x) { return 0.5 * std::erfc(-(x - mean) / (sd * std::numbers::sqrt2)); };
        double prev = 0.0;
        for (std::size_t k = 0; k < readings.size(); ++k) {
            const double next = k < cuts.size() ? cdf(cuts[k]) : 1.0;
            out[readings[k]] = next - prev;
            prev = next;
        }
        return out;
    }
};

/// Reading distribution of alternative `b` at `w` for discrete models: (reading index, probability).
inline std::vector<std::pair<std::size_t, double>> table_readings(const Domain& d, const SensingModel& m, const WorldState& w)
{
    std::vector<std::pair<std::size_t, double>> out;
    double total = 0.0;
    for (std::size_t r = 0; r < m.readings.size(); ++r) {
        const double l = d.reading_likelihood(m, r, w);
        if (l > 0.0) {
            out.emplace_back(r, l);
            total += l;
        }
    }
    for (auto& [r, p] : out) p /= total;
    return out;
}

/// Lazily built transition table over interned (control, world) configurations.
class SimModel {
public:
    static constexpr std::uint32_t kStuck = UINT32_MAX;

    struct Branch {
        double cumulative = 0.0;
        ActionId actual = 0;
        std::uint32_t next_world = 0;
        std::uint32_t next_control = kStuck; // discrete readings
        std::optional<std::size_t> reading;  // declared reading, when discrete and sensed
        const SensingModel* gaussian = nullptr;
        double mean = 0.0;
        std::vector<std::uint32_t> control_by_reading; // Gaussian readings
    };

    SimModel(const CompiledController& cc, const Domain& d) : cc_(cc), d_(d)
    {
        for (const auto& m : d.sensing_models)
            if (m.gaussian && m.quantized()) cuts_.emplace(&m, ReadingCuts(m));
    }

    std::uint32_t intern(const WorldState& w)
    {
        auto [it, fresh] = world_index_.try_emplace(w, static_cast<std::uint32_t>(worlds_.size()));
        if (fresh) {
            worlds_.push_back(w);
            goal_.push_back(-1);
            table_.resize(worlds_.size() * cc_.size());
            built_.resize(worlds_.size() * cc_.size(), false);
        }
        return it->second;
    }

    const WorldState& world(std::uint32_t id) const { return worlds_[id]; }

    bool goal(std::uint32_t id)
    {
        if (goal_[id] < 0) goal_[id] = eval_objective(d_.goal, worlds_[id]) ? 1 : 0;
        return goal_[id] == 1;
    }

    const std::vector<Branch>& branches(std::size_t control, std::uint32_t world)
    {
        const std::size_t slot = static_cast<std::size_t>(world) * cc_.size() + control;
        if (!built_[slot]) {
            auto b = build(control, worlds_[world]);
            table_[slot] = std::move(b); // build may have grown table_
            built_[slot] = true;
        }
        return table_[slot];
    }

    const ReadingCuts& cuts(const SensingModel* m) const { return cuts_.at(m); }

private:
    std::vector<Branch> build(std::size_t control, const WorldState w)
    {
        std::vector<Branch> out;
        const auto outcomes = d_.outcomes_of(cc_.advice[control], w);
        double total = 0.0;
        for (const auto& oc : outcomes) total += oc.likelihood;
        double cum = 0.0;
        auto to_control = [&](ObservationId o) {
            auto t = cc_.delta(control, o);
            return t ? static_cast<std::uint32_t>(*t) : kStuck;
        };
        for (const auto& oc : outcomes) {
            const double p = oc.likelihood / total;
            const std::uint32_t next = intern(d_.apply(oc.action, w));
            const SensingModel* m = d_.sensing_model(oc.action);
            if (!m) {
                cum += p;
                out.push_back({cum, oc.action, next, to_control(kNullObservation), std::nullopt, nullptr, 0.0, {}});
            } else if (m->gaussian) {
                if (!m->quantized())
                    throw UnsupportedModel("sensing model of '" + d_.actions[oc.action].name + "' declares no readings");
                Branch b{0.0, oc.action, next, kStuck, std::nullopt, m, static_cast<double>(w[m->gaussian->mean_fluent]), {}};
                for (const auto& rd : m->readings) b.control_by_reading.push_back(to_control(rd.observation));
                cum += p;
                b.cumulative = cum;
                out.push_back(std::move(b));
            } else {
                for (auto [r, q] : table_readings(d_, *m, w)) {
                    cum += p * q;
                    out.push_back({cum, oc.action, next, to_control(m->readings[r].observation), r, nullptr, 0.0, {}});
                }
            }
        }
        if (!out.empty()) out.back().cumulative = 1.0;
        return out;
    }

    const CompiledController& cc_;
    const Domain& d_;
    std::vector<WorldState> worlds_;
    std::vector<int> goal_;
    std::unordered_map<WorldState, std::uint32_t, WorldStateHash> world_index_;
    std::vector<std::vector<Branch>> table_;
    std::vector<bool> built_;
    std::unordered_map<const SensingModel*, ReadingCuts> cuts_;
};

struct BlockStats {
    std::uint64_t success = 0, terminated = 0, truncated = 0;
    double bel_sum = 0.0;
};

} // namespace detail

inline SimReport simulate(const Controller& c, const Domain& d, const SimOptions& opt)
{
    if (opt.runs == 0) throw SemanticError("simulate: runs must be at least 1");
    const CompiledController cc = compile(c, d);
    const std::size_t cap = opt.step_cap.value_or(default_step_cap(cc, d));
    if (cap == 0) throw SemanticError("simulate: step cap must be at least 1");
    const bool epistemic_goal = !is_objective(d.goal);
    const bool track = opt.track_belief || epistemic_goal;
    const auto tracked = tracked_formula(d.goal);

    std::vector<std::size_t> positive;
    std::vector<double> prior_cum;
    double prior_total = 0.0;
    for (std::size_t i = 0; i < d.initial_worlds.size(); ++i) {
        if (d.initial_worlds[i].weight <= 0.0) continue;
        prior_total += d.initial_worlds[i].weight;
        positive.push_back(i);
        prior_cum.push_back(prior_total);
    }
    if (positive.empty()) throw SemanticError("simulate: prior has no positive weight");
    const BeliefState prior_belief = track ? initial_belief(d) : BeliefState{};

    const std::uint64_t blocks = (opt.runs + kSimBlock - 1) / kSimBlock;
    const std::size_t chunks = std::max<std::size_t>(1, std::min<std::uint64_t>(std::max(1u, opt.workers), blocks));

    auto run_chunk = [&](std::size_t chunk) {
        detail::SimModel model(cc, d);
        std::vector<std::uint32_t> initial_ids;
        for (std::size_t i : positive) initial_ids.push_back(model.intern(d.initial_worlds[i].state));
        const std::uint64_t lo = blocks * chunk / chunks, hi = blocks * (chunk + 1) / chunks;
        std::vector<detail::BlockStats> stats;
        for (std::uint64_t block = lo; block < hi; ++block) {
            std::seed_seq seq{static_cast<std::uint32_t>(opt.seed), static_cast<std::uint32_t>(opt.seed >> 32),
                              static_cast<std::uint32_t>(block)};
            std::mt19937_64 gen(seq);
            detail::BlockStats st;
            const std::uint64_t first = block * kSimBlock, last = std::min(opt.runs, first + kSimBlock);
            for (std::uint64_t run = first; run < last; ++run) {
                const double u = detail::uniform01(gen) * prior_total;
                const std::size_t pick = std::min<std::size_t>(
                    static_cast<std::size_t>(std::upper_bound(prior_cum.begin(), prior_cum.end(), u) - prior_cum.begin()),
                    positive.size() - 1);
                std::uint32_t world = initial_ids[pick];
                std::size_t control = cc.initial;
                BeliefState belief = prior_belief;
                bool alive = true;
                std::size_t steps = 0;
                while (alive && !cc.is_final(control) && steps < cap) {
                    const auto& branches = model.branches(control, world);
                    if (branches.empty()) {
                        alive = false;
                        break;
                    }
                    const double v = detail::uniform01(gen);
                    const auto it = std::upper_bound(branches.begin(), branches.end(), v,
                                                     [](double x, const detail::SimModel::Branch& b) { return x < b.cumulative; });
                    const auto& br = it == branches.end() ? branches.back() : *it;
                    std::uint32_t next_control = br.next_control;
                    Reading reading = Reading::null();
                    if (br.gaussian) {
                        const double z = br.mean + std::sqrt(br.gaussian->gaussian->variance) * detail::standard_normal(gen);
                        const std::size_t r = model.cuts(br.gaussian).nearest(z);
                        next_control = br.control_by_reading[r];
                        reading = Reading{"", z};
                    } else if (br.reading) {
                        const auto& rd = d.sensing_model(br.actual)->readings[*br.reading];
                        reading = Reading{rd.token, rd.value};
                    }
                    if (track) {
                        const ActionId a = cc.advice[control];
                        try {
                            belief = d.actions[a].kind == ActionKind::Sensing
                                         ? condition(belief, a, reading, d)
                                         : progress_observed(belief, a, reading, d);
                        } catch (const ExecutionError&) {
                            alive = false;
                        }
                    }
                    world = br.next_world;
                    ++steps;
                    if (next_control == detail::SimModel::kStuck) {
                        alive = false;
                        break;
                    }
                    control = next_control;
                }
                if (alive && cc.is_final(control)) {
                    ++st.terminated;
                    const bool ok = epistemic_goal ? eval_goal(belief, d.goal) : model.goal(world);
                    if (ok) ++st.success;
                } else if (alive) {
                    ++st.truncated;
                }
                if (track && tracked && !belief.empty()) st.bel_sum += bel(belief, *tracked);
            }
            stats.push_back(st);
        }
        return stats;
    };

    auto per_chunk = parallel_map(chunks, opt.workers, run_chunk);
    detail::BlockStats sum;
    for (const auto& chunk : per_chunk)
        for (const auto& st : chunk) {
            sum.success += st.success;
            sum.terminated += st.terminated;
            sum.truncated += st.truncated;
            sum.bel_sum += st.bel_sum;
        }

    SimReport r;
    r.runs = opt.runs;
    r.seed = opt.seed;
    r.step_cap = cap;
    const double n = static_cast<double>(opt.runs);
    r.success_rate = sum.success / n;
    r.termination_rate = sum.terminated / n;
    r.truncated_rate = sum.truncated / n;
    r.std_error = std::sqrt(r.success_rate * (1.0 - r.success_rate) / n);
    if (track && tracked) r.mean_final_bel = sum.bel_sum / n;
    return r;
}

struct Absorption {
    double success = 0.0;     // reaches QF within the cap with the goal true
    double termination = 0.0; // reaches QF within the cap
    double truncated = 0.0;   // still running after the cap
};

/// Exact counterpart of simulate for objective goals: probability mass pushed
/// forward through the configuration graph for `step_cap` steps.
inline Absorption absorption_probability(const Controller& c, const Domain& d, std::size_t step_cap)
{
    if (!is_objective(d.goal)) throw UnsupportedModel("absorption: goal mentions Bel/Know");
    const CompiledController cc = compile(c, d);
    detail::SimModel model(cc, d);
    using Key = std::pair<std::size_t, std::uint32_t>;
    std::map<Key, double> mass;
    const double total = d.total_initial_weight();
    for (const auto& iw : d.initial_worlds)
        if (iw.weight > 0.0) mass[{cc.initial, model.intern(iw.state)}] += iw.weight / total;

    Absorption out;
    auto absorb = [&](std::map<Key, double>& m) {
        for (auto it = m.begin(); it != m.end();) {
            if (cc.is_final(it->first.first)) {
                out.termination += it->second;
                if (model.goal(it->first.second)) out.success += it->second;
                it = m.erase(it);
            } else {
                ++it;
            }
        }
    };
    absorb(mass);
    for (std::size_t step = 0; step < step_cap && !mass.empty(); ++step) {
        std::map<Key, double> next;
        for (const auto& [key, p] : mass) {
            const auto branches = model.branches(key.first, key.second); // copy: interning may grow the table
            double prev = 0.0;
            for (const auto& br : branches) {
                const double q = br.cumulative - prev;
                prev = br.cumulative;
                if (br.gaussian) {
                    const auto& m = *br.gaussian;
                    const auto probs = model.cuts(&m).masses(br.mean, m.gaussian->variance, m.readings.size());
                    for (std::size_t r = 0; r < probs.size(); ++r)
                        if (br.control_by_reading[r] != detail::SimModel::kStuck && probs[r] > 0.0)
                            next[{br.control_by_reading[r], br.next_world}] += p * q * probs[r];
                } else if (br.next_control != detail::SimModel::kStuck) {
                    next[{br.next_control, br.next_world}] += p * q;
                }
            }
        }
        mass = std::move(next);
        absorb(mass);
    }
    for (const auto& [key, p] : mass) out.truncated += p;
    return out;
}

} // namespace loopverify
