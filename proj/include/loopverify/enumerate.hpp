#pragma once

// Canonical enumeration of finite memoryless plans.
//
// A controller is canonical when its states are numbered in breadth-first
// discovery order from Q0, expanding each state's transitions by ascending
// observation id. Every controller whose states are all reachable from Q0 has
// exactly one canonical relabelling, so generating only canonical ones yields
// each isomorphism class once. Transitions are generated for exactly the
// observations the advised action can produce; entries on other observations
// can never fire and a missing entry can only block a run.

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "loopverify/controller.hpp"
#include "loopverify/theory.hpp"

namespace loopverify {

/// BFS-relabelled encoding of the Q0-reachable part of `c`. Two controllers have
/// the same canonical form iff their reachable parts are isomorphic.
inline std::string canonical_form(const Controller& c, const Domain& d)
{
    const CompiledController cc = compile(c, d);
    std::vector<std::size_t> label(cc.size(), static_cast<std::size_t>(-1));
    std::vector<std::size_t> order{cc.initial};
    label[cc.initial] = 0;
    std::string out;
    for (std::size_t k = 0; k < order.size(); ++k) {
        const std::size_t q = order[k];
        if (cc.is_final(q)) {
            out += "F;";
            continue;
        }
        out += d.actions[cc.advice[q]].name + "[";
        for (ObservationId o = 0; o < d.observations.size(); ++o) {
            auto t = cc.delta(q, o);
            if (!t) continue;
            if (label[*t] == static_cast<std::size_t>(-1)) {
                label[*t] = order.size();
                order.push_back(*t);
            }
            out += d.observations[o] + ">" + std::to_string(label[*t]) + ",";
        }
        out += "];";
    }
    return out;
}

class ControllerEnumerator {
public:
    ControllerEnumerator(const Domain& d, std::size_t max_states) : d_(d), max_states_(max_states)
    {
        for (ActionId a : d.advisable_actions()) {
            actions_.push_back(a);
            observations_.push_back(d.relevant_observations(a));
        }
    }

    /// Calls `sink` on every canonical controller with 1..max_states states, smaller
    /// controllers first. Stops early when `sink` returns false.
    void run(const std::function<bool(const Controller&)>& sink)
    {
        sink_ = &sink;
        for (size_ = 1; size_ <= max_states_; ++size_) {
            slots_.assign(size_, Slot{});
            if (!place(0, 1, false)) return;
        }
    }

private:
    struct Slot {
        bool final = false;
        std::size_t action = 0; // index into actions_
        std::vector<std::size_t> targets;
    };

    bool place(std::size_t i, std::size_t discovered, bool has_final)
    {
        if (i == discovered) {
            if (discovered == size_ && has_final) return (*sink_)(build());
            return true;
        }
        if (!has_final) {
            slots_[i].final = true;
            if (!place(i + 1, discovered, true)) return false;
            slots_[i].final = false;
        }
        for (std::size_t a = 0; a < actions_.size(); ++a) {
            slots_[i].action = a;
            slots_[i].targets.assign(observations_[a].size(), 0);
            if (!assign(i, 0, discovered, has_final)) return false;
        }
        return true;
    }

    bool assign(std::size_t i, std::size_t k, std::size_t discovered, bool has_final)
    {
        Slot& slot = slots_[i];
        if (k == slot.targets.size()) return place(i + 1, discovered, has_final);
        for (std::size_t t = 0; t < discovered; ++t) {
            slots_[i].targets[k] = t;
            if (!assign(i, k + 1, discovered, has_final)) return false;
        }
        if (discovered < size_) {
            slots_[i].targets[k] = discovered;
            if (!assign(i, k + 1, discovered + 1, has_final)) return false;
        }
        return true;
    }

    Controller build() const
    {
        Controller c;
        for (std::size_t q = 0; q < size_; ++q) c.states.push_back("q" + std::to_string(q));
        c.initial = c.states[0];
        for (std::size_t q = 0; q < size_; ++q) {
            const Slot& s = slots_[q];
            if (s.final) {
                c.final = c.states[q];
                continue;
            }
            c.advice[c.states[q]] = d_.actions[actions_[s.action]].name;
            const auto& obs = observations_[s.action];
            for (std::size_t k = 0; k < obs.size(); ++k)
                c.transitions.push_back({c.states[q], d_.observations[obs[k]], c.states[s.targets[k]]});
        }
        return c;
    }

    const Domain& d_;
    std::size_t max_states_;
    std::vector<ActionId> actions_;
    std::vector<std::vector<ObservationId>> observations_;
    std::size_t size_ = 0;
    std::vector<Slot> slots_;
    const std::function<bool(const Controller&)>* sink_ = nullptr;
};

inline void enumerate_controllers(const Domain& d, std::size_t max_states,
                                  const std::function<bool(const Controller&)>& sink)
{
    ControllerEnumerator(d, max_states).run(sink);
}

inline std::vector<Controller> enumerate_controllers(const Domain& d, std::size_t max_states)
{
    std::vector<Controller> out;
    enumerate_controllers(d, max_states, [&](const Controller& c) {
        out.push_back(c);
        return true;
    });
    return out;
}

} // namespace loopverify
