#pragma once

// Finite memoryless plans <Q, Q0, QF, gamma, delta>. A Controller is plain data
// naming actions and observations by token, so files with mistakes can be
// loaded and reported on; `compile` binds a valid one to a Domain.

#include <map>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "loopverify/domain_io.hpp"
#include "loopverify/error.hpp"
#include "loopverify/theory.hpp"

namespace loopverify {

struct Transition {
    std::string from;
    std::string observation;
    std::string to;

    friend bool operator==(const Transition&, const Transition&) = default;
};

struct Controller {
    std::vector<std::string> states;
    std::string initial;
    std::string final;
    std::map<std::string, std::string> advice; // state -> action name
    std::vector<Transition> transitions;

    friend bool operator==(const Controller&, const Controller&) = default;
};

enum class DefectKind {
    DuplicateState,
    UnknownState,
    MissingAdvice,
    AdviceOnFinal,
    UnknownAction,
    NotAdvisable,
    TransitionFromFinal,
    UnknownObservation,
    DuplicateTransition,
    MissingTransition,
};

struct Defect {
    DefectKind kind;
    std::string message;
};

/// Structural check against `d`. With `strict`, delta must also be total over the
/// observations each advised action can produce.
inline std::vector<Defect> validate(const Controller& c, const Domain& d, bool strict = false)
{
    std::vector<Defect> defects;
    std::set<std::string> names;
    for (const auto& s : c.states)
        if (!names.insert(s).second) defects.push_back({DefectKind::DuplicateState, "duplicate state '" + s + "'"});
    auto known = [&](const std::string& s) { return names.count(s) > 0; };

    if (!known(c.initial)) defects.push_back({DefectKind::UnknownState, "initial state '" + c.initial + "' is not declared"});
    if (!known(c.final)) defects.push_back({DefectKind::UnknownState, "final state '" + c.final + "' is not declared"});

    for (const auto& [state, action] : c.advice) {
        if (!known(state)) {
            defects.push_back({DefectKind::UnknownState, "advice for undeclared state '" + state + "'"});
            continue;
        }
        if (state == c.final) defects.push_back({DefectKind::AdviceOnFinal, "final state '" + state + "' advises '" + action + "'"});
        auto a = d.find_action(action);
        if (!a) defects.push_back({DefectKind::UnknownAction, "state '" + state + "' advises unknown action '" + action + "'"});
        else if (!d.actions[*a].advisable)
            defects.push_back({DefectKind::NotAdvisable, "state '" + state + "' advises nature-only action '" + action + "'"});
    }
    for (const auto& s : c.states)
        if (s != c.final && !c.advice.count(s))
            defects.push_back({DefectKind::MissingAdvice, "state '" + s + "' advises no action"});

    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& t : c.transitions) {
        if (!known(t.from) || !known(t.to)) {
            defects.push_back({DefectKind::UnknownState, "transition " + t.from + " --" + t.observation + "--> " + t.to +
                                                             " mentions an undeclared state"});
            continue;
        }
        if (t.from == c.final)
            defects.push_back({DefectKind::TransitionFromFinal, "transition out of final state '" + t.from + "'"});
        if (!d.find_observation(t.observation))
            defects.push_back({DefectKind::UnknownObservation, "unknown observation '" + t.observation + "'"});
        if (!seen.insert({t.from, t.observation}).second)
            defects.push_back({DefectKind::DuplicateTransition,
                               "two transitions from '" + t.from + "' on '" + t.observation + "'"});
    }

    if (strict) {
        for (const auto& [state, action] : c.advice) {
            auto a = d.find_action(action);
            if (!a || state == c.final) continue;
            for (ObservationId o : d.relevant_observations(*a))
                if (!seen.count({state, d.observations[o]}))
                    defects.push_back({DefectKind::MissingTransition,
                                       "no transition from '" + state + "' on '" + d.observations[o] + "'"});
        }
    }
    return defects;
}

/// A controller bound to a domain: states, actions and observations by index.
struct CompiledController {
    std::vector<std::string> names;
    std::size_t initial = 0;
    std::size_t final = 0;
    std::vector<ActionId> advice;                              // unused at `final`
    std::vector<std::vector<std::optional<std::size_t>>> next; // [state][observation]

    std::size_t size() const { return names.size(); }
    bool is_final(std::size_t q) const { return q == final; }
    std::optional<std::size_t> delta(std::size_t q, ObservationId o) const { return next[q][o]; }
};

inline CompiledController compile(const Controller& c, const Domain& d, bool strict = false)
{
    auto defects = validate(c, d, strict);
    if (!defects.empty()) {
        std::string msg = "invalid controller:";
        for (const auto& def : defects) msg += "\n  " + def.message;
        throw SemanticError(msg);
    }
    CompiledController cc;
    cc.names = c.states;
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < c.states.size(); ++i) index[c.states[i]] = i;
    cc.initial = index.at(c.initial);
    cc.final = index.at(c.final);
    cc.advice.assign(c.states.size(), 0);
    for (const auto& [state, action] : c.advice) cc.advice[index.at(state)] = *d.find_action(action);
    cc.next.assign(c.states.size(), std::vector<std::optional<std::size_t>>(d.observations.size()));
    for (const auto& t : c.transitions) cc.next[index.at(t.from)][*d.find_observation(t.observation)] = index.at(t.to);
    return cc;
}

// ---------------------------------------------------------------------------
// JSON

inline Controller controller_from_json(const json& j)
{
    try {
        if (!j.is_object()) throw SemanticError("controller: expected a JSON object");
        Controller c;
        c.states = j.at("states").get<std::vector<std::string>>();
        c.initial = j.at("initial").get<std::string>();
        c.final = j.at("final").get<std::string>();
        if (j.contains("advice")) c.advice = j["advice"].get<std::map<std::string, std::string>>();
        if (j.contains("transitions")) {
            for (const auto& t : j["transitions"]) {
                if (!t.is_array() || t.size() != 3) throw SemanticError("controller: transitions are [state, observation, state]");
                c.transitions.push_back({t[0].get<std::string>(), t[1].get<std::string>(), t[2].get<std::string>()});
            }
        }
        return c;
    } catch (const json::exception& e) {
        throw SemanticError(std::string("controller: ") + e.what());
    }
}

inline json controller_to_json(const Controller& c)
{
    json j;
    j["states"] = c.states;
    j["initial"] = c.initial;
    j["final"] = c.final;
    j["advice"] = c.advice;
    j["transitions"] = json::array();
    for (const auto& t : c.transitions) j["transitions"].push_back({t.from, t.observation, t.to});
    return j;
}

inline Controller parse_controller(std::string_view text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("controller: invalid JSON: ") + e.what(), e.byte);
    }
    return controller_from_json(j);
}

inline Controller load_controller(const std::string& path)
{
    return parse_controller(read_text_file(path));
}

// ---------------------------------------------------------------------------
// GraphViz

namespace detail {

inline std::string dot_escape(const std::string& s)
{
    std::string out;
    for (char ch : s) {
        if (ch == '"' || ch == '\\') out += '\\';
        out += ch;
    }
    return out;
}

inline std::string dot_unescape(const std::string& s)
{
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\\' && i + 1 < s.size()) ++i;
        out += s[i];
    }
    return out;
}

} // namespace detail

/// Deterministic DOT rendering: one node per state labelled with its advice,
/// bold initial state, double circle for the final state, edges labelled with
/// observations.
inline std::string export_dot(const Controller& c)
{
    using detail::dot_escape;
    std::ostringstream os;
    os << "digraph controller {\n";
    os << "  rankdir=LR;\n";
    os << "  node [shape=circle];\n";
    for (const auto& s : c.states) {
        os << "  \"" << dot_escape(s) << "\" [";
        if (s == c.final) {
            os << "shape=doublecircle, label=\"" << dot_escape(s) << "\"";
        } else {
            auto it = c.advice.find(s);
            os << "label=\"" << dot_escape(s) << "\\n" << dot_escape(it == c.advice.end() ? "" : it->second) << "\"";
        }
        if (s == c.initial) os << ", style=bold";
        os << "];\n";
    }
    for (const auto& t : c.transitions)
        os << "  \"" << dot_escape(t.from) << "\" -> \"" << dot_escape(t.to) << "\" [label=\"" << dot_escape(t.observation)
           << "\"];\n";
    os << "}\n";
    return os.str();
}

/// Reads back the subset of DOT that export_dot writes.
inline Controller parse_dot(const std::string& text)
{
    static const std::regex node_re(R"re(^\s*"((?:[^"\\]|\\.)*)" \[(.*)\];\s*$)re");
    static const std::regex edge_re(R"re(^\s*"((?:[^"\\]|\\.)*)" -> "((?:[^"\\]|\\.)*)" \[label="((?:[^"\\]|\\.)*)"\];\s*$)re");
    static const std::regex label_re(R"re(label="((?:[^"\\]|\\.)*)")re");
    Controller c;
    std::istringstream in(text);
    std::string line;
    bool have_initial = false, have_final = false;
    while (std::getline(in, line)) {
        std::smatch m;
        if (std::regex_match(line, m, edge_re)) {
            c.transitions.push_back({detail::dot_unescape(m[1]), detail::dot_unescape(m[3]), detail::dot_unescape(m[2])});
        } else if (std::regex_match(line, m, node_re)) {
            const std::string name = detail::dot_unescape(m[1]);
            const std::string attrs = m[2];
            c.states.push_back(name);
            if (attrs.find("style=bold") != std::string::npos) {
                c.initial = name;
                have_initial = true;
            }
            if (attrs.find("shape=doublecircle") != std::string::npos) {
                c.final = name;
                have_final = true;
                continue;
            }
            std::smatch lm;
            if (!std::regex_search(attrs, lm, label_re)) throw SemanticError("dot: node '" + name + "' has no label");
            const std::string label = lm[1];
            const auto nl = label.rfind("\\n");
            if (nl == std::string::npos) throw SemanticError("dot: node '" + name + "' label lacks an action");
            c.advice[name] = detail::dot_unescape(label.substr(nl + 2));
        }
    }
    if (!have_initial || !have_final) throw SemanticError("dot: initial or final state not marked");
    return c;
}

} // namespace loopverify
