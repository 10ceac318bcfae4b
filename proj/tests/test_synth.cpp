#include <catch_amalgamated.hpp>

#include <set>

#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "support/random_instances.hpp"

using namespace loopverify;
using namespace testsupport;

namespace {

Controller to_controller(const Labelled& l, const Domain& d)
{
    Controller c;
    for (std::size_t q = 0; q < l.n; ++q) c.states.push_back("s" + std::to_string(q));
    c.initial = c.states[l.initial];
    c.final = c.states[l.final];
    for (std::size_t q = 0; q < l.n; ++q) {
        if (q == l.final) continue;
        c.advice[c.states[q]] = d.actions[l.advice[q]].name;
        const auto obs = d.relevant_observations(l.advice[q]);
        for (std::size_t k = 0; k < obs.size(); ++k)
            c.transitions.push_back({c.states[q], d.observations[obs[k]], c.states[l.targets[q][k]]});
    }
    return c;
}

using OraclePredicate = std::function<bool(const ReachOracle&, const WorldState&)>;

// Isomorphism classes of controllers with up to n states that satisfy `ok` at
// every positive initial world, by brute force.
std::set<std::string> brute_solutions(const Domain& d, std::size_t n, const OraclePredicate& ok)
{
    std::set<std::string> out;
    for (std::size_t k = 1; k <= n; ++k)
        for (const auto& l : brute_controllers(d, k)) {
            const Controller c = to_controller(l, d);
            const CompiledController cc = compile(c, d);
            ReachOracle oracle(cc, d);
            bool good = true;
            for (const auto& iw : d.initial_worlds)
                if (iw.weight > 0 && !ok(oracle, iw.state)) good = false;
            if (good) out.insert(brute_canonical(l));
        }
    return out;
}

std::set<std::string> synth_solutions(const Domain& d, std::size_t n, const std::string& criterion)
{
    SynthRequest req{&d, parse_criterion(criterion), n, std::numeric_limits<std::size_t>::max()};
    std::set<std::string> out;
    for (const auto& s : synthesize(req).solutions) out.insert(brute_canonical(label(s.controller, d)));
    return out;
}

} // namespace

TEST_CASE("parse_criterion")
{
    REQUIRE(parse_criterion("def4").kind == CriterionKind::Def4);
    REQUIRE(parse_criterion("def6+termination").kind == CriterionKind::Def6Termination);
    REQUIRE(parse_criterion("weight:0.25").kappa == 0.25);
    REQUIRE(parse_criterion("mass:1").kappa == 1.0);
    REQUIRE(parse_criterion("def9").mode == Def9Mode::Existential);
    REQUIRE(parse_criterion("def9:adversarial").mode == Def9Mode::Adversarial);
    REQUIRE_THROWS_AS(parse_criterion("mass:1.5"), SemanticError);
    REQUIRE_THROWS_AS(parse_criterion("weight:abc"), SemanticError);
    REQUIRE_THROWS_AS(parse_criterion("def7"), SemanticError);
    for (const char* text : {"def4", "def6", "termination", "def6+termination", "weight:0.3", "mass:0.8",
                             "def9:existential", "def9:adversarial"})
        REQUIRE(to_string(parse_criterion(text)) == text);
}

TEST_CASE("synthesize")
{
    SECTION("smallest plan for the exact tree is a chop-and-sense loop")
    {
        const Domain d = domain("treechop_exact");
        const SynthResult r = synthesize({&d, parse_criterion("def4"), 3, 1});
        REQUIRE(r.solutions.size() == 1);
        const Controller& c = r.solutions[0].controller;
        REQUIRE(c.states.size() == 3);
        REQUIRE(verify_def4(c, d).status == Status::Holds);
        std::set<std::string> actions;
        for (const auto& [q, a] : c.advice) actions.insert(a);
        REQUIRE(actions == std::set<std::string>{"chop", "getd"});
        REQUIRE(r.unknown == 0);
        // same actions and observations as the hand-written loop, world by world
        auto runs = [&](const Controller& x) {
            std::vector<std::vector<std::pair<std::optional<ActionId>, std::optional<ObservationId>>>> out;
            for (const auto& t : verify_def4(x, d).witnesses) {
                out.emplace_back();
                for (const auto& s : t) out.back().emplace_back(s.action, s.observation);
            }
            return out;
        };
        REQUIRE(runs(c) == runs(controller("fig1")));
    }

    SECTION("one state admits only the empty plan, which fails")
    {
        const Domain d = domain("treechop_exact");
        const SynthResult r = synthesize({&d, parse_criterion("def4"), 1, 1});
        REQUIRE(r.solutions.empty());
        REQUIRE(r.candidates == 1);
    }

    SECTION("noisy chopping admits a terminating weak plan")
    {
        const Domain d = domain("treechop_noisyact");
        const SynthResult r = synthesize({&d, parse_criterion("def6+termination"), 3, 4});
        REQUIRE_FALSE(r.solutions.empty());
        for (const auto& s : r.solutions) {
            REQUIRE(verify_def6(s.controller, d).status == Status::Holds);
            REQUIRE(verify_termination(s.controller, d).status == Status::Holds);
        }
        REQUIRE_THROWS_AS(synthesize({&d, parse_criterion("def4"), 3, 1}), UnsupportedModel);
    }

    SECTION("solutions come in enumeration order and respect the limit")
    {
        const Domain d = domain("treechop_noisyact");
        const SynthResult r = synthesize({&d, parse_criterion("def6"), 3, 5});
        REQUIRE(r.solutions.size() <= 5);
        for (std::size_t k = 1; k < r.solutions.size(); ++k) REQUIRE(r.solutions[k - 1].index < r.solutions[k].index);
        const auto all = enumerate_controllers(d, 3);
        for (const auto& s : r.solutions) REQUIRE(all.at(s.index) == s.controller);
    }

    SECTION("worker count does not change the result")
    {
        const Domain d = domain("treechop_metal");
        const SynthRequest req{&d, parse_criterion("mass:0.8"), 3, 50};
        CheckOptions one, three;
        three.workers = 3;
        const SynthResult a = synthesize(req, one);
        const SynthResult b = synthesize(req, three);
        REQUIRE(a.candidates == b.candidates);
        REQUIRE(a.solutions.size() == b.solutions.size());
        for (std::size_t k = 0; k < a.solutions.size(); ++k) {
            REQUIRE(a.solutions[k].index == b.solutions[k].index);
            REQUIRE(a.solutions[k].controller == b.solutions[k].controller);
        }
    }

    SECTION("epistemic criterion on the saw domain")
    {
        const Domain d = domain("fig4_pickup");
        const SynthResult r = synthesize({&d, parse_criterion("def9:existential"), 3, 1});
        REQUIRE(r.solutions.size() == 1);
        REQUIRE(verify_def9(r.solutions[0].controller, d, Def9Mode::Existential).status == Status::Holds);
    }

    SECTION("zero limit does no work")
    {
        const Domain d = domain("treechop_exact");
        const SynthResult r = synthesize({&d, parse_criterion("def4"), 3, 0});
        REQUIRE(r.solutions.empty());
        REQUIRE(r.candidates == 0);
    }
}

TEST_CASE("synthesize finds exactly the brute-force solutions")
{
    SECTION("exact tree, deterministic runs")
    {
        const Domain d = domain("treechop_exact");
        const auto want = brute_solutions(d, 3, [](const ReachOracle& o, const WorldState& w) { return o.deterministic_run_succeeds(w); });
        REQUIRE_FALSE(want.empty());
        REQUIRE(synth_solutions(d, 3, "def4") == want);
    }

    SECTION("noisy tree, terminating weak plans")
    {
        const Domain d = domain("treechop_noisyact");
        const auto want = brute_solutions(d, 3, [](const ReachOracle& o, const WorldState& w) {
            return o.weak_plan(w) && o.terminates(w);
        });
        REQUIRE(synth_solutions(d, 3, "def6+termination") == want);
    }

    SECTION("random domains")
    {
        InstanceGenerator gen(31337);
        InstanceShape shape;
        shape.max_actions = 2;
        shape.max_fluents = 2;
        shape.max_values = 3;
        shape.noisy = true;
        for (int i = 0; i < 15; ++i) {
            const Instance inst = gen.next(shape);
            INFO(inst.domain_json.dump());
            const auto want = brute_solutions(inst.domain, 3, [](const ReachOracle& o, const WorldState& w) { return o.weak_plan(w); });
            REQUIRE(synth_solutions(inst.domain, 3, "def6") == want);
            const auto ter = brute_solutions(inst.domain, 3, [](const ReachOracle& o, const WorldState& w) { return o.terminates(w); });
            REQUIRE(synth_solutions(inst.domain, 3, "termination") == ter);
        }
    }
}
