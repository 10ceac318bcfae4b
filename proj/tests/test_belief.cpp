#include <catch_amalgamated.hpp>

#include <random>

#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "support/random_instances.hpp"

using namespace loopverify;
using namespace testsupport;
using Catch::Approx;

namespace {

BeliefState prior_over(const Domain& d, std::initializer_list<std::pair<Value, double>> worlds)
{
    BeliefState b;
    for (const auto& [v, w] : worlds) b.add(ParticleKey{WorldState{{v}}, {}}, w);
    (void)d;
    return b;
}

std::map<Value, double> normalised(const BeliefState& b)
{
    std::map<Value, double> out;
    const double t = b.total();
    for (const auto& [w, p] : b.by_world()) out[w.values[0]] += p / t;
    return out;
}

Reading token(const std::string& t) { return Reading{t, std::nullopt}; }
Reading raw(double v) { return Reading{"", v}; }

} // namespace

TEST_CASE("progress")
{
    const Domain d = domain("treechop_noisyact");
    const ActionId chop = action(d, "chop");

    SECTION("noisy chop from a two-world belief")
    {
        const auto after = normalised(progress(prior_over(d, {{1, 0.5}, {2, 0.5}}), chop, d));
        REQUIRE(after.size() == 3);
        REQUIRE(after.at(0) == Approx(0.45));
        REQUIRE(after.at(1) == Approx(0.5));
        REQUIRE(after.at(2) == Approx(0.05));
    }

    SECTION("worlds where nothing is executable drop out")
    {
        const BeliefState b = progress(prior_over(d, {{0, 0.5}, {3, 0.5}}), chop, d);
        REQUIRE(b.total() == Approx(0.5));
        REQUIRE_FALSE(b.possible(WorldState{{0}}));
        REQUIRE(b.possible(WorldState{{2}}));
    }

    SECTION("annihilation is an error")
    {
        REQUIRE_THROWS_WITH(progress(prior_over(d, {{0, 1.0}}), chop, d),
                            Catch::Matchers::ContainsSubstring("annihilated"));
    }

    SECTION("sensing actions are not progressed blindly")
    {
        REQUIRE_THROWS_AS(progress(initial_belief(d), action(d, "getd"), d), std::logic_error);
    }

    SECTION("weight is conserved when every alternative stays executable")
    {
        BeliefState b = initial_belief(d);
        const double before = b.total();
        b = progress(b, chop, d);
        REQUIRE(b.total() == Approx(before).epsilon(1e-12));

        const Domain saw = domain("fig4_pickup");
        BeliefState s = progress(initial_belief(saw), action(saw, "pickup"), saw);
        REQUIRE(s.total() == Approx(1.0).epsilon(1e-12));
        REQUIRE(bel(s, formula(saw, "(= saw 1)")) == Approx(0.9));
    }

    SECTION("traced particles keep histories but agree per world")
    {
        BeliefOptions traced;
        traced.trace_particles = true;
        const BeliefState prior = prior_over(d, {{1, 0.5}, {2, 0.5}});
        const BeliefState t = progress(prior, chop, d, traced);
        const BeliefState m = progress(prior, chop, d);
        REQUIRE(t.size() == 4);
        REQUIRE(m.size() == 3);
        const auto tw = t.by_world(), mw = m.by_world();
        REQUIRE(tw.size() == mw.size());
        for (const auto& [w, p] : mw) REQUIRE(tw.at(w) == Approx(p));
    }

    SECTION("pruning drops negligible particles")
    {
        BeliefOptions pr;
        pr.prune = 0.06;
        const BeliefState b = progress(prior_over(d, {{1, 0.5}, {2, 0.5}}), chop, d, pr);
        REQUIRE(b.size() == 2);
        REQUIRE_FALSE(b.possible(WorldState{{2}}));
    }
}

TEST_CASE("condition")
{
    SECTION("exact sensing keeps only consistent worlds")
    {
        const Domain d = domain("treechop_exact");
        const ActionId getd = action(d, "getd");
        BeliefState b = prior_over(d, {{0, 0.2}, {1, 0.3}, {4, 0.5}});
        const BeliefState down = condition(b, getd, token("down"), d);
        REQUIRE(down.size() == 1);
        REQUIRE(bel(down, formula(d, "(= d 0)")) == 1.0);
        const BeliefState up = condition(b, getd, token("up"), d);
        REQUIRE(normalised(up).at(1) == Approx(0.375));
        REQUIRE(normalised(up).at(4) == Approx(0.625));
    }

    SECTION("conditioning twice on a sharp reading changes nothing")
    {
        const Domain d = domain("treechop_exact");
        const ActionId getd = action(d, "getd");
        const BeliefState once = condition(initial_belief(d), getd, token("up"), d);
        REQUIRE(condition(once, getd, token("up"), d) == once);
    }

    SECTION("impossible observation is an error")
    {
        const Domain d = domain("treechop_exact");
        REQUIRE_THROWS_WITH(condition(initial_belief(d), action(d, "getd"), token("down"), d),
                            Catch::Matchers::ContainsSubstring("impossible"));
    }

    SECTION("readings must belong to the action")
    {
        const Domain d = domain("treechop_exact");
        REQUIRE_THROWS_AS(condition(initial_belief(d), action(d, "chop"), token("up"), d), SemanticError);
        REQUIRE_THROWS_AS(condition(initial_belief(d), action(d, "getd"), token("sideways"), d), ExecutionError);
    }

    SECTION("Gaussian sensing weighs by density")
    {
        const Domain d = domain("treechop_noisy");
        const BeliefState b = condition(prior_over(d, {{5, 0.5}, {6, 0.5}}), action(d, "getd"), raw(5.25), d);
        const auto n = normalised(b);
        const double l5 = oracle_density(5.25, 5, 0.25), l6 = oracle_density(5.25, 6, 0.25);
        REQUIRE(n.at(5) == Approx(l5 / (l5 + l6)).epsilon(1e-12));
        // a declared token reads as its value
        REQUIRE(condition(initial_belief(d), action(d, "getd"), token("4.5"), d) ==
                condition(initial_belief(d), action(d, "getd"), raw(4.5), d));
    }

    SECTION("sensing physical action")
    {
        const Domain d = domain("fig4_pickup");
        const ActionId chop = action(d, "chop");
        const BeliefState with_saw = progress(initial_belief(d), action(d, "pickup"), d);
        const BeliefState down = progress_observed(with_saw, chop, token("down"), d);
        REQUIRE(know(down, formula(d, "(= d 0)")));
        const BeliefState up = progress_observed(with_saw, chop, token("up"), d);
        REQUIRE(know(up, formula(d, "(and (= saw 0) (= d 1))")));
        REQUIRE_THROWS_AS(progress_observed(initial_belief(d), chop, token("down"), d), ExecutionError);
    }
}

TEST_CASE("bel, know and eval_goal")
{
    const Domain d = domain("treechop_exact");
    const BeliefState b = initial_belief(d);

    REQUIRE(bel(b, formula(d, "(<= d 5)")) == Approx(0.5));
    REQUIRE(bel(b, formula(d, "(>= d 1)")) == 1.0);
    REQUIRE(bel(b, formula(d, "(= d 0)")) == 0.0);
    REQUIRE(know(b, formula(d, "(>= d 1)")));
    REQUIRE_FALSE(know(b, formula(d, "(>= d 2)")));
    REQUIRE_THROWS_AS(bel(BeliefState{}, formula(d, "(= d 0)")), ExecutionError);

    SECTION("goals mix objective and epistemic parts")
    {
        REQUIRE(eval_goal(b, formula(d, "(> (bel (<= d 5)) 0.4)")));
        REQUIRE_FALSE(eval_goal(b, formula(d, "(> (bel (<= d 5)) 0.51)")));
        REQUIRE(eval_goal(b, formula(d, "(>= (bel (<= d 5)) 0.49)")));
        REQUIRE(eval_goal(b, formula(d, "(< 0.4 (bel (<= d 5)))")));
        // objective conjunct must hold at every positive particle
        REQUIRE_FALSE(eval_goal(b, formula(d, "(and (<= d 9) (know (>= d 1)))")));
        REQUIRE(eval_goal(b, formula(d, "(and (<= d 10) (know (>= d 1)))")));
        REQUIRE(eval_goal(b, formula(d, "(or (= d 1) (not (= d 1)))")));
    }

    SECTION("tracked formula")
    {
        REQUIRE(to_string(*tracked_formula(formula(d, "(> (bel (<= d 5)) 0.8)")), d) == "(<= d 5)");
        REQUIRE(to_string(*tracked_formula(formula(d, "(know (= d 0))")), d) == "(= d 0)");
        REQUIRE(to_string(*tracked_formula(formula(d, "(= d 0)")), d) == "(= d 0)");
        REQUIRE(to_string(*tracked_formula(formula(d, "(and (= d 0) (know (< d 3)))")), d) == "(< d 3)");
    }

    SECTION("json")
    {
        const json j = belief_to_json(prior_over(d, {{2, 0.25}}), d);
        REQUIRE(j.size() == 1);
        REQUIRE(j[0]["state"]["d"] == 2);
        REQUIRE(j[0]["weight"] == 0.25);
        REQUIRE_FALSE(j[0].contains("history"));
    }
}

TEST_CASE("chop, sense up, chop on the noisy-acting tree")
{
    const Domain d = domain("treechop_belief");
    const ActionId chop = action(d, "chop"), getd = action(d, "getd");
    const Formula small = formula(d, "(< d 10)");

    BeliefState b = initial_belief(d);
    REQUIRE(bel(b, small) == Approx(0.9));
    b = progress(b, chop, d);
    REQUIRE(bel(b, small) == Approx(0.99)); // only a failed chop on d=10 stays at 10
    b = condition(b, getd, token("up"), d);
    b = progress(b, chop, d);
    const double want = oracle_bel(oracle_belief(d, {{chop, {}}, {getd, token("up")}, {chop, {}}}), small);
    REQUIRE(bel(b, small) == Approx(want).epsilon(1e-12));
    REQUIRE(bel(b, small) == Approx(0.998901).margin(1e-6));
    REQUIRE(bel(b, small) < 0.999);
}

TEST_CASE("noisy effector and sonar reference values")
{
    const Domain d = domain("treechop_noisy");
    const ActionId chop = action(d, "chop"), getd = action(d, "getd");
    const Formula f = formula(d, "(<= d 5)");

    // reference values from an independent enumeration script
    const double expected[] = {0.5000000000000001, 0.6000000000000001, 0.5000000000009871, 0.9396664096144087,
                               0.9987663617719025, 0.999999658346819};
    std::vector<OracleStep> steps;
    BeliefState b = initial_belief(d);
    REQUIRE(bel(b, f) == Approx(expected[0]).margin(1e-12));

    auto check = [&](int k) {
        INFO("step " << k);
        REQUIRE(bel(b, f) == Approx(expected[k]).margin(1e-9));
        REQUIRE(bel(b, f) == Approx(oracle_bel(oracle_belief(d, steps), f)).margin(1e-12));
    };
    b = progress(b, chop, d);
    steps.push_back({chop, {}});
    check(1);
    b = condition(b, getd, raw(5.5), d);
    steps.push_back({getd, raw(5.5)});
    check(2);
    b = progress(b, chop, d);
    steps.push_back({chop, {}});
    check(3);
    b = condition(b, getd, raw(4.5), d);
    steps.push_back({getd, raw(4.5)});
    check(4);
    b = condition(b, getd, raw(3.9), d);
    steps.push_back({getd, raw(3.9)});
    check(5);
}

TEST_CASE("belief properties")
{
    SECTION("rescaling the prior leaves every Bel unchanged")
    {
        const Domain d = domain("treechop_noisy");
        Domain scaled = d;
        for (auto& iw : scaled.initial_worlds) iw.weight *= 1000.0;
        const ActionId chop = action(d, "chop"), getd = action(d, "getd");
        BeliefState a = initial_belief(d), b = initial_belief(scaled);
        for (double z : {5.5, 4.5, 6.5}) {
            a = condition(progress(a, chop, d), getd, raw(z), d);
            b = condition(progress(b, chop, scaled), getd, raw(z), scaled);
            for (Value v = 0; v <= 10; ++v) {
                const Formula g = formula(d, "(<= d " + std::to_string(v) + ")");
                REQUIRE(bel(a, g) == Approx(bel(b, g)).margin(1e-12));
            }
        }
    }

    SECTION("agrees with path enumeration on random domains")
    {
        InstanceGenerator gen(2024);
        std::mt19937_64 rng(99);
        InstanceShape shape;
        shape.noisy = true;
        int compared = 0;
        for (int i = 0; i < 200; ++i) {
            const Instance inst = gen.next(shape);
            const Domain& d = inst.domain;
            std::vector<OracleStep> steps;
            BeliefState b = initial_belief(d);
            bool dead = false;
            const int len = static_cast<int>(rng() % 4) + 1;
            for (int k = 0; k < len && !dead; ++k) {
                const auto advisable = d.advisable_actions();
                const ActionId a = advisable[rng() % advisable.size()];
                OracleStep s{a, {}};
                try {
                    if (d.actions[a].kind == ActionKind::Sensing) {
                        s.reading = token(rng() % 2 ? "yes" : "no");
                        b = condition(b, a, *s.reading, d);
                    } else {
                        b = progress(b, a, d);
                    }
                } catch (const ExecutionError&) {
                    dead = true;
                }
                steps.push_back(s);
            }
            const auto want = oracle_belief(d, steps);
            double want_total = 0.0;
            for (const auto& [w, p] : want) want_total += p;
            if (dead) {
                REQUIRE(want_total == 0.0);
                continue;
            }
            ++compared;
            const auto got = b.by_world();
            REQUIRE(got.size() == want.size());
            for (const auto& [w, p] : want) REQUIRE(got.at(w) == Approx(p).epsilon(1e-12));
        }
        REQUIRE(compared >= 100);
    }
}
