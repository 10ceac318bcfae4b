#include <catch_amalgamated.hpp>

#include <cmath>

#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "support/random_instances.hpp"

using namespace loopverify;
using namespace testsupport;
using Catch::Approx;

namespace {

SimOptions sim(std::uint64_t runs, std::uint64_t seed, std::optional<std::size_t> cap = {}, unsigned workers = 1)
{
    SimOptions o;
    o.runs = runs;
    o.seed = seed;
    o.step_cap = cap;
    o.workers = workers;
    return o;
}

double binomial_tail(int n, int k, double p)
{
    double s = 0.0;
    for (int i = k; i <= n; ++i) s += std::exp(std::lgamma(n + 1) - std::lgamma(i + 1) - std::lgamma(n - i + 1)) *
                                       std::pow(p, i) * std::pow(1 - p, n - i);
    return s;
}

// Exact-sensing push-forward written against the oracle helpers only.
// Alternatives are renormalised over those executable at the current world.
struct OracleAbsorption {
    double success = 0.0, termination = 0.0;
};

OracleAbsorption oracle_absorption(const Controller& c, const Domain& d, std::size_t cap)
{
    const CompiledController cc = compile(c, d);
    std::map<OracleConfig, double> mass;
    const double total = d.total_initial_weight();
    for (const auto& iw : d.initial_worlds)
        if (iw.weight > 0) mass[{cc.initial, iw.state}] += iw.weight / total;
    OracleAbsorption out;
    for (std::size_t step = 0;; ++step) {
        std::map<OracleConfig, double> next;
        for (const auto& [x, p] : mass) {
            if (cc.is_final(x.q)) {
                out.termination += p;
                if (eval_objective(d.goal, x.w)) out.success += p;
                continue;
            }
            if (step == cap) continue;
            double norm = 0.0;
            const auto alts = oracle_outcomes(d, cc.advice[x.q], x.w);
            for (const auto& [b, l] : alts)
                if (d.poss(b, x.w)) norm += l;
            for (const auto& [b, l] : alts) {
                if (!d.poss(b, x.w) || l <= 0) continue;
                auto o = oracle_observation(d, b, x.w);
                if (!o) continue;
                auto q = cc.delta(x.q, *o);
                if (q) next[{*q, d.apply(b, x.w)}] += p * l / norm;
            }
        }
        if (step == cap || next.empty()) break;
        mass = std::move(next);
    }
    return out;
}

} // namespace

TEST_CASE("simulate")
{
    SECTION("noise-free domain succeeds every time")
    {
        const SimReport r = simulate(controller("fig1"), domain("treechop_exact"), sim(5000, 1));
        REQUIRE(r.success_rate == 1.0);
        REQUIRE(r.termination_rate == 1.0);
        REQUIRE(r.truncated_rate == 0.0);
        REQUIRE(r.std_error == 0.0);
        REQUIRE(r.step_cap == 10 * 3 * 11);
        REQUIRE_FALSE(r.mean_final_bel);
    }

    SECTION("same seed, same report; worker count does not matter")
    {
        const Domain d = domain("treechop_noisyact");
        const SimReport a = simulate(controller("fig1"), d, sim(20000, 42, 12, 1));
        const SimReport b = simulate(controller("fig1"), d, sim(20000, 42, 12, 1));
        const SimReport c = simulate(controller("fig1"), d, sim(20000, 42, 12, 4));
        REQUIRE(report_to_json(a) == report_to_json(b));
        REQUIRE(report_to_json(a) == report_to_json(c));
        const SimReport other = simulate(controller("fig1"), d, sim(20000, 43, 12, 1));
        REQUIRE(other.success_rate != a.success_rate);
    }

    SECTION("noisy chopping matches the binomial count of successful chops")
    {
        // each attempt is a chop then a sense: k successes within 15 attempts fit in 30 steps
        double want = 0.0;
        for (int k = 1; k <= 10; ++k) want += 0.1 * binomial_tail(15, k, 0.9);
        const SimReport r = simulate(controller("fig1"), domain("treechop_noisyact"), sim(100000, 7, 30));
        REQUIRE(std::abs(r.success_rate - want) <= 4 * r.std_error);
        const Absorption a = absorption_probability(controller("fig1"), domain("treechop_noisyact"), 30);
        REQUIRE(a.success == Approx(want).epsilon(1e-12));
    }

    SECTION("a metal tree is never felled")
    {
        const SimReport r = simulate(controller("fig1"), domain("treechop_metal"), sim(50000, 3));
        REQUIRE(std::abs(r.success_rate - 0.8) <= 4 * r.std_error);
        REQUIRE(r.termination_rate == r.success_rate);
        REQUIRE(r.truncated_rate == Approx(1.0 - r.success_rate));
    }

    SECTION("epistemic goals track belief")
    {
        const Domain d = domain("treechop_noisy");
        const SimReport r = simulate(controller("fig3_noisy"), d, sim(2000, 5, 40));
        REQUIRE(r.mean_final_bel);
        REQUIRE(*r.mean_final_bel > 0.5);
        REQUIRE(*r.mean_final_bel <= 1.0);
        REQUIRE(r.termination_rate >= r.success_rate);
        REQUIRE_THROWS_AS(absorption_probability(controller("fig3_noisy"), d, 40), UnsupportedModel);
    }

    SECTION("optional belief tracking on objective goals")
    {
        SimOptions o = sim(1000, 9, 30);
        o.track_belief = true;
        const SimReport r = simulate(controller("fig1"), domain("treechop_noisyact"), o);
        REQUIRE(r.mean_final_bel);
        REQUIRE(*r.mean_final_bel == Approx(r.success_rate).margin(0.01));
    }

    SECTION("bad options")
    {
        REQUIRE_THROWS_AS(simulate(controller("fig1"), domain("treechop_exact"), sim(0, 1)), SemanticError);
        REQUIRE_THROWS_AS(simulate(controller("fig1"), domain("treechop_exact"), sim(10, 1, 0)), SemanticError);
    }
}

TEST_CASE("absorption_probability")
{
    SECTION("agrees with an independent push-forward on random domains")
    {
        InstanceGenerator gen(555);
        InstanceShape shape;
        shape.noisy = true;
        for (int i = 0; i < 150; ++i) {
            const Instance inst = gen.next(shape);
            for (std::size_t cap : {0u, 1u, 5u, 20u}) {
                const Absorption a = absorption_probability(inst.controller, inst.domain, cap);
                const OracleAbsorption o = oracle_absorption(inst.controller, inst.domain, cap);
                INFO("instance " << i << " cap " << cap << "\n" << inst.domain_json.dump());
                REQUIRE(a.success == Approx(o.success).margin(1e-12));
                REQUIRE(a.termination == Approx(o.termination).margin(1e-12));
                REQUIRE(a.success <= a.termination + 1e-15);
                REQUIRE(a.termination + a.truncated <= 1.0 + 1e-12);
            }
        }
    }

    SECTION("Gaussian sensing and effector, objective goal")
    {
        Domain d = domain("treechop_noisy");
        d.goal = formula(d, "(<= d 5)");
        const Absorption a = absorption_probability(controller("fig3_noisy"), d, 25);
        const SimReport r = simulate(controller("fig3_noisy"), d, sim(100000, 11, 25));
        REQUIRE(std::abs(r.success_rate - a.success) <= 4 * r.std_error);
        REQUIRE(std::abs(r.termination_rate - a.termination) <= 0.01);
        REQUIRE(a.success + 1e-12 >= 0.0);
        REQUIRE(a.success + (a.termination - a.success) + a.truncated <= 1.0 + 1e-9);
    }

    SECTION("sampled rates agree with exact rates on random domains")
    {
        InstanceGenerator gen(77);
        InstanceShape shape;
        shape.noisy = true;
        int checked = 0;
        for (int i = 0; i < 30; ++i) {
            const Instance inst = gen.next(shape);
            const SimReport r = simulate(inst.controller, inst.domain, sim(20000, 1000 + i, 15));
            const Absorption a = absorption_probability(inst.controller, inst.domain, 15);
            const double se = std::sqrt(std::max(a.success * (1 - a.success), 1e-12) / 20000.0);
            INFO("instance " << i);
            REQUIRE(std::abs(r.success_rate - a.success) <= 5 * se + 1e-12);
            REQUIRE(r.termination_rate >= r.success_rate);
            ++checked;
        }
        REQUIRE(checked == 30);
    }
}

TEST_CASE("sampled rates stay within four standard errors across seeds")
{
    struct Case {
        const char* domain;
        const char* controller;
        std::size_t cap;
    };
    // short caps keep the truncation mass visible; at long caps the exact rate rounds to 1
    for (const Case& c : {Case{"treechop_noisyact", "fig1", 24}, Case{"treechop_metal", "fig1", 100}}) {
        const Domain d = domain(c.domain);
        const double exact = absorption_probability(controller(c.controller), d, c.cap).success;
        int within = 0;
        for (std::uint64_t seed = 1; seed <= 100; ++seed) {
            const SimReport r = simulate(controller(c.controller), d, sim(10000, seed, c.cap));
            const double se = std::sqrt(exact * (1 - exact) / 10000.0);
            if (std::abs(r.success_rate - exact) <= 4 * se) ++within;
        }
        INFO(c.domain << " exact " << exact);
        REQUIRE(within >= 99);
    }
}
