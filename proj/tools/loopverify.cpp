// loopverify: verify, trace, simulate, synthesize and export finite-state plans.
//
// Exit codes: 0 holds / success, 1 fails, 2 unknown, 3 usage or input error.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "loopverify/loopverify.hpp"

namespace lv = loopverify;
using json = nlohmann::json;

namespace {

constexpr int kInputError = 3;

int exit_code(lv::Status s)
{
    switch (s) {
    case lv::Status::Holds: return 0;
    case lv::Status::Fails: return 1;
    case lv::Status::Unknown: return 2;
    }
    return kInputError;
}

std::string action_name(const lv::Domain& d, lv::ActionId a) { return d.actions[a].name; }

json trace_to_json(const lv::Trace& t, const lv::Controller& c, const lv::Domain& d)
{
    json out = json::array();
    for (const auto& step : t) {
        json j{{"control", c.states[step.config.control]}, {"world", lv::state_to_json(step.config.world, d)}};
        if (step.action) j["action"] = action_name(d, *step.action);
        if (step.observation) j["observation"] = d.observations[*step.observation];
        out.push_back(std::move(j));
    }
    return out;
}

json verdict_to_json(const lv::Verdict& v, const lv::Controller& c, const lv::Domain& d)
{
    json j{{"status", lv::to_string(v.status)}, {"detail", v.detail}};
    j["counterexample_world"] = v.counterexample_world ? lv::state_to_json(*v.counterexample_world, d) : json(nullptr);
    if (v.measure) j["measure"] = *v.measure;
    json w = json::array();
    for (const auto& t : v.witnesses) w.push_back(trace_to_json(t, c, d));
    j["witnesses"] = std::move(w);
    return j;
}

void write_file(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw lv::SemanticError("cannot write '" + path + "'");
    out << text;
    if (!out) throw lv::SemanticError("error writing '" + path + "'");
}

/// Inline JSON object or a path to a file holding one.
lv::WorldState read_world(const std::string& arg, const lv::Domain& d)
{
    const auto first = arg.find_first_not_of(" \t\r\n");
    const std::string text = first != std::string::npos && arg[first] == '{' ? arg : lv::read_text_file(arg);
    try {
        return lv::state_from_json(json::parse(text), d);
    } catch (const json::parse_error& e) {
        throw lv::ParseError(std::string("real world: invalid JSON: ") + e.what(), e.byte);
    }
}

std::string format_number(double v)
{
    std::ostringstream os;
    os << std::setprecision(12) << v;
    return os.str();
}

struct EpistemicFlags {
    std::size_t depth_bound = 64;
    std::size_t node_budget = 2'000'000;
    bool poss_at_real = false;
    bool real_intended = false;
    bool trace_particles = false;
    double prune = 0.0;

    void add_to(CLI::App* app, bool search)
    {
        if (search) {
            app->add_option("--depth-bound", depth_bound, "Search depth for def9 before answering unknown")
                ->capture_default_str();
            app->add_option("--node-budget", node_budget, "Belief nodes per initial world before answering unknown")
                ->capture_default_str();
        }
        app->add_flag("--poss-at-real", poss_at_real, "Check executability at the real world only");
        app->add_flag("--real-intended", real_intended, "Move the real world by the intended action");
        app->add_flag("--trace-particles", trace_particles, "Keep one particle per outcome history");
        app->add_option("--prune", prune, "Drop particles whose weight share falls below this (approximate)");
    }

    lv::EpistemicOptions options(unsigned workers) const
    {
        lv::EpistemicOptions o;
        o.depth_bound = depth_bound;
        o.node_budget = node_budget;
        o.poss_at_real = poss_at_real;
        o.real_intended = real_intended;
        o.belief.trace_particles = trace_particles;
        o.belief.prune = prune;
        o.workers = workers;
        return o;
    }
};

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Verification, simulation and bounded synthesis of finite-state plans"};
    app.require_subcommand(1);

    std::string domain_path, controller_path, criterion_text = "def4", trace_out, out_path, out_dir = ".";
    std::string real_arg, scenario_path;
    bool as_json = false, strict = false, track_belief = false;
    unsigned workers = 1;
    std::uint64_t runs = 1000, seed = 0;
    std::size_t step_cap = 0, max_states = 3, limit = 1;
    EpistemicFlags eflags;

    auto* verify = app.add_subcommand("verify", "Check a controller against a correctness criterion");
    verify->add_option("--domain", domain_path, "Domain file")->required();
    verify->add_option("--controller", controller_path, "Controller file")->required();
    verify->add_option("--criterion", criterion_text,
                       "def4 | def6 | termination | def6+termination | weight:K | mass:K | def9:existential | def9:adversarial")
        ->capture_default_str();
    verify->add_option("--trace", trace_out, "Write witness traces to this file");
    verify->add_flag("--json", as_json, "Print the verdict as JSON");
    verify->add_flag("--strict", strict, "Require delta to be total on the observations each action can produce");
    verify->add_option("--workers", workers, "Worker threads")->capture_default_str();
    eflags.add_to(verify, true);

    auto* trace = app.add_subcommand("trace", "Run a scenario over belief states and print each step");
    trace->add_option("--domain", domain_path, "Domain file")->required();
    trace->add_option("--controller", controller_path, "Controller file")->required();
    trace->add_option("--real", real_arg, "Real initial world: inline JSON object or file")->required();
    trace->add_option("--scenario", scenario_path, "Scenario file")->required();
    trace->add_flag("--json", as_json, "Print the trace as JSON");
    eflags.add_to(trace, false);

    auto* simulate = app.add_subcommand("simulate", "Estimate success and termination rates by sampling");
    simulate->add_option("--domain", domain_path, "Domain file")->required();
    simulate->add_option("--controller", controller_path, "Controller file")->required();
    simulate->add_option("--runs", runs, "Number of sampled runs")->capture_default_str()->check(CLI::PositiveNumber);
    simulate->add_option("--seed", seed, "Random seed")->required();
    auto* cap_opt = simulate->add_option("--step-cap", step_cap, "Steps per run (default 10 x |Q| x |states|)")
                        ->check(CLI::PositiveNumber);
    simulate->add_flag("--track-belief", track_belief, "Track the belief state and report the mean final belief");
    simulate->add_option("--workers", workers, "Worker threads")->capture_default_str();

    auto* synth = app.add_subcommand("synthesize", "Enumerate controllers and keep those meeting a criterion");
    synth->add_option("--domain", domain_path, "Domain file")->required();
    synth->add_option("--criterion", criterion_text, "Criterion, as for verify")->capture_default_str();
    synth->add_option("--max-states", max_states, "Largest controller size")->capture_default_str()->check(CLI::PositiveNumber);
    synth->add_option("--limit", limit, "Solutions wanted")->capture_default_str();
    synth->add_option("--out-dir", out_dir, "Directory for solution files")->capture_default_str();
    synth->add_flag("--json", as_json, "Print a JSON summary");
    synth->add_option("--workers", workers, "Worker threads")->capture_default_str();
    eflags.add_to(synth, true);

    auto* exp = app.add_subcommand("export", "Render a controller as GraphViz DOT");
    exp->add_option("--controller", controller_path, "Controller file")->required();
    exp->add_option("--domain", domain_path, "Validate against this domain first");
    exp->add_option("--out", out_path, "Output file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kInputError;
    }

    try {
        if (*verify) {
            const lv::Domain d = lv::load_domain(domain_path);
            const lv::Controller c = lv::load_controller(controller_path);
            lv::compile(c, d, strict); // report structural defects before any criterion runs
            const lv::Criterion crit = lv::parse_criterion(criterion_text);
            lv::CheckOptions opt{eflags.options(workers), workers};
            const lv::Verdict v = lv::check(c, d, crit, opt);
            const json j = verdict_to_json(v, c, d);
            if (!trace_out.empty()) write_file(trace_out, j["witnesses"].dump(2) + "\n");
            if (as_json) {
                json out = j;
                out["criterion"] = lv::to_string(crit);
                std::cout << out.dump(2) << "\n";
            } else {
                std::cout << lv::to_string(crit) << ": " << lv::to_string(v.status);
                if (!v.detail.empty()) std::cout << " (" << v.detail << ")";
                std::cout << "\n";
                if (v.counterexample_world)
                    std::cout << "world: " << lv::state_to_string(*v.counterexample_world, d) << "\n";
            }
            return exit_code(v.status);
        }

        if (*trace) {
            const lv::Domain d = lv::load_domain(domain_path);
            const lv::Controller c = lv::load_controller(controller_path);
            const lv::WorldState real = read_world(real_arg, d);
            const lv::Scenario sc = lv::load_scenario(scenario_path);
            const auto opt = eflags.options(1);
            const auto res = lv::run_scenario(c, d, real, sc, opt);
            const auto tracked = lv::tracked_formula(d.goal);
            auto bel_of = [&](const lv::BeliefState& b) { return tracked ? lv::bel(b, *tracked) : 1.0; };
            if (as_json) {
                json steps = json::array();
                auto snapshot = [&](const lv::EpistemicConfig& cfg) {
                    return json{{"control", c.states[cfg.control]},
                                {"real", lv::state_to_json(cfg.real, d)},
                                {"bel", bel_of(cfg.belief)},
                                {"belief", lv::belief_to_json(cfg.belief, d)}};
                };
                for (const auto& s : res.steps) {
                    json j = snapshot(s.after);
                    j["action"] = action_name(d, s.action);
                    j["outcome"] = action_name(d, s.actual);
                    j["reading"] = lv::Domain::describe(s.reading);
                    j["observation"] = d.observations[s.observation];
                    steps.push_back(std::move(j));
                }
                json out{{"status", lv::to_string(res.status)},
                         {"detail", res.detail},
                         {"tracked", tracked ? lv::to_string(*tracked, d) : std::string()},
                         {"initial", snapshot(res.initial)},
                         {"steps", steps}};
                std::cout << out.dump(2) << "\n";
            } else {
                const std::string label = tracked ? "Bel" + lv::to_string(*tracked, d) : "Bel";
                std::cout << "start  " << c.states[res.initial.control] << "  real " << lv::state_to_string(res.initial.real, d)
                          << "  " << label << " = " << format_number(bel_of(res.initial.belief)) << "\n";
                for (std::size_t i = 0; i < res.steps.size(); ++i) {
                    const auto& s = res.steps[i];
                    std::cout << "step " << i + 1 << " " << action_name(d, s.action);
                    if (s.actual != s.action) std::cout << " as " << action_name(d, s.actual);
                    std::cout << " / " << lv::Domain::describe(s.reading) << " -> " << d.observations[s.observation] << "  "
                              << c.states[s.after.control] << "  real " << lv::state_to_string(s.after.real, d) << "  "
                              << label << " = " << format_number(bel_of(s.after.belief)) << "  ("
                              << s.after.belief.size() << " particles)\n";
                }
                std::cout << lv::to_string(res.status) << ": " << res.detail << "\n";
            }
            return exit_code(res.status);
        }

        if (*simulate) {
            const lv::Domain d = lv::load_domain(domain_path);
            const lv::Controller c = lv::load_controller(controller_path);
            lv::SimOptions opt;
            opt.runs = runs;
            opt.seed = seed;
            if (cap_opt->count() > 0) opt.step_cap = step_cap;
            opt.track_belief = track_belief;
            opt.workers = workers;
            std::cout << lv::report_to_json(lv::simulate(c, d, opt)).dump(2) << "\n";
            return 0;
        }

        if (*synth) {
            const lv::Domain d = lv::load_domain(domain_path);
            lv::SynthRequest req{&d, lv::parse_criterion(criterion_text), max_states, limit};
            const auto res = lv::synthesize(req, lv::CheckOptions{eflags.options(1), workers});
            std::filesystem::create_directories(out_dir);
            json files = json::array();
            for (const auto& s : res.solutions) {
                const std::string stem = (std::filesystem::path(out_dir) / ("controller_" + std::to_string(s.index))).string();
                write_file(stem + ".json", lv::controller_to_json(s.controller).dump(2) + "\n");
                write_file(stem + ".dot", lv::export_dot(s.controller));
                files.push_back(stem + ".json");
            }
            if (as_json) {
                std::cout << json{{"criterion", lv::to_string(req.criterion)},
                                  {"max_states", max_states},
                                  {"candidates", res.candidates},
                                  {"unknown", res.unknown},
                                  {"solutions", files}}
                                 .dump(2)
                          << "\n";
            } else {
                std::cout << res.solutions.size() << " solution(s) after " << res.candidates << " candidate(s)";
                if (res.unknown) std::cout << ", " << res.unknown << " undecided";
                std::cout << "\n";
                for (const auto& f : files) std::cout << f.get<std::string>() << "\n";
            }
            if (!res.solutions.empty()) return 0;
            return res.unknown ? 2 : 1;
        }

        if (*exp) {
            const lv::Controller c = lv::load_controller(controller_path);
            if (!domain_path.empty()) lv::compile(c, lv::load_domain(domain_path));
            const std::string dot = lv::export_dot(c);
            if (out_path.empty()) std::cout << dot;
            else write_file(out_path, dot);
            return 0;
        }
    } catch (const lv::Error& e) {
        std::cerr << "loopverify: " << e.what() << "\n";
        return kInputError;
    } catch (const std::exception& e) {
        std::cerr << "loopverify: internal error: " << e.what() << "\n";
        return kInputError;
    }
    return kInputError;
}
