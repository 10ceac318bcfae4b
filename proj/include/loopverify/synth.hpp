#pragma once

// Criterion selection and bounded synthesis: enumerate canonical controllers by
// increasing size and keep those the chosen criterion verifies. Exhaustive, no
// heuristics; an empty result is a proof of non-existence within the bound for
// the decidable criteria.

#include <charconv>
#include <string>
#include <vector>

#include "loopverify/controller.hpp"
#include "loopverify/enumerate.hpp"
#include "loopverify/exec_epistemic.hpp"
#include "loopverify/exec_exact.hpp"
#include "loopverify/parallel.hpp"

namespace loopverify {

namespace detail {

/// Shortest decimal text that reads back as `v`.
inline std::string format_real(double v)
{
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

} // namespace detail

enum class CriterionKind { Def4, Def6, Termination, Def6Termination, Weight, Mass, Def9 };

struct Criterion {
    CriterionKind kind = CriterionKind::Def4;
    double kappa = 0.0;
    Def9Mode mode = Def9Mode::Existential;
};

/// def4 | def6 | termination | def6+termination | weight:K | mass:K | def9[:existential|:adversarial]
inline Criterion parse_criterion(const std::string& text)
{
    auto kappa_of = [&](std::size_t colon) {
        const std::string num = text.substr(colon + 1);
        auto k = detail::parse_real(num);
        if (!k) throw SemanticError("criterion '" + text + "': '" + num + "' is not a number");
        return *k;
    };
    if (text == "def4") return {CriterionKind::Def4};
    if (text == "def6") return {CriterionKind::Def6};
    if (text == "termination") return {CriterionKind::Termination};
    if (text == "def6+termination") return {CriterionKind::Def6Termination};
    if (text.rfind("weight:", 0) == 0) return {CriterionKind::Weight, kappa_of(6)};
    if (text.rfind("mass:", 0) == 0) {
        const double k = kappa_of(4);
        if (k < 0.0 || k > 1.0) throw SemanticError("criterion '" + text + "': mass threshold must lie in [0, 1]");
        return {CriterionKind::Mass, k};
    }
    if (text == "def9" || text == "def9:existential") return {CriterionKind::Def9, 0.0, Def9Mode::Existential};
    if (text == "def9:adversarial") return {CriterionKind::Def9, 0.0, Def9Mode::Adversarial};
    throw SemanticError("unknown criterion '" + text +
                        "' (expected def4, def6, termination, def6+termination, weight:K, mass:K, def9:existential or "
                        "def9:adversarial)");
}

inline std::string to_string(const Criterion& c)
{
    switch (c.kind) {
    case CriterionKind::Def4: return "def4";
    case CriterionKind::Def6: return "def6";
    case CriterionKind::Termination: return "termination";
    case CriterionKind::Def6Termination: return "def6+termination";
    case CriterionKind::Weight: return "weight:" + detail::format_real(c.kappa);
    case CriterionKind::Mass: return "mass:" + detail::format_real(c.kappa);
    case CriterionKind::Def9: return c.mode == Def9Mode::Existential ? "def9:existential" : "def9:adversarial";
    }
    return "?";
}

struct CheckOptions {
    EpistemicOptions epistemic;
    unsigned workers = 1;
};

inline Verdict check(const Controller& c, const Domain& d, const Criterion& crit, const CheckOptions& opt = {})
{
    const ExactOptions ex{opt.workers};
    switch (crit.kind) {
    case CriterionKind::Def4: return verify_def4(c, d, ex);
    case CriterionKind::Def6: return verify_def6(c, d, ex);
    case CriterionKind::Termination: return verify_termination(c, d, ex);
    case CriterionKind::Def6Termination: {
        Verdict weak = verify_def6(c, d, ex);
        if (weak.status != Status::Holds) return weak;
        Verdict ter = verify_termination(c, d, ex);
        if (ter.status != Status::Holds) return ter;
        return weak;
    }
    case CriterionKind::Weight: return verify_weight_threshold(c, d, crit.kappa, ex);
    case CriterionKind::Mass: return verify_belief_threshold(c, d, crit.kappa, ex);
    case CriterionKind::Def9: {
        EpistemicOptions e = opt.epistemic;
        e.workers = opt.workers;
        return verify_def9(c, d, crit.mode, e);
    }
    }
    throw std::logic_error("check: unhandled criterion");
}

struct SynthRequest {
    const Domain* domain = nullptr;
    Criterion criterion;
    std::size_t max_states = 3;
    std::size_t limit = 1;
};

struct SynthSolution {
    std::size_t index = 0; // position in the canonical enumeration
    Controller controller;
};

struct SynthResult {
    std::vector<SynthSolution> solutions;
    std::size_t candidates = 0; // candidates verified
    std::size_t unknown = 0;    // candidates whose verdict was Unknown
};

inline constexpr std::size_t kSynthBlock = 256;

/// Candidates are verified in blocks of kSynthBlock, concurrently within a block,
/// and accepted in enumeration order, so the result is independent of `workers`.
inline SynthResult synthesize(const SynthRequest& req, const CheckOptions& opt = {})
{
    if (!req.domain) throw std::logic_error("synthesize: no domain");
    if (req.max_states < 1) throw SemanticError("synthesize: max_states must be at least 1");
    const Domain& d = *req.domain;
    if (req.criterion.kind == CriterionKind::Def4 && !d.noise_free_acting())
        throw UnsupportedModel("def4: domain has noisy actions; use def6 (U* semantics)");

    SynthResult res;
    std::vector<Controller> block;
    CheckOptions inner = opt;
    inner.workers = 1;
    bool done = req.limit == 0;

    auto flush = [&] {
        auto verdicts = parallel_map(block.size(), opt.workers,
                                     [&](std::size_t i) { return check(block[i], d, req.criterion, inner).status; });
        for (std::size_t i = 0; i < block.size() && !done; ++i) {
            const std::size_t index = res.candidates++;
            if (verdicts[i] == Status::Unknown) ++res.unknown;
            if (verdicts[i] != Status::Holds) continue;
            res.solutions.push_back({index, std::move(block[i])});
            done = res.solutions.size() >= req.limit;
        }
        block.clear();
    };

    if (!done) {
        enumerate_controllers(d, req.max_states, [&](const Controller& c) {
            block.push_back(c);
            if (block.size() == kSynthBlock) flush();
            return !done;
        });
        if (!done) flush();
    }
    return res;
}

} // namespace loopverify
