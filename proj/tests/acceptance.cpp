// Acceptance suite: one PASS/FAIL line per criterion. argv[1] is the CLI binary.

#include "advsnell/error.hpp"
#include "advsnell/expectation.hpp"
#include "advsnell/game.hpp"
#include "advsnell/hedge.hpp"
#include "advsnell/oracle.hpp"
#include "advsnell/refine.hpp"
#include "advsnell/snell.hpp"
#include "support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

using namespace advsnell;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 42;
constexpr std::size_t kSuiteSize = 1000;

struct Outcome {
    bool pass = true;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

struct Case {
    TreeModel tree;
    ExerciseMask mask;
    SolveReport report;
};

const std::vector<Case>& suite() {
    static const std::vector<Case> cases = [] {
        std::vector<Case> out;
        for (auto& t : fixtures::suite_models(kSeed, kSuiteSize)) {
            auto mask = ExerciseMask::american(t.model.lattice.steps());
            auto report = backward_solve(t.model, ValueField(t.payoff), mask);
            out.push_back({std::move(t), std::move(mask), std::move(report)});
        }
        return out;
    }();
    return cases;
}

PayoffProcess put() { return make_builtin({PayoffKind::put, 1.0, 1.0}); }

Outcome value_existence() {
    const auto start = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (const auto& c : suite()) {
        const auto v = brute_values(c.tree.model, c.tree.payoff, c.mask);
        worst = std::max({worst, std::abs(v.upper - c.report.y0), std::abs(v.lower - c.report.y0)});
    }
    const double elapsed = seconds_since(start);
    return {worst <= 1e-10 && elapsed < 60.0,
            fmt("%zu instances, max |brute - Y0| = %.3g, %.1f s", suite().size(), worst, elapsed)};
}

Outcome tau_star_optimal() {
    double worst_tau = 0.0;
    double worst_rule = 0.0;
    std::uint64_t rules_seen = 0;
    for (const auto& c : suite()) {
        const ValueField x(c.tree.payoff);
        worst_tau = std::max(worst_tau, std::abs(expectation_of_stopped(c.tree.model, x, c.report.tau_star).root -
                                                 c.report.y0));
        RuleEnumerator rules(c.tree.model.lattice, c.mask);
        StoppingRule r;
        while (rules.next(r)) {
            ++rules_seen;
            worst_rule = std::max(worst_rule, c.report.y0 - expectation_of_stopped(c.tree.model, x, r).root);
        }
    }
    return {worst_tau <= 1e-12 && worst_rule <= 1e-10,
            fmt("max |E(X_tau*) - Y0| = %.3g, max Y0 - E(X_tau) over %llu rules = %.3g", worst_tau,
                static_cast<unsigned long long>(rules_seen), worst_rule)};
}

Outcome saddle_point() {
    double worst = 0.0;
    double worst_exhaustive = 0.0;
    std::size_t exhaustive = 0;
    for (const auto& c : suite()) {
        const auto p_star = saddle_policy(c.report);
        const auto check = verify_saddle(c.tree.model, p_star, c.report.tau_star, c.report.payoff, c.mask);
        worst = std::max({worst, check.left_defect, check.right_defect});
        if (fixtures::decidable_nodes(c.tree.model.lattice, c.mask) > 8) continue;
        ++exhaustive;
        const double at_tau = path_expectation(c.tree.model, c.report.tau_star, p_star, c.tree.payoff).value;
        RuleEnumerator rules(c.tree.model.lattice, c.mask);
        StoppingRule r;
        while (rules.next(r)) {
            worst_exhaustive =
                std::max(worst_exhaustive, at_tau - path_expectation(c.tree.model, r, p_star, c.tree.payoff).value);
        }
    }
    return {worst <= 1e-12 && worst_exhaustive <= 1e-12 && exhaustive > 0,
            fmt("max saddle defect = %.3g; inf over rules under P* attained at tau* on %zu instances (slack %.3g)",
                worst, exhaustive, worst_exhaustive)};
}

Outcome martingale_structure() {
    double worst_mart = 0.0;
    double worst_super = 0.0;
    std::uint64_t policies_seen = 0;
    for (const auto& c : suite()) {
        const auto m = martingale_check(c.tree.model, c.report);
        worst_mart = std::max({worst_mart, m.max_defect, m.root_defect});
        PolicyEnumerator policies(c.tree.model);
        ControlPolicy p;
        while (policies.next(p)) {
            ++policies_seen;
            worst_super = std::max(worst_super, -supermartingale_check(c.tree.model, c.report, p));
        }
    }
    return {worst_mart <= 1e-12 && worst_super <= 1e-12,
            fmt("martingale defect = %.3g; worst supermartingale violation over %llu policies = %.3g", worst_mart,
                static_cast<unsigned long long>(policies_seen), worst_super)};
}

Outcome tower_property() {
    double worst = 0.0;
    std::size_t triples = 0;
    SuiteRng rng(kSeed + 1);
    for (const auto& c : suite()) {
        const int n = c.tree.model.lattice.steps();
        const ValueField payoff(c.tree.payoff);
        const ValueField noise(fixtures::random_values(rng, c.tree.model.lattice.size()));
        for (int j = 1; j <= n; ++j) {
            for (int s = 0; s <= j; ++s) {
                for (int t = s; t <= j; ++t) {
                    worst = std::max({worst, tower_check(c.tree.model, payoff, s, t, j),
                                      tower_check(c.tree.model, noise, s, t, j)});
                    ++triples;
                }
            }
        }
    }
    return {worst <= 1e-12, fmt("max tower defect = %.3g over %zu (s, t, j) triples", worst, triples)};
}

Outcome classical_limit() {
    std::size_t models = 0;
    std::size_t mismatches = 0;
    auto compare = [&](const Model& m, const std::vector<double>& x, const ExerciseMask& mask) {
        ++models;
        const auto r = backward_solve(m, ValueField(x), mask);
        const auto ref = fixtures::classical_snell(m, x, mask);
        for (NodeId id = 0; id < m.lattice.size(); ++id) mismatches += r.value[id] != ref[id];
    };
    SuiteOptions opts;
    opts.max_kernels = 1;
    for (const auto& spec : seed_suite(kSeed, kSuiteSize, opts)) {
        const auto t = build_tree(spec);
        const int n = t.model.lattice.steps();
        compare(t.model, t.payoff, ExerciseMask::american(n));
        compare(t.model, t.payoff, ExerciseMask::european(n));
    }
    for (int n : {16, 64, 256}) {
        const auto m = build_g_lattice({n, 1.0, {0.2}});
        const auto x = put().negated().tabulate(m.lattice);
        const auto& raw = x.values();
        compare(m, raw, ExerciseMask::american(n));
        compare(m, raw, ExerciseMask::every(n, 4));
    }
    return {mismatches == 0, fmt("%zu single-kernel models, %zu node values differ bitwise", models, mismatches)};
}

DyadicStudy buyer_put_study(bool with_hedge) {
    DyadicConfig cfg;
    cfg.sigmas = {0.1, 0.3};
    cfg.horizon = 1.0;
    for (int n = 8; n <= 1024; n *= 2) cfg.steps.push_back(n);
    cfg.side = Side::buyer;
    cfg.with_hedge = with_hedge;
    return dyadic_study(cfg, put());
}

Outcome refinement() {
    const auto start = std::chrono::steady_clock::now();
    const auto study = buyer_put_study(false);
    const bool tail = study.strictly_decreasing_tail(4);
    const auto m = build_g_lattice({256, 1.0, {0.1, 0.3}});
    const auto x = put().negated().tabulate(m.lattice);
    const auto nested = nested_mask_study(m, x, {1, 2, 4, 8, 16, 32, 0});
    const double elapsed = seconds_since(start);
    std::string diffs;
    for (const auto& row : study.rows) {
        if (row.diff) diffs += fmt(" %.3g", *row.diff);
    }
    return {tail && nested.monotone && elapsed < 30.0,
            fmt("diffs%s; nested masks %s; %.1f s", diffs.c_str(), nested.monotone ? "monotone" : "NOT monotone",
                elapsed)};
}

Outcome hedging() {
    std::size_t instances = 0;
    std::size_t arbitrage = 0;
    double worst_fraction = 1.0;
    double worst_dominance = 0.0;
    auto pathwise = [&](const Model& m, const ValueField& x, const ExerciseMask& mask, bool dominance) {
        const auto r = backward_solve(m, x, mask);
        HedgeStrategy h;
        try {
            h = superhedge_solve(m, x, r.tau_star, r.y0);
        } catch (const ModelError&) {
            ++arbitrage;
            return;
        }
        ++instances;
        worst_fraction = std::min(worst_fraction, verify_pathwise(m, h, x).fraction);
        if (dominance) worst_dominance = std::max(worst_dominance, r.y0 - h.x0);
    };
    for (const auto& t : fixtures::suite_models(kSeed, kSuiteSize, true)) {
        pathwise(t.model, ValueField(t.payoff), ExerciseMask::american(t.model.lattice.steps()), true);
    }
    const std::size_t martingale_instances = instances;
    for (const auto& c : suite()) pathwise(c.tree.model, ValueField(c.tree.payoff), c.mask, false);
    for (int n : {4, 8, 12}) {
        const auto m = build_g_lattice({n, 1.0, {0.1, 0.3}, n < 12 ? LatticeMode::tree : LatticeMode::recombining});
        pathwise(m, put().tabulate(m.lattice), ExerciseMask::american(n), true);
        pathwise(m, put().negated().tabulate(m.lattice), ExerciseMask::american(n), true);
    }

    double complete_gap = 0.0;
    for (int n : {8, 64, 256}) {
        const auto m = build_g_lattice({n, 1.0, {0.3}});
        for (const auto& x : {put().tabulate(m.lattice), put().negated().tabulate(m.lattice)}) {
            const auto r = backward_solve(m, x, ExerciseMask::american(n));
            complete_gap = std::max(complete_gap, std::abs(superhedge_solve(m, x, r.tau_star, r.y0).gap));
        }
    }

    const auto study = buyer_put_study(true);
    std::string gaps;
    double worst_ratio = 0.0;
    for (std::size_t i = 0; i < study.rows.size(); ++i) {
        gaps += fmt(" %.3g", *study.rows[i].hedge_gap);
        if (i > 0) worst_ratio = std::max(worst_ratio, *study.rows[i].hedge_gap / *study.rows[i - 1].hedge_gap);
    }
    const bool shrinking = worst_ratio <= 1.1;

    const bool pass = worst_fraction == 1.0 && worst_dominance <= 1e-12 && complete_gap <= 1e-12 && shrinking &&
                      martingale_instances == kSuiteSize;
    return {pass, fmt("pathwise fraction %.3g on %zu instances (%zu general instances admit arbitrage); "
                      "max Y0 - x0 = %.3g; complete gap %.3g; buyer put gaps along n:%s (max ratio per doubling %.4f)",
                      worst_fraction, instances, arbitrage, worst_dominance, complete_gap, gaps.c_str(), worst_ratio)};
}

Outcome hitting_times() {
    std::size_t sweeps = 0;
    bool monotone = true;
    bool stabilizes = true;
    bool value_ok = true;
    auto sweep = [&](const Model& m, const SolveReport& r) {
        auto eps = positive_gaps(m.lattice, r.value, r.payoff, r.mask);
        const std::size_t gaps = eps.size();
        for (std::size_t i = 0; i < gaps; ++i) eps.push_back(eps[i] * 0.5);
        eps.push_back(0.0);
        eps.push_back(1e-14);
        eps.push_back(10.0);
        const auto s = epsilon_study(m, r, eps);
        ++sweeps;
        monotone = monotone && s.monotone;
        stabilizes = stabilizes && s.stabilizes;
        for (const auto& row : s.rows) {
            value_ok = value_ok && row.value_ok;
            if (s.min_positive_gap && row.eps < *s.min_positive_gap) stabilizes = stabilizes && row.equals_tau_star;
        }
    };
    for (const auto& c : suite()) sweep(c.tree.model, c.report);
    for (int n : {16, 64}) {
        const auto m = build_g_lattice({n, 1.0, {0.1, 0.3}});
        sweep(m, backward_solve(m, put().negated(), ExerciseMask::american(n)));
    }
    return {monotone && stabilizes && value_ok,
            fmt("%zu sweeps; stop sets monotone: %s; tau^eps = tau* below min gap: %s; Y0 >= E(Y_tau^eps): %s", sweeps,
                monotone ? "yes" : "no", stabilizes ? "yes" : "no", value_ok ? "yes" : "no")};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome determinism(const std::string& cli) {
    if (cli.empty()) return {false, "no CLI path given"};
    const fs::path configs = fs::path(ADVSNELL_SOURCE_DIR) / "configs";
    const fs::path root = fs::temp_directory_path() / "advsnell-acceptance";
    fs::remove_all(root);
    const std::vector<std::pair<std::string, std::string>> runs{
        {"solve", "put_g.json"},     {"saddle", "put_g.json"},         {"hedge", "put_g.json"},
        {"refine", "put_g.json"},    {"bermudan", "bermudan_put.json"}, {"solve", "rectangle_call.json"},
        {"oracle-check", "suite.json"}};
    std::size_t files = 0;
    std::vector<std::string> differing;
    for (const auto& [cmd, cfg] : runs) {
        std::vector<fs::path> outs;
        for (const char* threads : {"1", "4", "1"}) {
            const auto out = root / (cmd + "-" + cfg + "-" + threads + "-" + std::to_string(outs.size()));
            const std::string line = "ADVSNELL_LOG=off \"" + cli + "\" " + cmd + " --config \"" + (configs / cfg).string() +
                                     "\" --threads " + threads + " --out \"" + out.string() + "\"";
            if (std::system(line.c_str()) != 0) return {false, "command failed: " + line};
            outs.push_back(out);
        }
        for (const auto& entry : fs::directory_iterator(outs[0])) {
            const auto name = entry.path().filename();
            if (name == "metadata.json") continue;  // wall-clock and thread count
            ++files;
            const auto ref = slurp(entry.path());
            for (std::size_t i = 1; i < outs.size(); ++i) {
                if (slurp(outs[i] / name) != ref) differing.push_back(cmd + "/" + name.string());
            }
        }
    }
    std::string detail = fmt("%zu report files compared across --threads 1, 4, 1", files);
    for (const auto& d : differing) detail += " differs: " + d;
    return {differing.empty() && files > 0, detail};
}

} // namespace

int main(int argc, char** argv) {
    const std::string cli = argc > 1 ? argv[1] : "";
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"value existence", value_existence},
        {"optimality of tau*", tau_star_optimal},
        {"saddle point", saddle_point},
        {"martingale structure", martingale_structure},
        {"tower property", tower_property},
        {"classical limit", classical_limit},
        {"refinement", refinement},
        {"hedging", hedging},
        {"epsilon hitting times", hitting_times},
        {"determinism", [&] { return determinism(cli); }},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s %zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    o.detail.c_str(), seconds_since(start));
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
