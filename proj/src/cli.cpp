#include "advsnell/cli.hpp"

#include "advsnell/config.hpp"
#include "advsnell/error.hpp"
#include "advsnell/game.hpp"
#include "advsnell/hedge.hpp"
#include "advsnell/oracle.hpp"
#include "advsnell/refine.hpp"
#include "advsnell/snell.hpp"
#include "advsnell/suite.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace advsnell::cli {

namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

constexpr double kOracleTolerance = 1e-10;
constexpr std::size_t kMaxJsonNodes = 100'000;

struct Violation {
    std::string check;
    std::string detail;
    double value = 0.0;
    double tolerance = 0.0;
};

struct Context {
    std::string subcommand;
    RunConfig config;
    fs::path out;
    Parallelism par;
    std::shared_ptr<spdlog::logger> log;
    std::vector<Violation> violations;

    void require(bool ok, std::string check, std::string detail, double value, double tolerance) {
        if (!ok) violations.push_back({std::move(check), std::move(detail), value, tolerance});
    }
};

std::shared_ptr<spdlog::logger> logger() {
    auto log = spdlog::get("advsnell");
    if (!log) log = spdlog::stderr_logger_mt("advsnell");
    spdlog::level::level_enum level = spdlog::level::warn;
    if (const char* env = std::getenv("ADVSNELL_LOG")) level = spdlog::level::from_str(env);
    log->set_level(level);
    return log;
}

std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
}

void write_json(const fs::path& path, const ojson& doc) { write_text(path, doc.dump(2) + "\n"); }

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

ValueField side_adjusted(const ValueField& x, Side side) {
    if (side == Side::seller) return x;
    std::vector<double> v(x.values());
    for (double& e : v) e = -e;
    return ValueField(std::move(v));
}

double scale_of(const ValueField& x) {
    double m = 1.0;
    for (double v : x.values()) m = std::max(m, std::abs(v));
    return m;
}

const char* side_name(Side side) { return side == Side::seller ? "seller" : "buyer"; }

ojson tau_summary(const Model& model, const SolveReport& report) {
    const auto& L = model.lattice;
    const auto eff = report.tau_star.effective_stops(L);
    std::size_t early = 0;
    int first = L.steps();
    for (NodeId id = 0; id < L.size(); ++id) {
        if (!eff[id] || L.is_leaf(id)) continue;
        ++early;
        first = std::min(first, L.layer(id));
    }
    ojson t;
    t["stop_nodes"] = report.tau_star.stop_count();
    t["early_effective_stops"] = early;
    t["first_stop_layer"] = first;
    t["early_stop_probability_p_star"] = early_stop_probability(model, report);
    if (L.size() <= kMaxJsonNodes) {
        std::vector<NodeId> ids;
        for (NodeId id = 0; id < L.size(); ++id) {
            if (report.tau_star.stops(id)) ids.push_back(id);
        }
        t["stop_node_ids"] = ids;
    }
    return t;
}

ojson mask_summary(const ExerciseMask& mask) {
    const auto layers = mask.layers();
    ojson m;
    m["exercisable_layers"] = layers.size();
    if (layers.size() <= 64) m["layers"] = layers;
    return m;
}

ojson instance_summary(const Context& ctx, const Instance& inst) {
    ojson j;
    j["payoff"] = inst.payoff_label;
    j["side"] = side_name(ctx.config.side);
    j["mode"] = to_string(inst.model.lattice.mode());
    j["steps"] = inst.model.lattice.steps();
    j["nodes"] = inst.model.lattice.size();
    return j;
}

void write_values_csv(const fs::path& path, const Instance& inst, const SolveReport& report) {
    const auto& L = inst.model.lattice;
    std::ostringstream csv;
    csv << "node,label,layer,time,level,payoff,value,stop,argmax\n";
    for (NodeId id = 0; id < L.size(); ++id) {
        csv << id << ',' << (inst.labels.empty() ? "" : inst.labels[id]) << ',' << L.layer(id) << ','
            << num(L.time(id)) << ',' << num(L.level(id)) << ',' << num(report.payoff[id]) << ','
            << num(report.value[id]) << ',' << (report.tau_star.stops(id) ? 1 : 0) << ','
            << (L.is_leaf(id) ? std::string() : std::to_string(report.argmax[id])) << '\n';
    }
    write_text(path, csv.str());
}

// Solves the side-adjusted contract and checks the structural contracts.
SolveReport solve_checked(Context& ctx, const Instance& inst, const ValueField& x, const ExerciseMask& mask) {
    auto report = backward_solve(inst.model, x, mask, ctx.par);
    attach_diagnostics(inst.model, report);
    const double tol = 1e-12 * scale_of(x);
    const auto& d = *report.diagnostics;
    ctx.require(d.martingale_defect <= tol, "martingale", "stopped envelope is not an E-martingale before tau*",
                d.martingale_defect, tol);
    ctx.require(d.root_defect <= tol, "tau_star_optimal", "Y_0 differs from E(X_tau*)", d.root_defect, tol);
    ctx.require(d.dpp_defect <= tol, "dynamic_programming", "two-phase recomputation differs", d.dpp_defect, tol);
    return report;
}

// --- subcommands -----------------------------------------------------------

void cmd_solve(Context& ctx) {
    const auto inst = build_instance(ctx.config);
    const auto x = side_adjusted(inst.payoff, ctx.config.side);
    const auto mask = build_mask(ctx.config.exercise, inst.model.lattice.steps());
    const auto report = solve_checked(ctx, inst, x, mask);

    ojson j;
    j["subcommand"] = "solve";
    j["instance"] = instance_summary(ctx, inst);
    j["exercise"] = mask_summary(mask);
    j["Y0"] = report.y0;
    j["price"] = ctx.config.side == Side::seller ? report.y0 : -report.y0;
    j["tau_star"] = tau_summary(inst.model, report);
    const auto& d = *report.diagnostics;
    j["diagnostics"] = {{"martingale_defect", d.martingale_defect},
                        {"root_defect", d.root_defect},
                        {"dpp_defect", d.dpp_defect}};
    if (ctx.config.moment_requested) {
        const auto m = moment_diagnostic(inst.model, ctx.config.moment);
        j["moment"] = {{"alpha", ctx.config.moment.alpha},
                       {"c", ctx.config.moment.c},
                       {"worst_ratio", m.worst_ratio},
                       {"all_within_bound", m.all_within_bound},
                       {"evaluations", m.entries.size()},
                       {"skipped", m.skipped}};
    }
    write_json(ctx.out / "report.json", j);
    write_values_csv(ctx.out / "values.csv", inst, report);
    ctx.log->info("Y0 = {}", report.y0);
}

void cmd_saddle(Context& ctx) {
    const auto inst = build_instance(ctx.config);
    const auto x = side_adjusted(inst.payoff, ctx.config.side);
    const auto mask = build_mask(ctx.config.exercise, inst.model.lattice.steps());
    const auto report = solve_checked(ctx, inst, x, mask);
    const auto p_star = saddle_policy(report);
    const auto check = verify_saddle(inst.model, p_star, report.tau_star, x, mask, ctx.par);
    const auto z = lower_value(inst.model, x, mask, ctx.par);
    const double tol = 1e-12 * scale_of(x);
    const double value_gap = std::abs(report.y0 - z[ScenarioLattice::root()]);
    ctx.require(check.left_defect <= tol, "saddle_left", "E^{P*}[X_tau*] exceeds inf_tau E^{P*}[X_tau]",
                check.left_defect, tol);
    ctx.require(check.right_defect <= tol, "saddle_right", "sup_P E^P[X_tau*] exceeds E^{P*}[X_tau*]",
                check.right_defect, tol);
    ctx.require(value_gap <= tol, "value_exists", "upper and lower values differ", value_gap, tol);

    ojson j;
    j["subcommand"] = "saddle";
    j["instance"] = instance_summary(ctx, inst);
    j["exercise"] = mask_summary(mask);
    j["Y0"] = report.y0;
    j["Z0"] = z[ScenarioLattice::root()];
    j["value_gap"] = value_gap;
    j["saddle_value"] = check.saddle_value;
    j["lower"] = check.lower;
    j["upper"] = check.upper;
    j["left_defect"] = check.left_defect;
    j["right_defect"] = check.right_defect;
    j["tau_star"] = tau_summary(inst.model, report);
    if (inst.model.lattice.size() <= kMaxJsonNodes) j["policy"] = p_star.choices();
    write_json(ctx.out / "saddle.json", j);

    const auto& L = inst.model.lattice;
    std::ostringstream csv;
    csv << "node,layer,kernel,params\n";
    for (NodeId id = 0; id < L.size(); ++id) {
        if (L.is_leaf(id)) continue;
        const auto& k = inst.model.kernels.at(id)[p_star[id]];
        csv << id << ',' << L.layer(id) << ',' << p_star[id] << ',';
        for (std::size_t i = 0; i < k.params.size(); ++i) csv << (i ? ";" : "") << num(k.params[i]);
        csv << '\n';
    }
    write_text(ctx.out / "policy.csv", csv.str());
}

struct OracleRow {
    double y0 = 0.0;
    double upper = 0.0;
    double lower = 0.0;
    std::uint64_t rules = 0;
    std::uint64_t policies = 0;
};

OracleRow oracle_one(Context& ctx, const Model& model, const ValueField& x, const ExerciseMask& mask,
                     const std::string& where) {
    const auto report = backward_solve(model, x, mask, ctx.par);
    const auto brute = brute_values(model, x.values(), mask, ctx.config.budget);
    const double du = std::abs(brute.upper - report.y0);
    const double dl = std::abs(brute.lower - report.y0);
    ctx.require(du <= kOracleTolerance, "oracle_upper", where + ": enumerated min-max differs from Y_0", du,
                kOracleTolerance);
    ctx.require(dl <= kOracleTolerance, "oracle_lower", where + ": enumerated max-min differs from Y_0", dl,
                kOracleTolerance);
    return {report.y0, brute.upper, brute.lower, brute.rules, brute.policies};
}

void cmd_oracle(Context& ctx) {
    ojson j;
    j["subcommand"] = "oracle-check";
    if (!ctx.config.ambiguity && ctx.config.suite) {
        const auto& s = *ctx.config.suite;
        SuiteOptions opts;
        opts.martingale = s.martingale;
        const auto suite = seed_suite(s.seed, s.count, opts);
        std::ostringstream csv;
        csv << "instance,nodes,rules,policies,y0,upper,lower\n";
        double worst = 0.0;
        for (std::size_t i = 0; i < suite.size(); ++i) {
            const auto tree = build_tree(suite[i]);
            const auto x = side_adjusted(PayoffProcess::tabulated(tree.payoff).tabulate(tree.model.lattice),
                                         ctx.config.side);
            const auto mask = build_mask(ctx.config.exercise, tree.model.lattice.steps());
            const auto row = oracle_one(ctx, tree.model, x, mask, "instance " + std::to_string(i));
            worst = std::max({worst, std::abs(row.upper - row.y0), std::abs(row.lower - row.y0)});
            csv << i << ',' << tree.model.lattice.size() << ',' << row.rules << ',' << row.policies << ','
                << num(row.y0) << ',' << num(row.upper) << ',' << num(row.lower) << '\n';
        }
        write_text(ctx.out / "oracle.csv", csv.str());
        j["suite"] = {{"seed", s.seed}, {"count", s.count}, {"martingale", s.martingale}};
        j["max_abs_gap"] = worst;
        j["instances_checked"] = suite.size();
    } else {
        const auto inst = build_instance(ctx.config);
        const auto x = side_adjusted(inst.payoff, ctx.config.side);
        const auto mask = build_mask(ctx.config.exercise, inst.model.lattice.steps());
        const auto row = oracle_one(ctx, inst.model, x, mask, "instance");
        j["instance"] = instance_summary(ctx, inst);
        j["upper"] = row.upper;
        j["lower"] = row.lower;
        j["dp_value"] = row.y0;
        j["max_abs_gap"] = std::max(std::abs(row.upper - row.y0), std::abs(row.lower - row.y0));
        j["instances_checked"] = 1;
        j["rules"] = row.rules;
        j["policies"] = row.policies;
    }
    j["tolerance"] = kOracleTolerance;
    j["certified"] = ctx.violations.empty();
    write_json(ctx.out / "certificate.json", j);
}

void cmd_refine(Context& ctx) {
    const auto& cfg = ctx.config;
    if (!cfg.ambiguity || cfg.ambiguity->type != AmbiguityConfig::Type::g) {
        throw ConfigError("refine: requires ambiguity.type = \"g\"");
    }
    if (!cfg.payoff) throw ConfigError("payoff: required");
    DyadicConfig dc;
    dc.sigmas = cfg.ambiguity->sigmas;
    dc.horizon = cfg.horizon;
    dc.steps = cfg.n_grid;
    if (dc.steps.empty()) {
        for (int n = 8; n <= 1024; n *= 2) dc.steps.push_back(n);
    }
    dc.side = cfg.side;
    dc.exercise_stride = exercise_stride(cfg.exercise);
    dc.with_hedge = cfg.hedge;
    dc.par = ctx.par;
    const auto payoff = make_builtin(*cfg.payoff);
    const auto study = dyadic_study(dc, payoff);

    std::ostringstream csv;
    csv << "n,y0,diff,rate,stop_nodes,first_stop_layer,early_stop_probability,hedge_x0,hedge_gap\n";
    ojson rows = ojson::array();
    auto opt = [](const std::optional<double>& v) { return v ? num(*v) : std::string(); };
    for (const auto& r : study.rows) {
        csv << r.steps << ',' << num(r.y0) << ',' << opt(r.diff) << ',' << opt(r.rate) << ',' << r.stop_nodes << ','
            << r.first_stop_layer << ',' << num(r.early_stop_probability) << ',' << opt(r.hedge_x0) << ','
            << opt(r.hedge_gap) << '\n';
        ojson row;
        row["n"] = r.steps;
        row["y0"] = r.y0;
        row["diff"] = r.diff ? ojson(*r.diff) : ojson(nullptr);
        row["rate"] = r.rate ? ojson(*r.rate) : ojson(nullptr);
        row["stop_nodes"] = r.stop_nodes;
        row["first_stop_layer"] = r.first_stop_layer;
        row["early_stop_probability"] = r.early_stop_probability;
        if (r.hedge_x0) {
            row["hedge_x0"] = *r.hedge_x0;
            row["hedge_gap"] = *r.hedge_gap;
        }
        rows.push_back(row);
    }
    write_text(ctx.out / "refine.csv", csv.str());

    ojson j;
    j["subcommand"] = "refine";
    j["payoff"] = payoff.label();
    j["side"] = side_name(cfg.side);
    j["rows"] = rows;
    j["rate_estimate"] = study.rate_estimate ? ojson(*study.rate_estimate) : ojson(nullptr);
    j["flags"] = study.flags;
    const std::size_t tail = std::min<std::size_t>(4, study.rows.empty() ? 0 : study.rows.size() - 1);
    j["strictly_decreasing_tail"] = {{"count", tail}, {"holds", study.strictly_decreasing_tail(tail)}};
    for (const auto& flag : study.flags) {
        if (flag.find("blow-up") != std::string::npos) ctx.require(false, "refine_blowup", flag, 0.0, 0.0);
    }

    // Nested masks and epsilon sweep on the finest lattice.
    const int finest = dc.steps.back();
    GLatticeSpec spec;
    spec.steps = finest;
    spec.horizon = cfg.horizon;
    spec.sigmas = dc.sigmas;
    const Model model = build_g_lattice(spec);
    const auto x = side_adjusted(payoff.tabulate(model.lattice), cfg.side);
    const auto nested = nested_mask_study(model, x, cfg.strides, ctx.par);
    j["nested_masks"] = {{"n", finest}, {"strides", nested.strides}, {"y0", nested.y0}, {"monotone", nested.monotone}};
    ctx.require(nested.monotone, "nested_masks", "Y_0 decreased when exercise dates were removed", 0.0, 0.0);

    if (!cfg.eps_grid.empty()) {
        const auto mask = dc.exercise_stride == 0 ? ExerciseMask::european(finest)
                                                  : ExerciseMask::every(finest, dc.exercise_stride);
        const auto report = backward_solve(model, x, mask, ctx.par);
        const auto eps = epsilon_study(model, report, cfg.eps_grid);
        std::ostringstream ecsv;
        ecsv << "eps,stop_nodes,effective_stops,value,value_ok,equals_tau_star\n";
        for (const auto& r : eps.rows) {
            ecsv << num(r.eps) << ',' << r.stop_nodes << ',' << r.effective_stops << ',' << num(r.value) << ','
                 << r.value_ok << ',' << r.equals_tau_star << '\n';
            ctx.require(r.value_ok, "epsilon_value", "E(Y_tau_eps) exceeds Y_0 at eps=" + num(r.eps), r.value - report.y0,
                        1e-12);
        }
        write_text(ctx.out / "epsilon.csv", ecsv.str());
        j["epsilon"] = {{"n", finest},
                        {"y0", report.y0},
                        {"min_positive_gap", eps.min_positive_gap ? ojson(*eps.min_positive_gap) : ojson(nullptr)},
                        {"monotone", eps.monotone},
                        {"stabilizes", eps.stabilizes}};
        ctx.require(eps.monotone, "epsilon_monotone", "stop sets are not nested in eps", 0.0, 0.0);
        ctx.require(eps.stabilizes, "epsilon_stabilizes", "tau_eps differs from tau* below the minimal gap", 0.0, 0.0);
    }
    write_json(ctx.out / "refine.json", j);
}

void add_hedge(Context& ctx, ojson& j, const Model& model, const HedgeStrategy& h, const PathwiseCheck& pw,
               double tol) {
    const bool martingale = martingale_kernels(model);
    ctx.require(pw.fraction == 1.0, "pathwise", "superhedge fails on some path", pw.fraction, 1.0);
    if (martingale) ctx.require(h.gap >= -tol, "dominance", "x0 < Y_0", h.gap, tol);
    j["x0"] = h.x0;
    j["Y0"] = h.y0;
    j["gap"] = h.gap;
    j["pathwise_ok"] = pw.fraction == 1.0;
    j["pathwise"] = {{"fraction", pw.fraction},
                     {"worst_slack", pw.worst_slack},
                     {"paths", pw.paths},
                     {"exhaustive", pw.exhaustive}};
    j["martingale_kernels"] = martingale;
    if (model.lattice.size() <= kMaxJsonNodes) j["H"] = h.holding.values();
}

void write_hedge_csv(const fs::path& path, const Model& model, const HedgeStrategy& h) {
    const auto& L = model.lattice;
    std::ostringstream csv;
    csv << "node,layer,level,active,stop,capital,holding\n";
    for (NodeId id = 0; id < L.size(); ++id) {
        csv << id << ',' << L.layer(id) << ',' << num(L.level(id)) << ',' << (h.active[id] ? 1 : 0) << ','
            << (h.exercise.stops(id) ? 1 : 0) << ',' << num(h.capital[id]) << ',' << num(h.holding[id]) << '\n';
    }
    write_text(path, csv.str());
}

void cmd_hedge(Context& ctx) {
    const auto inst = build_instance(ctx.config);
    if (inst.model.lattice.dimension() != 1) throw ConfigError("hedge: requires d = 1");
    const auto x = side_adjusted(inst.payoff, ctx.config.side);
    const auto mask = build_mask(ctx.config.exercise, inst.model.lattice.steps());
    const auto report = solve_checked(ctx, inst, x, mask);
    const auto hedge = superhedge_solve(inst.model, x, report.tau_star, report.y0, ctx.par);
    const auto pw = verify_pathwise(inst.model, hedge, x);
    const auto buyer = buyer_price(inst.model, inst.payoff, mask, ctx.par);

    ojson j;
    j["subcommand"] = "hedge";
    j["instance"] = instance_summary(ctx, inst);
    j["exercise"] = mask_summary(mask);
    add_hedge(ctx, j, inst.model, hedge, pw, 1e-12 * scale_of(x));
    j["prices"] = {{"buyer_value", buyer.buyer_value},
                   {"buyer_hedge", buyer.buyer_hedge},
                   {"seller_value", buyer.seller_value},
                   {"seller_hedge", buyer.seller_hedge}};
    write_json(ctx.out / "hedge.json", j);
    write_hedge_csv(ctx.out / "hedge.csv", inst.model, hedge);
}

void cmd_bermudan(Context& ctx) {
    const auto inst = build_instance(ctx.config);
    if (inst.model.lattice.dimension() != 1) throw ConfigError("bermudan: requires d = 1");
    const auto x = side_adjusted(inst.payoff, ctx.config.side);
    const auto mask = build_mask(ctx.config.exercise, inst.model.lattice.steps());
    solve_checked(ctx, inst, x, mask);
    const auto result = bermudan_price(inst.model, x, mask, ctx.par);
    const double tol = 1e-12 * scale_of(x);
    ctx.require(result.saddle_check.left_defect <= tol, "saddle_left", "P* is not a best response",
                result.saddle_check.left_defect, tol);
    ctx.require(result.saddle_check.right_defect <= tol, "saddle_right", "tau* is not a best response",
                result.saddle_check.right_defect, tol);

    ojson j;
    j["subcommand"] = "bermudan";
    j["instance"] = instance_summary(ctx, inst);
    j["exercise"] = mask_summary(mask);
    j["Y0"] = result.report.y0;
    j["price"] = ctx.config.side == Side::seller ? result.report.y0 : -result.report.y0;
    j["tau_star"] = tau_summary(inst.model, result.report);
    j["saddle"] = {{"saddle_value", result.saddle_check.saddle_value},
                   {"left_defect", result.saddle_check.left_defect},
                   {"right_defect", result.saddle_check.right_defect}};
    ojson hedge;
    add_hedge(ctx, hedge, inst.model, result.hedge, result.pathwise, tol);
    j["hedge"] = hedge;
    write_json(ctx.out / "bermudan.json", j);
    write_hedge_csv(ctx.out / "hedge.csv", inst.model, result.hedge);
}

void cmd_gen_suite(Context& ctx) {
    const SuiteConfig s = ctx.config.suite.value_or(SuiteConfig{});
    SuiteOptions opts;
    opts.martingale = s.martingale;
    const auto suite = seed_suite(s.seed, s.count, opts);
    ojson j;
    j["seed"] = s.seed;
    j["count"] = s.count;
    j["martingale"] = s.martingale;
    ojson instances = ojson::array();
    for (const auto& spec : suite) instances.push_back(ojson::parse(tree_spec_to_json(spec)));
    j["instances"] = instances;
    write_json(ctx.out / "suite.json", j);
}

} // namespace

int run(const std::vector<std::string>& args) {
    auto log = logger();
    CLI::App app{"Controller-and-stopper games under sublinear expectation"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "advsnell-out";
    unsigned threads = 0;
    std::uint64_t seed = 0;
    std::size_t count = 0;
    std::vector<double> eps_grid;
    std::vector<int> n_grid;
    auto* seed_opt = app.add_option("--seed", seed, "Suite seed");
    auto* count_opt = app.add_option("--count", count, "Suite size");
    app.add_option("--config", config_path, "JSON config")->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "Report directory");
    app.add_option("--threads", threads, "Worker threads (0 = all cores)");
    auto* eps_opt = app.add_option("--eps-grid", eps_grid, "Epsilon grid")->delimiter(',');
    auto* n_opt = app.add_option("--n-grid", n_grid, "Step counts")->delimiter(',');

    const std::map<std::string, std::function<void(Context&)>> commands{
        {"solve", cmd_solve},         {"saddle", cmd_saddle}, {"oracle-check", cmd_oracle}, {"refine", cmd_refine},
        {"hedge", cmd_hedge},         {"bermudan", cmd_bermudan}, {"gen-suite", cmd_gen_suite}};
    const std::map<std::string, std::string> help{
        {"solve", "Snell envelope, tau* and diagnostics"},
        {"saddle", "Saddle point (tau*, P*) and value equality"},
        {"oracle-check", "Brute-force certificate of upper = lower = Y0"},
        {"refine", "Dyadic refinement, nested masks and epsilon sweep"},
        {"hedge", "Superhedging strategy and buyer/seller prices"},
        {"bermudan", "Solve, saddle and hedge under the exercise mask"},
        {"gen-suite", "Seeded random tree instances"}};
    for (const auto& [name, text] : help) app.add_subcommand(name, text)->fallthrough();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInput;
    }
    const std::string name = app.get_subcommands().front()->get_name();

    Context ctx;
    ctx.subcommand = name;
    ctx.log = log;
    ctx.par.threads = threads;
    ctx.out = out_dir;
    const auto started = std::chrono::steady_clock::now();
    const std::string started_utc = utc_now();
    try {
        if (!config_path.empty()) {
            ctx.config = load_config(config_path);
        } else if (name != "gen-suite") {
            throw ConfigError("--config is required for " + name);
        }
        if (*seed_opt || *count_opt) {
            if (!ctx.config.suite) ctx.config.suite = SuiteConfig{};
            if (*seed_opt) ctx.config.suite->seed = seed;
            if (*count_opt) ctx.config.suite->count = count;
            if (ctx.config.suite->count == 0) throw ConfigError("--count must be at least 1");
        }
        if (*eps_opt) ctx.config.eps_grid = eps_grid;
        if (*n_opt) ctx.config.n_grid = n_grid;
        std::error_code ec;
        fs::create_directories(ctx.out, ec);
        if (ec) throw ConfigError("cannot create output directory " + ctx.out.string() + ": " + ec.message());

        commands.at(name)(ctx);
    } catch (const ConfigError& e) {
        log->error("input error: {}", e.what());
        return kExitInput;
    } catch (const BudgetError& e) {
        log->error("budget exceeded: {}", e.what());
        return kExitInput;
    } catch (const ModelError& e) {
        log->error("invalid model: {}", e.what());
        return kExitInput;
    } catch (const ContractViolation& e) {
        ctx.violations.push_back({"contract", e.what(), 0.0, 0.0});
    } catch (const std::exception& e) {
        log->error("error: {}", e.what());
        return kExitInput;
    }

    ojson meta;
    meta["subcommand"] = name;
    meta["config"] = config_path;
    meta["threads"] = ctx.par.resolved();
    meta["started_utc"] = started_utc;
    meta["elapsed_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    try {
        write_json(ctx.out / "metadata.json", meta);
        if (!ctx.violations.empty()) {
            ojson v = ojson::array();
            for (const auto& x : ctx.violations) {
                v.push_back({{"check", x.check}, {"detail", x.detail}, {"value", x.value}, {"tolerance", x.tolerance}});
                log->error("contract violation [{}]: {} (value {}, tolerance {})", x.check, x.detail, x.value,
                           x.tolerance);
            }
            write_json(ctx.out / "violations.json", {{"subcommand", name}, {"violations", v}});
            return kExitViolation;
        }
    } catch (const std::exception& e) {
        log->error("error: {}", e.what());
        return kExitInput;
    }
    return kExitOk;
}

} // namespace advsnell::cli
