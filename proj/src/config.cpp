#include "advsnell/config.hpp"

#include "advsnell/error.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace advsnell {

namespace {

using nlohmann::json;

// Strict view of one JSON object: rejects keys outside `allowed` up front and
// reports typed reads with their full key path.
class ObjectReader {
public:
    ObjectReader(const json& object, std::string path, std::initializer_list<const char*> allowed)
        : object_(object), path_(std::move(path)) {
        if (!object_.is_object()) throw ConfigError(where() + ": expected an object");
        const std::set<std::string> keys(allowed.begin(), allowed.end());
        for (const auto& item : object_.items()) {
            if (!keys.count(item.key())) throw ConfigError(where() + ": unknown key \"" + item.key() + "\"");
        }
    }

    bool has(const char* key) const { return object_.contains(key); }
    const json& raw(const char* key) const { return object_.at(key); }
    std::string key_path(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

    std::optional<double> number(const char* key) const {
        if (!has(key)) return std::nullopt;
        const auto& v = raw(key);
        if (!v.is_number()) throw ConfigError(key_path(key) + ": expected a number");
        return v.get<double>();
    }
    std::optional<std::int64_t> integer(const char* key) const {
        if (!has(key)) return std::nullopt;
        const auto& v = raw(key);
        if (!v.is_number_integer()) throw ConfigError(key_path(key) + ": expected an integer");
        return v.get<std::int64_t>();
    }
    std::optional<bool> boolean(const char* key) const {
        if (!has(key)) return std::nullopt;
        const auto& v = raw(key);
        if (!v.is_boolean()) throw ConfigError(key_path(key) + ": expected a boolean");
        return v.get<bool>();
    }
    std::optional<std::string> string(const char* key) const {
        if (!has(key)) return std::nullopt;
        const auto& v = raw(key);
        if (!v.is_string()) throw ConfigError(key_path(key) + ": expected a string");
        return v.get<std::string>();
    }
    std::optional<std::vector<double>> numbers(const char* key) const {
        if (!has(key)) return std::nullopt;
        return number_array(raw(key), key_path(key));
    }
    std::optional<std::vector<int>> integers(const char* key) const {
        if (!has(key)) return std::nullopt;
        const auto& v = raw(key);
        if (!v.is_array()) throw ConfigError(key_path(key) + ": expected an array of integers");
        std::vector<int> out;
        for (const auto& x : v) {
            if (!x.is_number_integer()) throw ConfigError(key_path(key) + ": expected an array of integers");
            out.push_back(x.get<int>());
        }
        return out;
    }

    static std::vector<double> number_array(const json& v, const std::string& path) {
        if (!v.is_array()) throw ConfigError(path + ": expected an array of numbers");
        std::vector<double> out;
        for (const auto& x : v) {
            if (!x.is_number()) throw ConfigError(path + ": expected an array of numbers");
            out.push_back(x.get<double>());
        }
        return out;
    }

private:
    std::string where() const { return path_.empty() ? "config" : path_; }

    const json& object_;
    std::string path_;
};

json parse_json(std::string_view text) {
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("malformed JSON: ") + e.what());
    }
}

TreeSpec tree_from_json(const json& doc, const std::string& path, bool allow_extra_keys) {
    TreeSpec spec;
    const json* nodes = nullptr;
    if (allow_extra_keys) {
        // Inside a run config the horizon and dimension come from the top level.
        ObjectReader r(doc, path, {"type", "nodes"});
        if (!r.has("nodes")) throw ConfigError(r.key_path("nodes") + ": required");
        nodes = &r.raw("nodes");
    } else {
        ObjectReader r(doc, path, {"T", "d", "nodes"});
        spec.horizon = r.number("T").value_or(1.0);
        spec.dimension = static_cast<int>(r.integer("d").value_or(1));
        if (!r.has("nodes")) throw ConfigError(r.key_path("nodes") + ": required");
        nodes = &r.raw("nodes");
    }
    if (!nodes->is_array()) throw ConfigError(path + ".nodes: expected an array");
    for (std::size_t i = 0; i < nodes->size(); ++i) {
        const std::string npath = path + ".nodes[" + std::to_string(i) + "]";
        ObjectReader nr((*nodes)[i], npath, {"id", "children", "kernels", "payoff"});
        TreeSpec::Node node;
        const auto id = nr.string("id");
        if (!id) throw ConfigError(npath + ".id: required");
        node.id = *id;
        if (nr.has("children")) {
            const auto& kids = nr.raw("children");
            if (!kids.is_array()) throw ConfigError(npath + ".children: expected an array");
            for (std::size_t c = 0; c < kids.size(); ++c) {
                const std::string cpath = npath + ".children[" + std::to_string(c) + "]";
                ObjectReader cr(kids[c], cpath, {"child", "increment"});
                TreeSpec::Edge edge;
                const auto child = cr.string("child");
                if (!child) throw ConfigError(cpath + ".child: required");
                edge.child = *child;
                if (!cr.has("increment")) throw ConfigError(cpath + ".increment: required");
                const auto& inc = cr.raw("increment");
                edge.increment = inc.is_number() ? std::vector<double>{inc.get<double>()}
                                                 : ObjectReader::number_array(inc, cpath + ".increment");
                node.children.push_back(std::move(edge));
            }
        }
        if (nr.has("kernels")) {
            const auto& ks = nr.raw("kernels");
            if (!ks.is_array()) throw ConfigError(npath + ".kernels: expected an array");
            for (std::size_t k = 0; k < ks.size(); ++k) {
                node.kernels.push_back(ObjectReader::number_array(ks[k], npath + ".kernels[" + std::to_string(k) + "]"));
            }
        }
        node.payoff = nr.number("payoff");
        spec.nodes.push_back(std::move(node));
    }
    return spec;
}

json tree_to_json(const TreeSpec& spec) {
    json doc = json::object();
    doc["T"] = spec.horizon;
    doc["d"] = spec.dimension;
    json nodes = json::array();
    for (const auto& node : spec.nodes) {
        json n = json::object();
        n["id"] = node.id;
        if (!node.children.empty()) {
            json kids = json::array();
            for (const auto& e : node.children) kids.push_back({{"child", e.child}, {"increment", e.increment}});
            n["children"] = kids;
            n["kernels"] = node.kernels;
        }
        if (node.payoff) n["payoff"] = *node.payoff;
        nodes.push_back(n);
    }
    doc["nodes"] = nodes;
    return doc;
}

AmbiguityConfig parse_ambiguity(const json& doc) {
    if (!doc.is_object() || !doc.contains("type") || !doc.at("type").is_string()) {
        throw ConfigError("ambiguity.type: required string (g, rectangle or explicit)");
    }
    const auto type = doc.at("type").get<std::string>();
    AmbiguityConfig out;
    if (type == "g") {
        ObjectReader r(doc, "ambiguity", {"type", "sigmas"});
        out.type = AmbiguityConfig::Type::g;
        out.sigmas = r.numbers("sigmas").value_or(std::vector<double>{});
        if (out.sigmas.empty()) throw ConfigError("ambiguity.sigmas: required nonempty array");
    } else if (type == "rectangle") {
        ObjectReader r(doc, "ambiguity", {"type", "drifts", "vols", "step"});
        out.type = AmbiguityConfig::Type::rectangle;
        out.drifts = r.numbers("drifts").value_or(std::vector<double>{0.0});
        out.vols = r.numbers("vols").value_or(std::vector<double>{});
        if (out.vols.empty()) throw ConfigError("ambiguity.vols: required nonempty array");
        out.step = r.number("step");
    } else if (type == "explicit") {
        out.type = AmbiguityConfig::Type::explicit_tree;
        out.tree = tree_from_json(doc, "ambiguity", true);
    } else {
        throw ConfigError("ambiguity.type: unknown value \"" + type + "\"");
    }
    return out;
}

ExerciseConfig parse_exercise(const json& doc) {
    ExerciseConfig out;
    std::string type;
    if (doc.is_string()) {
        type = doc.get<std::string>();
    } else {
        ObjectReader r(doc, "exercise", {"type", "stride", "layers"});
        type = r.string("type").value_or("american");
        out.stride = static_cast<int>(r.integer("stride").value_or(1));
        out.layers = r.integers("layers").value_or(std::vector<int>{});
    }
    if (type == "american") {
        out.type = ExerciseConfig::Type::american;
    } else if (type == "european") {
        out.type = ExerciseConfig::Type::european;
    } else if (type == "every") {
        out.type = ExerciseConfig::Type::every;
        if (out.stride <= 0) throw ConfigError("exercise.stride: must be positive");
    } else if (type == "layers") {
        out.type = ExerciseConfig::Type::layers;
    } else {
        throw ConfigError("exercise.type: unknown value \"" + type + "\"");
    }
    return out;
}

PayoffSpec parse_payoff(const json& doc) {
    ObjectReader r(doc, "payoff", {"kind", "strike", "spot", "value", "cap"});
    PayoffSpec out;
    const auto kind = r.string("kind");
    if (!kind) throw ConfigError("payoff.kind: required");
    try {
        out.kind = parse_payoff_kind(*kind);
    } catch (const std::exception&) {
        throw ConfigError("payoff.kind: unknown value \"" + *kind + "\"");
    }
    out.strike = r.number("strike").value_or(0.0);
    out.spot = r.number("spot").value_or(0.0);
    out.value = r.number("value").value_or(0.0);
    out.cap = r.number("cap");
    return out;
}

} // namespace

RunConfig parse_config(std::string_view text) {
    const json doc = parse_json(text);
    ObjectReader r(doc, "",
                   {"mode", "n", "T", "d", "ambiguity", "summaries", "payoff", "side", "exercise", "budget",
                    "eps_grid", "n_grid", "strides", "hedge", "suite", "moment", "seed", "count"});
    RunConfig cfg;
    if (const auto mode = r.string("mode")) {
        if (*mode == "tree") {
            cfg.mode = LatticeMode::tree;
        } else if (*mode == "recombining") {
            cfg.mode = LatticeMode::recombining;
        } else {
            throw ConfigError("mode: expected \"tree\" or \"recombining\"");
        }
    }
    cfg.n = static_cast<int>(r.integer("n").value_or(0));
    cfg.horizon = r.number("T").value_or(1.0);
    cfg.dimension = static_cast<int>(r.integer("d").value_or(1));
    if (!(cfg.horizon > 0.0)) throw ConfigError("T: must be positive");
    if (cfg.dimension != 1 && !(r.has("ambiguity") && r.raw("ambiguity").value("type", "") == "explicit")) {
        throw ConfigError("d: lattice builders support d = 1 only; use an explicit tree for d > 1");
    }
    if (r.has("ambiguity")) cfg.ambiguity = parse_ambiguity(r.raw("ambiguity"));
    if (r.has("summaries")) {
        ObjectReader s(r.raw("summaries"), "summaries", {"running_max", "running_sum"});
        cfg.summaries.running_max = s.boolean("running_max").value_or(false);
        cfg.summaries.running_sum = s.boolean("running_sum").value_or(false);
    }
    if (r.has("payoff")) cfg.payoff = parse_payoff(r.raw("payoff"));
    if (const auto side = r.string("side")) {
        if (*side == "seller") {
            cfg.side = Side::seller;
        } else if (*side == "buyer") {
            cfg.side = Side::buyer;
        } else {
            throw ConfigError("side: expected \"seller\" or \"buyer\"");
        }
    }
    if (r.has("exercise")) cfg.exercise = parse_exercise(r.raw("exercise"));
    if (r.has("budget")) {
        ObjectReader b(r.raw("budget"), "budget", {"max_rule_nodes", "max_policy_nodes", "max_policies", "max_paths"});
        if (auto v = b.integer("max_rule_nodes")) cfg.budget.max_rule_nodes = static_cast<std::size_t>(*v);
        if (auto v = b.integer("max_policy_nodes")) cfg.budget.max_policy_nodes = static_cast<std::size_t>(*v);
        if (auto v = b.integer("max_policies")) cfg.budget.max_policies = static_cast<std::uint64_t>(*v);
        if (auto v = b.integer("max_paths")) cfg.budget.max_paths = static_cast<std::uint64_t>(*v);
    }
    cfg.eps_grid = r.numbers("eps_grid").value_or(std::vector<double>{});
    cfg.n_grid = r.integers("n_grid").value_or(std::vector<int>{});
    if (auto s = r.integers("strides")) cfg.strides = *s;
    cfg.hedge = r.boolean("hedge").value_or(false);
    if (r.has("suite")) {
        ObjectReader s(r.raw("suite"), "suite", {"seed", "count", "martingale"});
        SuiteConfig suite;
        if (auto v = s.integer("seed")) suite.seed = static_cast<std::uint64_t>(*v);
        if (auto v = s.integer("count")) suite.count = static_cast<std::size_t>(*v);
        suite.martingale = s.boolean("martingale").value_or(false);
        if (suite.count == 0) throw ConfigError("suite.count: must be at least 1");
        cfg.suite = suite;
    }
    if (auto v = r.integer("seed")) {
        if (!cfg.suite) cfg.suite = SuiteConfig{};
        cfg.suite->seed = static_cast<std::uint64_t>(*v);
    }
    if (auto v = r.integer("count")) {
        if (!cfg.suite) cfg.suite = SuiteConfig{};
        cfg.suite->count = static_cast<std::size_t>(*v);
    }
    if (r.has("moment")) {
        ObjectReader m(r.raw("moment"), "moment", {"alpha", "c", "enumerate_limit", "sampled_policies", "seed"});
        cfg.moment_requested = true;
        cfg.moment.alpha = m.number("alpha").value_or(cfg.moment.alpha);
        cfg.moment.c = m.number("c").value_or(cfg.moment.c);
        if (auto v = m.integer("enumerate_limit")) cfg.moment.enumerate_limit = static_cast<std::size_t>(*v);
        if (auto v = m.integer("sampled_policies")) cfg.moment.sampled_policies = static_cast<std::size_t>(*v);
        if (auto v = m.integer("seed")) cfg.moment.seed = static_cast<std::uint64_t>(*v);
        if (!(cfg.moment.alpha > 0.0) || !(cfg.moment.c > 0.0)) throw ConfigError("moment: alpha and c must be positive");
    }

    if (cfg.ambiguity && cfg.ambiguity->type != AmbiguityConfig::Type::explicit_tree && !cfg.n_grid.empty() &&
        cfg.n == 0) {
        cfg.n = cfg.n_grid.back();
    }
    if (cfg.ambiguity && cfg.ambiguity->type == AmbiguityConfig::Type::explicit_tree) {
        if (cfg.mode == LatticeMode::recombining) throw ConfigError("mode: explicit trees are always tree mode");
        cfg.ambiguity->tree.horizon = cfg.horizon;
        cfg.ambiguity->tree.dimension = cfg.dimension;
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

TreeSpec parse_tree_spec(std::string_view json_text) { return tree_from_json(parse_json(json_text), "tree", false); }

std::string tree_spec_to_json(const TreeSpec& spec) { return tree_to_json(spec).dump(); }

Instance build_instance(const RunConfig& cfg) {
    if (!cfg.ambiguity) throw ConfigError("ambiguity: required");
    const auto& amb = *cfg.ambiguity;
    Instance out;
    if (amb.type == AmbiguityConfig::Type::explicit_tree) {
        auto tree = build_tree(amb.tree);
        out.model = std::move(tree.model);
        out.labels = std::move(tree.labels);
        if (cfg.payoff) {
            const auto process = make_builtin(*cfg.payoff);
            out.payoff = process.tabulate(out.model.lattice);
            out.payoff_label = process.label();
        } else if (!tree.payoff.empty()) {
            const auto process = PayoffProcess::tabulated(tree.payoff);
            out.payoff = process.tabulate(out.model.lattice);
            out.payoff_label = process.label();
        } else {
            throw ConfigError("payoff: required unless every tree node lists a payoff");
        }
        return out;
    }
    if (cfg.n <= 0) throw ConfigError("n: required positive step count");
    if (!cfg.payoff) throw ConfigError("payoff: required");
    const LatticeMode mode = cfg.mode.value_or(LatticeMode::recombining);
    if (amb.type == AmbiguityConfig::Type::g) {
        out.model = build_g_lattice(GLatticeSpec{cfg.n, cfg.horizon, amb.sigmas, mode, cfg.summaries});
    } else {
        out.model =
            build_rectangle_lattice(RectangleSpec{cfg.n, cfg.horizon, amb.drifts, amb.vols, amb.step, mode, cfg.summaries});
    }
    const auto process = make_builtin(*cfg.payoff);
    out.payoff = process.tabulate(out.model.lattice);
    out.payoff_label = process.label();
    return out;
}

ExerciseMask build_mask(const ExerciseConfig& exercise, int steps) {
    switch (exercise.type) {
    case ExerciseConfig::Type::american:
        return ExerciseMask::american(steps);
    case ExerciseConfig::Type::european:
        return ExerciseMask::european(steps);
    case ExerciseConfig::Type::every:
        return ExerciseMask::every(steps, exercise.stride);
    case ExerciseConfig::Type::layers: {
        auto mask = ExerciseMask::from_layers(steps, exercise.layers);
        mask.validate(steps);
        return mask;
    }
    }
    throw ConfigError("exercise: unknown type");
}

int exercise_stride(const ExerciseConfig& exercise) {
    switch (exercise.type) {
    case ExerciseConfig::Type::american:
        return 1;
    case ExerciseConfig::Type::european:
        return 0;
    case ExerciseConfig::Type::every:
        return exercise.stride;
    case ExerciseConfig::Type::layers:
        break;
    }
    throw ConfigError("exercise: explicit layer lists do not carry over across step counts; use a stride");
}

} // namespace advsnell
