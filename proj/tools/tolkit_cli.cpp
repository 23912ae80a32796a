#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tolkit/tolkit.h"

namespace {

using json = nlohmann::json;

// Exit codes.
constexpr int kExitTolerance = 0;
constexpr int kExitNoTolerance = 1;
constexpr int kExitInconclusive = 2;
constexpr int kExitPrecondition = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitParse = 5;
constexpr int kExitIo = 6;
constexpr int kExitUnsound = 7;
constexpr int kExitUsage = 64;
constexpr int kExitInternal = 70;

// Raised for failures that end the run with a given exit code.
struct Failure {
    int code;
    std::string status;
    std::string message;
};

int exit_code_for(tk_status s) {
    switch (s) {
        case TK_OK:
            return 0;
        case TK_ERR_ARGUMENT:
            return kExitUsage;
        case TK_ERR_PARSE:
            return kExitParse;
        case TK_ERR_PRECONDITION:
            return kExitPrecondition;
        case TK_ERR_DOMAIN:
        case TK_ERR_NUMERIC:
            return kExitNumeric;
        case TK_ERR_IO:
            return kExitIo;
        case TK_ERR_INTERNAL:
            return kExitInternal;
    }
    return kExitInternal;
}

void check(tk_status s) {
    if (s != TK_OK) throw Failure{exit_code_for(s), tk_status_name(s), tk_last_error()};
}

[[noreturn]] void usage(const std::string& message) { throw Failure{kExitUsage, "usage", message}; }

// Owning wrappers for C API outputs.
struct CString {
    char* p = nullptr;
    ~CString() { tk_string_free(p); }
    [[nodiscard]] std::string str() const { return p != nullptr ? std::string(p) : std::string(); }
};

struct SystemHandle {
    tk_system* p = nullptr;
    ~SystemHandle() { tk_system_free(p); }
};

struct MapHandle {
    tk_map* p = nullptr;
    ~MapHandle() { tk_map_free(p); }
};

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Failure{kExitIo, "io-error", "cannot write '" + path + "'"};
    out << content;
    if (!out) throw Failure{kExitIo, "io-error", "write failed for '" + path + "'"};
}

std::vector<double> parse_numbers(const std::string& text, const std::string& flag) {
    std::vector<double> v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            const double d = std::stod(item, &used);
            if (used != item.size() || !std::isfinite(d)) throw std::invalid_argument(item);
            v.push_back(d);
        } catch (const std::exception&) {
            usage("--" + flag + ": '" + item + "' is not a number");
        }
    }
    return v;
}

// How a flag's text becomes a config value.
enum class FlagKind { number, integer, text, vector, flag, negated_flag, resolution, points };

struct FlagSpec {
    std::string name;  // long option without dashes
    std::string key;   // config key
    FlagKind kind;
    std::string help;
    int arity = 0;  // expected vector length, 0 for any
};

struct CommandSpec {
    std::string name;
    std::string help;
    json defaults;
    std::vector<FlagSpec> flags;
};

const std::vector<FlagSpec> kSystemFlags = {
    {"system", "system", FlagKind::text, "builtin system name (ex1, ex2, ex3)"},
    {"system-file", "system_file", FlagKind::text, "system definition file"},
    {"matrix", "matrix", FlagKind::vector, "linear system a11,a12,a21,a22", 4},
};

const std::vector<FlagSpec> kIntegrationFlags = {
    {"horizon", "horizon", FlagKind::number, "integration horizon"},
    {"rel-tol", "rel_tol", FlagKind::number, "relative tolerance"},
    {"abs-tol", "abs_tol", FlagKind::number, "absolute tolerance"},
    {"eps-ball", "eps_ball", FlagKind::number, "radius of the stopping ball at the node"},
    {"max-steps", "max_steps", FlagKind::integer, "integrator step cap"},
};

const std::vector<FlagSpec> kToleranceFlags = {
    {"eps-tol", "eps_tol", FlagKind::number, "tolerance threshold on phi_1 - psi_1"},
    {"tie-tolerance", "tie_tolerance", FlagKind::number, "tie threshold"},
    {"linear-radius", "linear_radius", FlagKind::number, "hand-off radius for the linear tail"},
};

const std::vector<FlagSpec> kStyleFlags = {
    {"width", "width", FlagKind::integer, "SVG width"},
    {"height", "height", FlagKind::integer, "SVG height"},
    {"title", "title", FlagKind::text, "SVG title"},
};

json system_defaults() { return {{"system", nullptr}, {"system_file", nullptr}, {"matrix", nullptr}}; }

json integration_defaults() {
    return {{"horizon", 1000.0}, {"rel_tol", 1e-9}, {"abs_tol", 1e-12}, {"eps_ball", 1e-6}, {"max_steps", 2000000}};
}

json tolerance_defaults() { return {{"eps_tol", 1e-7}, {"tie_tolerance", 1e-10}, {"linear_radius", 1e-3}}; }

json style_defaults() { return {{"width", 640}, {"height", 480}, {"title", ""}}; }

json merged(std::initializer_list<json> parts) {
    json out = json::object();
    for (const json& p : parts) out.update(p);
    return out;
}

std::vector<FlagSpec> concat(std::initializer_list<std::vector<FlagSpec>> parts) {
    std::vector<FlagSpec> out;
    for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
    return out;
}

std::vector<CommandSpec> command_specs() {
    const FlagSpec ref{"ref", "ref", FlagKind::vector, "reference initial point x,y", 2};
    const FlagSpec pert{"pert", "pert", FlagKind::vector, "perturbed initial point x,y", 2};
    const FlagSpec box{"box", "box", FlagKind::vector, "xmin,xmax,ymin,ymax", 4};
    const FlagSpec svg{"svg", "svg", FlagKind::text, "write an SVG rendering to this path"};
    return {
        {"check", "describe a system, its node and fixed points",
         merged({system_defaults(), {{"box", {0.0, 5.0, 0.0, 5.0}}, {"grid", 16}}}),
         concat({kSystemFlags,
                 {box, {"grid", "grid", FlagKind::integer, "Newton seeds per axis"}}})},
        {"simulate", "integrate one trajectory",
         merged({system_defaults(), integration_defaults(),
                 {{"from", nullptr}, {"backward", false}, {"to_axis", false}, {"csv", nullptr}}}),
         concat({kSystemFlags, kIntegrationFlags,
                 {{"from", "from", FlagKind::vector, "initial point x,y", 2},
                  {"backward", "backward", FlagKind::flag, "integrate backward in time"},
                  {"to-axis", "to_axis", FlagKind::flag, "integrate backward until an axis is met"},
                  {"csv", "csv", FlagKind::text, "write samples as CSV to this path"}}})},
        {"verdict", "decide tolerance for one pair",
         merged({system_defaults(), integration_defaults(), tolerance_defaults(),
                 {{"ref", nullptr},
                  {"pert", nullptr},
                  {"group_property", false},
                  {"robustness_samples", 0},
                  {"robustness_radius", 1e-3},
                  {"seed", 1}}}),
         concat({kSystemFlags, kIntegrationFlags, kToleranceFlags,
                 {ref, pert, {"group-property", "group_property", FlagKind::flag, "use the group-property shortcut"},
                  {"samples", "robustness_samples", FlagKind::integer, "robustness samples per ball"},
                  {"radius", "robustness_radius", FlagKind::number, "robustness ball radius"},
                  {"seed", "seed", FlagKind::integer, "sampling seed"}}})},
        {"regions", "excitability report, T and T-hat for a reference point",
         merged({system_defaults(), integration_defaults(), style_defaults(),
                 {{"ref", nullptr}, {"pert", nullptr}, {"box", nullptr}, {"svg", nullptr}}}),
         concat({kSystemFlags, kIntegrationFlags, kStyleFlags, {ref, pert, box, svg}})},
        {"scan", "tolerance map over a grid of perturbed points",
         merged({system_defaults(), integration_defaults(), tolerance_defaults(), style_defaults(),
                 {{"ref", nullptr},
                  {"box", nullptr},
                  {"res", {20, 20}},
                  {"predict", true},
                  {"threads", 0},
                  {"csv", nullptr},
                  {"svg", nullptr}}}),
         concat({kSystemFlags, kIntegrationFlags, kToleranceFlags, kStyleFlags,
                 {ref, box, {"res", "res", FlagKind::resolution, "grid size N or NX,NY"},
                  {"no-predict", "predict", FlagKind::negated_flag, "skip region predictions"},
                  {"threads", "threads", FlagKind::integer, "worker threads (0: TOLKIT_THREADS or all cores)"},
                  {"csv", "csv", FlagKind::text, "write the map as CSV to this path"}, svg}})},
        {"linear", "closed-form analysis of x' = A x",
         {{"matrix", nullptr}, {"ref", nullptr}, {"pert", nullptr}},
         {{"matrix", "matrix", FlagKind::vector, "a11,a12,a21,a22", 4}, ref, pert}},
        {"estimate", "passage-time bounds for a pair",
         merged({system_defaults(), integration_defaults(), {{"ref", nullptr}, {"pert", nullptr}, {"x_f", nullptr}}}),
         concat({kSystemFlags, kIntegrationFlags,
                 {ref, pert, {"x-f", "x_f", FlagKind::number, "target abscissa (default: x at max phi_2)"}}})},
        {"render", "static SVG rendering",
         merged({system_defaults(), integration_defaults(), style_defaults(),
                 {{"kind", "portrait"},
                  {"out", nullptr},
                  {"frames", 0},
                  {"box", nullptr},
                  {"isoclines", json::array()},
                  {"nullclines", true},
                  {"inhibition", false},
                  {"grid", 200},
                  {"trajectories", json::array()},
                  {"t_max", 50.0},
                  {"ref", nullptr},
                  {"res", {20, 20}},
                  {"fixed_point", nullptr}}}),
         concat({kSystemFlags, kIntegrationFlags, kStyleFlags,
                 {{"kind", "kind", FlagKind::text, "portrait, regions, map or basin"},
                  {"out", "out", FlagKind::text, "output SVG path (frames: prefix)"},
                  {"frames", "frames", FlagKind::integer, "write N numbered SVGs with growing trajectories"},
                  box,
                  {"isoclines", "isoclines", FlagKind::vector, "isocline levels C of f = C"},
                  {"no-nullclines", "nullclines", FlagKind::negated_flag, "omit nullclines"},
                  {"inhibition", "inhibition", FlagKind::flag, "draw the f_y = 0 curve"},
                  {"grid", "grid", FlagKind::integer, "level-set grid size"},
                  {"traj", "trajectories", FlagKind::points, "trajectory start x,y (repeatable)"},
                  {"t-max", "t_max", FlagKind::number, "trajectory duration"},
                  ref,
                  {"res", "res", FlagKind::resolution, "grid size N or NX,NY for map and basin"},
                  {"fixed-point", "fixed_point", FlagKind::vector, "basin fixed point x,y", 2}}})},
    };
}

// Raw flag text captured by CLI11.
struct FlagValues {
    std::vector<std::string> text;
    int count = 0;
};

json flag_value(const FlagSpec& f, const FlagValues& v) {
    switch (f.kind) {
        case FlagKind::flag:
            return true;
        case FlagKind::negated_flag:
            return false;
        case FlagKind::text:
            return v.text.back();
        case FlagKind::number: {
            const auto n = parse_numbers(v.text.back(), f.name);
            if (n.size() != 1) usage("--" + f.name + " takes one number");
            return n[0];
        }
        case FlagKind::integer: {
            const auto n = parse_numbers(v.text.back(), f.name);
            if (n.size() != 1 || n[0] != std::floor(n[0])) usage("--" + f.name + " takes one integer");
            return static_cast<long long>(n[0]);
        }
        case FlagKind::vector: {
            const auto n = parse_numbers(v.text.back(), f.name);
            if (f.arity > 0 && static_cast<int>(n.size()) != f.arity) {
                usage("--" + f.name + " takes " + std::to_string(f.arity) + " comma-separated numbers");
            }
            return n;
        }
        case FlagKind::resolution: {
            const auto n = parse_numbers(v.text.back(), f.name);
            if (n.size() == 1) return {static_cast<long long>(n[0]), static_cast<long long>(n[0])};
            if (n.size() == 2) return {static_cast<long long>(n[0]), static_cast<long long>(n[1])};
            usage("--res takes N or NX,NY");
        }
        case FlagKind::points: {
            json pts = json::array();
            for (const auto& t : v.text) {
                const auto n = parse_numbers(t, f.name);
                if (n.size() != 2) usage("--" + f.name + " takes x,y");
                pts.push_back(n);
            }
            return pts;
        }
    }
    return nullptr;
}

// defaults < config file < explicit flags. Unknown config keys are usage errors.
json resolve_config(const CommandSpec& spec, const std::string& config_path,
                    const std::vector<std::pair<FlagSpec, FlagValues>>& flags) {
    json cfg = spec.defaults;
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw Failure{kExitIo, "io-error", "cannot open config '" + config_path + "'"};
        json file;
        try {
            file = json::parse(in);
        } catch (const json::parse_error& e) {
            usage("config '" + config_path + "' is not valid JSON: " + e.what());
        }
        if (!file.is_object()) usage("config must be a JSON object");
        for (const auto& item : file.items()) {
            if (item.key() == "command") {
                if (item.value() != spec.name) usage("config is for command '" + item.value().dump() + "'");
                continue;
            }
            if (!cfg.contains(item.key())) usage("unknown config key '" + item.key() + "'");
            cfg[item.key()] = item.value();
        }
    }
    for (const auto& [f, v] : flags) {
        if (v.count > 0) cfg[f.key] = flag_value(f, v);
    }
    return cfg;
}

bool has(const json& cfg, const char* key) { return cfg.contains(key) && !cfg[key].is_null(); }

std::vector<double> point(const json& cfg, const char* key, std::size_t n = 2) {
    if (!has(cfg, key)) usage(std::string("missing --") + key);
    std::vector<double> v;
    try {
        v = cfg[key].get<std::vector<double>>();
    } catch (const json::exception&) {
        usage(std::string("'") + key + "' must be a list of numbers");
    }
    if (v.size() != n) usage(std::string("'") + key + "' needs " + std::to_string(n) + " numbers");
    return v;
}

// Subset of cfg forwarded to the C API as an options object.
std::string options(const json& cfg, std::initializer_list<const char*> names) {
    json o = json::object();
    for (const char* k : names) {
        if (has(cfg, k)) o[k] = cfg[k];
    }
    return o.dump();
}

#define TK_INTEGRATION_KEYS "horizon", "rel_tol", "abs_tol", "eps_ball", "max_steps"
#define TK_TOLERANCE_KEYS "eps_tol", "tie_tolerance", "linear_radius"
#define TK_STYLE_KEYS "width", "height", "title"

void load_system(const json& cfg, SystemHandle& out) {
    const int sources = int(has(cfg, "system")) + int(has(cfg, "system_file")) + int(has(cfg, "matrix"));
    if (sources == 0) usage("one of --system, --system-file or --matrix is required");
    if (sources > 1) usage("--system, --system-file and --matrix are exclusive");
    if (has(cfg, "system")) {
        check(tk_system_builtin(cfg["system"].get<std::string>().c_str(), &out.p));
    } else if (has(cfg, "system_file")) {
        check(tk_system_load(cfg["system_file"].get<std::string>().c_str(), &out.p));
    } else {
        const auto a = point(cfg, "matrix", 4);
        check(tk_system_linear("linear", a.data(), &out.p));
    }
}

struct Result {
    int code = 0;
    json data;
    std::string text;
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string fmt(const json& v) {
    if (v.is_number()) return fmt(v.get<double>());
    if (v.is_array() && v.size() == 2 && v[0].is_number()) return "(" + fmt(v[0]) + ", " + fmt(v[1]) + ")";
    return v.dump();
}

Result cmd_check(const json& cfg) {
    SystemHandle sys;
    load_system(cfg, sys);
    CString out;
    check(tk_check(sys.p, options(cfg, {"box", "grid"}).c_str(), &out.p));
    Result r;
    r.data = json::parse(out.str());
    const json& node = r.data["node_report"];
    const bool a1 = node["satisfies_A1"].get<bool>();
    std::ostringstream t;
    t << "system " << r.data["system"]["name"].get<std::string>() << "\n";
    t << "  f(x, y) = " << r.data["system"]["f"].get<std::string>() << "\n";
    t << "  g(x, y) = " << r.data["system"]["g"].get<std::string>() << "\n";
    t << "node " << fmt(node["location"]) << ": " << node["classification"].get<std::string>()
      << (a1 ? " (A1 holds)" : " (A1 fails)") << "\n";
    t << "fixed points in box:\n";
    for (const auto& fp : r.data["fixed_points"]) {
        t << "  " << fmt(fp["location"]) << "  " << fp["classification"].get<std::string>() << "\n";
    }
    r.text = t.str();
    r.code = a1 ? 0 : kExitPrecondition;
    return r;
}

Result cmd_simulate(const json& cfg) {
    SystemHandle sys;
    load_system(cfg, sys);
    const auto p = point(cfg, "from");
    CString out, csv;
    check(tk_simulate(sys.p, p.data(), options(cfg, {TK_INTEGRATION_KEYS, "backward", "to_axis"}).c_str(), &out.p,
                      &csv.p));
    if (has(cfg, "csv")) write_file(cfg["csv"].get<std::string>(), csv.str());
    Result r;
    r.data = json::parse(out.str());
    std::ostringstream t;
    t << r.data["direction"].get<std::string>() << " from " << fmt(r.data["initial"]) << " to "
      << fmt(r.data["final"]) << " at t = " << fmt(r.data["t_end"]) << " ("
      << r.data["termination"].get<std::string>() << ")\n";
    if (r.data.contains("landmark")) {
        t << "axis landmark: " << (r.data["landmark"].is_null() ? "not reached" : fmt(r.data["landmark"])) << "\n";
    }
    r.text = t.str();
    return r;
}

Result cmd_verdict(const json& cfg) {
    SystemHandle sys;
    load_system(cfg, sys);
    const auto r0 = point(cfg, "ref");
    const auto p0 = point(cfg, "pert");
    tk_outcome outcome = TK_INCONCLUSIVE;
    CString out;
    check(tk_verdict(sys.p, r0.data(), p0.data(),
                     options(cfg, {TK_INTEGRATION_KEYS, TK_TOLERANCE_KEYS, "group_property", "robustness_samples",
                                   "robustness_radius", "seed"})
                         .c_str(),
                     &outcome, &out.p));
    Result r;
    r.data = json::parse(out.str());
    r.code = outcome == TK_TOLERANCE ? kExitTolerance : outcome == TK_NO_TOLERANCE ? kExitNoTolerance : kExitInconclusive;
    std::ostringstream t;
    t << r.data["outcome"].get<std::string>();
    if (outcome == TK_TOLERANCE) {
        t << ": t1 = " << fmt(r.data["t1"]) << ", deepest at tau = " << fmt(r.data["tau"])
          << " (depth " << fmt(r.data["depth"]) << ")";
    }
    t << "\n  " << r.data["reason"].get<std::string>() << "\n";
    if (r.data.contains("robustness")) {
        t << "  robustness fraction " << fmt(r.data["robustness"]["fraction"]) << " at radius "
          << fmt(r.data["robustness"]["radius"]) << "\n";
    }
    r.text = t.str();
    return r;
}

Result cmd_regions(const json& cfg) {
    SystemHandle sys;
    load_system(cfg, sys);
    const auto r0 = point(cfg, "ref");
    std::vector<double> p0;
    if (has(cfg, "pert")) p0 = point(cfg, "pert");
    CString out;
    check(tk_regions(sys.p, r0.data(), p0.empty() ? nullptr : p0.data(), options(cfg, {TK_INTEGRATION_KEYS}).c_str(),
                     &out.p));
    if (has(cfg, "svg")) {
        CString svg;
        check(tk_render_regions(sys.p, r0.data(), options(cfg, {TK_INTEGRATION_KEYS, TK_STYLE_KEYS, "box"}).c_str(),
                                &svg.p));
        write_file(cfg["svg"].get<std::string>(), svg.str());
    }
    Result r;
    r.data = json::parse(out.str());
    const json& ex = r.data["excitability"];
    std::ostringstream t;
    t << "n = " << ex["n"].get<int>() << ", M = " << fmt(ex["M"]) << " at t_M = " << fmt(ex["t_M"]);
    if (!ex["t_r"].is_null()) t << ", return to x_r at t_r = " << fmt(ex["t_r"]);
    t << "\n";
    if (ex.contains("failure")) t << "  not excitable: " << ex["failure"].get<std::string>() << "\n";
    t << "T: " << (r.data["T"].is_null() ? "none" : "loop bounded by the orbit and L") << "\n";
    if (!r.data["T_hat"].is_null()) {
        const json& s = r.data["T_hat"];
        t << "T-hat: x in " << fmt(s["x_range"]) << ", y > " << fmt(s["y_min"]) << ", f <= 0 on samples: "
          << (s["f_check"]["f_nonpositive"].get<bool>() ? "yes" : "no") << "\n";
    } else {
        t << "T-hat: none\n";
    }
    if (r.data.contains("prediction")) {
        const json& pr = r.data["prediction"];
        t << "candidate " << fmt(r.data["candidate"]) << ": " << pr["prediction"].get<std::string>();
        if (pr["rule"].is_string()) t << " (" << pr["rule"].get<std::string>() << ")";
        t << "\n";
    }
    r.text = t.str();
    return r;
}

std::vector<int> resolution(const json& cfg) {
    const auto v = point(cfg, "res");
    return {static_cast<int>(v[0]), static_cast<int>(v[1])};
}

Result cmd_scan(const json& cfg) {
    SystemHandle sys;
    load_system(cfg, sys);
    const auto r0 = point(cfg, "ref");
    const auto box = point(cfg, "box", 4);
    const auto res = resolution(cfg);
    MapHandle map;
    check(tk_scan(sys.p, r0.data(), box.data(), res[0], res[1],
                  options(cfg, {TK_INTEGRATION_KEYS, TK_TOLERANCE_KEYS, "predict", "threads"}).c_str(), &map.p));
    CString js;
    check(tk_map_json(map.p, &js.p));
    if (has(cfg, "csv")) {
        CString csv;
        check(tk_map_csv(map.p, &csv.p));
        write_file(cfg["csv"].get<std::string>(), csv.str());
    }
    if (has(cfg, "svg")) {
        CString svg;
        check(tk_map_svg(map.p, options(cfg, {TK_STYLE_KEYS}).c_str(), &svg.p));
        write_file(cfg["svg"].get<std::string>(), svg.str());
    }
    std::size_t violations = 0;
    check(tk_map_violations(map.p, &violations));
    Result r;
    r.data = json::parse(js.str());
    const json& s = r.data["summary"];
    std::ostringstream t;
    t << res[0] << "x" << res[1] << " cells: " << s["tolerance"] << " tolerance, " << s["no_tolerance"]
      << " no-tolerance, " << s["inconclusive"] << " inconclusive, " << s["skipped_a3"] << " skipped (A3), "
      << s["outside_basin"] << " outside basin, " << s["errors"] << " errors\n";
    t << "prediction soundness: " << (violations == 0 ? "no violations" : std::to_string(violations) + " violations")
      << "\n";
    r.text = t.str();
    r.code = violations == 0 ? 0 : kExitUnsound;
    return r;
}

Result cmd_linear(const json& cfg) {
    const auto a = point(cfg, "matrix", 4);
    const auto r0 = point(cfg, "ref");
    std::vector<double> p0;
    if (has(cfg, "pert")) p0 = point(cfg, "pert");
    CString out;
    check(tk_linear(a.data(), r0.data(), p0.empty() ? nullptr : p0.data(), &out.p));
    Result r;
    r.data = json::parse(out.str());
    const json& an = r.data["analysis"];
    std::ostringstream t;
    t << "case " << an["case"].get<std::string>() << ", lambda1 = " << fmt(an["lambda1"])
      << ", lambda2 = " << fmt(an["lambda2"]) << ", eigenvector label " << an["evc"].get<std::string>() << "\n";
    t << "region " << r.data["region"]["region_id"].dump() << ": " << r.data["region"]["description"].get<std::string>()
      << "\n";
    if (r.data.contains("verdict")) {
        const json& v = r.data["verdict"];
        const std::string o = v["outcome"].get<std::string>();
        t << o;
        if (v.contains("T")) t << " T = " << fmt(v["T"]);
        t << " (" << v["rule"].get<std::string>() << ")\n";
        r.code = o == "yes-after" ? kExitTolerance : o == "no" ? kExitNoTolerance : kExitInconclusive;
    }
    r.text = t.str();
    return r;
}

Result cmd_estimate(const json& cfg) {
    SystemHandle sys;
    load_system(cfg, sys);
    const auto r0 = point(cfg, "ref");
    const auto p0 = point(cfg, "pert");
    CString out;
    check(tk_estimate(sys.p, r0.data(), p0.data(), options(cfg, {TK_INTEGRATION_KEYS, "x_f"}).c_str(), &out.p));
    Result r;
    r.data = json::parse(out.str());
    std::ostringstream t;
    const json& ref = r.data["reference"];
    t << "x_M = " << fmt(ref["x_M"]) << ", x_f = " << fmt(r.data["x_f"]) << ", y_f = " << fmt(ref["y_f"]) << "\n";
    if (r.data["bounds"].is_null()) {
        t << "bounds unavailable: " << r.data.value("bounds_error", std::string("unknown")) << "\n";
    } else {
        const json& b = r.data["bounds"];
        for (const auto& item : b.items()) {
            if (item.value().is_number()) t << "  " << item.key() << " = " << fmt(item.value()) << "\n";
        }
        for (const char* k : {"condition", "flag"}) {
            if (b.contains(k)) t << "  " << k << ": " << b[k].dump() << "\n";
        }
    }
    if (r.data.contains("example2")) t << "example-2 condition: " << r.data["example2"]["status"].dump() << "\n";
    r.text = t.str();
    return r;
}

std::string frame_path(const std::string& prefix, int k) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "_%04d.svg", k);
    std::string base = prefix;
    if (base.size() > 4 && base.compare(base.size() - 4, 4, ".svg") == 0) base.resize(base.size() - 4);
    return base + buf;
}

Result cmd_render(const json& cfg) {
    if (!has(cfg, "out")) usage("render needs --out");
    const std::string out_path = cfg["out"].get<std::string>();
    const std::string kind = cfg["kind"].get<std::string>();
    SystemHandle sys;
    load_system(cfg, sys);
    Result r;
    r.data = {{"kind", kind}, {"files", json::array()}};
    const int frames = cfg["frames"].get<int>();
    if (frames < 0) usage("--frames must be nonnegative");
    if (frames > 0 && kind != "portrait") usage("--frames applies to portraits only");

    if (kind == "portrait") {
        json spec = json::parse(options(cfg, {TK_INTEGRATION_KEYS, TK_STYLE_KEYS, "box", "isoclines", "nullclines",
                                              "inhibition", "grid", "trajectories", "t_max"}));
        if (frames == 0) {
            CString svg;
            check(tk_render_portrait(sys.p, spec.dump().c_str(), &svg.p));
            write_file(out_path, svg.str());
            r.data["files"].push_back(out_path);
        } else {
            const double t_max = cfg["t_max"].get<double>();
            for (int k = 1; k <= frames; ++k) {
                spec["t_clip"] = t_max * k / frames;
                CString svg;
                check(tk_render_portrait(sys.p, spec.dump().c_str(), &svg.p));
                const std::string path = frame_path(out_path, k);
                write_file(path, svg.str());
                r.data["files"].push_back(path);
            }
        }
    } else if (kind == "regions") {
        const auto r0 = point(cfg, "ref");
        CString svg;
        check(tk_render_regions(sys.p, r0.data(), options(cfg, {TK_INTEGRATION_KEYS, TK_STYLE_KEYS, "box"}).c_str(),
                                &svg.p));
        write_file(out_path, svg.str());
        r.data["files"].push_back(out_path);
    } else if (kind == "map") {
        const auto r0 = point(cfg, "ref");
        const auto box = point(cfg, "box", 4);
        const auto res = resolution(cfg);
        MapHandle map;
        check(tk_scan(sys.p, r0.data(), box.data(), res[0], res[1], options(cfg, {TK_INTEGRATION_KEYS}).c_str(),
                      &map.p));
        CString svg;
        check(tk_map_svg(map.p, options(cfg, {TK_STYLE_KEYS}).c_str(), &svg.p));
        write_file(out_path, svg.str());
        r.data["files"].push_back(out_path);
    } else if (kind == "basin") {
        const auto fp = point(cfg, "fixed_point");
        const auto box = point(cfg, "box", 4);
        const auto res = resolution(cfg);
        CString js, svg;
        check(tk_basin(sys.p, fp.data(), box.data(), res[0], res[1],
                       options(cfg, {TK_INTEGRATION_KEYS, TK_STYLE_KEYS}).c_str(), &js.p, &svg.p));
        write_file(out_path, svg.str());
        r.data["files"].push_back(out_path);
    } else {
        usage("unknown render kind '" + kind + "'");
    }
    std::ostringstream t;
    for (const auto& f : r.data["files"]) t << "wrote " << f.get<std::string>() << "\n";
    r.text = t.str();
    return r;
}

Result dispatch(const std::string& name, const json& cfg) {
    if (name == "check") return cmd_check(cfg);
    if (name == "simulate") return cmd_simulate(cfg);
    if (name == "verdict") return cmd_verdict(cfg);
    if (name == "regions") return cmd_regions(cfg);
    if (name == "scan") return cmd_scan(cfg);
    if (name == "linear") return cmd_linear(cfg);
    if (name == "estimate") return cmd_estimate(cfg);
    if (name == "render") return cmd_render(cfg);
    usage("unknown command '" + name + "'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tolkit: tolerance analysis for planar ODE systems"};
    app.set_version_flag("--version", std::string(tk_version()));
    app.require_subcommand(1);

    const std::vector<CommandSpec> specs = command_specs();
    struct Bound {
        CLI::App* app;
        std::string config;
        bool json_out = false;
        std::vector<std::pair<FlagSpec, FlagValues>> flags;
    };
    // Reserved so option pointers into each Bound stay valid.
    std::vector<Bound> bound;
    bound.reserve(specs.size());
    for (const CommandSpec& spec : specs) {
        Bound& b = bound.emplace_back();
        b.app = app.add_subcommand(spec.name, spec.help);
        b.app->add_option("--config", b.config, "JSON config file (flags override it)");
        b.app->add_flag("--json", b.json_out, "print machine-readable JSON on stdout");
        b.flags.reserve(spec.flags.size());
        for (const FlagSpec& f : spec.flags) {
            auto& [fs, fv] = b.flags.emplace_back(f, FlagValues{});
            const std::string opt = "--" + fs.name;
            if (fs.kind == FlagKind::flag || fs.kind == FlagKind::negated_flag) {
                b.app->add_flag(opt, fv.count, fs.help);
            } else {
                auto* o = b.app->add_option(opt, fv.text, fs.help)->allow_extra_args(false);
                if (fs.kind == FlagKind::points) o->expected(1)->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
            }
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    for (std::size_t k = 0; k < specs.size(); ++k) {
        Bound& b = bound[k];
        if (!b.app->parsed()) continue;
        for (auto& [fs, fv] : b.flags) {
            if (fs.kind != FlagKind::flag && fs.kind != FlagKind::negated_flag) fv.count = static_cast<int>(fv.text.size());
        }
        json cfg;
        try {
            cfg = resolve_config(specs[k], b.config, b.flags);
            json echo = cfg;
            echo["command"] = specs[k].name;
            const Result r = dispatch(specs[k].name, cfg);
            if (b.json_out) {
                std::cout << json{{"config", echo}, {"result", r.data}, {"exit_code", r.code}}.dump(2) << "\n";
            } else {
                std::cout << "config: " << echo.dump() << "\n" << r.text;
            }
            return r.code;
        } catch (const Failure& f) {
            std::cerr << "tolkit " << specs[k].name << ": " << f.status << ": " << f.message << "\n";
            if (b.json_out) {
                json echo = cfg.is_null() ? json(nullptr) : cfg;
                if (!echo.is_null()) echo["command"] = specs[k].name;
                std::cout << json{{"config", echo},
                                  {"error", {{"status", f.status}, {"message", f.message}}},
                                  {"exit_code", f.code}}
                                 .dump(2)
                          << "\n";
            }
            return f.code;
        } catch (const std::exception& e) {
            std::cerr << "tolkit " << specs[k].name << ": internal-error: " << e.what() << "\n";
            return kExitInternal;
        }
    }
    return kExitUsage;
}
