#include "tolkit/tolkit.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <new>
#include <string>
#include <vector>

#include <json.hpp>

#include "tolkit/estimates.hpp"
#include "tolkit/expr.hpp"
#include "tolkit/geometry.hpp"
#include "tolkit/linear.hpp"
#include "tolkit/render.hpp"
#include "tolkit/scan.hpp"
#include "tolkit/system.hpp"
#include "tolkit/tolerance.hpp"

struct tk_system {
    tolkit::PlanarSystem sys;
};

struct tk_map {
    tolkit::ToleranceMap map;
};

namespace {

using json = nlohmann::json;
using namespace tolkit;

constexpr const char* kVersion = "0.1.0";

thread_local std::string last_error;

class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

const std::vector<std::string> kIntegrationKeys = {"horizon", "rel_tol", "abs_tol", "eps_ball", "max_step",
                                                   "max_steps"};
const std::vector<std::string> kToleranceKeys = {"eps_tol", "tie_tolerance", "linear_radius"};
const std::vector<std::string> kStyleKeys = {"width", "height", "title"};

std::vector<std::string> keys(std::initializer_list<std::vector<std::string>> groups,
                              std::initializer_list<const char*> extra = {}) {
    std::vector<std::string> out;
    for (const auto& g : groups) out.insert(out.end(), g.begin(), g.end());
    for (const char* k : extra) out.emplace_back(k);
    return out;
}

json parse_options(const char* text, const std::vector<std::string>& allowed) {
    if (text == nullptr || *text == '\0') return json::object();
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ArgumentError(std::string("options are not valid JSON: ") + e.what());
    }
    if (j.is_null()) return json::object();
    if (!j.is_object()) throw ArgumentError("options must be a JSON object");
    for (const auto& item : j.items()) {
        bool known = false;
        for (const auto& k : allowed) known = known || k == item.key();
        if (!known) throw ArgumentError("unknown option '" + item.key() + "'");
    }
    return j;
}

double number(const json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number()) throw ArgumentError(std::string("option '") + key + "' must be a number");
    return j[key].get<double>();
}

bool boolean(const json& j, const char* key, bool fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_boolean()) throw ArgumentError(std::string("option '") + key + "' must be a boolean");
    return j[key].get<bool>();
}

int integer(const json& j, const char* key, int fallback) {
    const double v = number(j, key, fallback);
    if (v != std::floor(v)) throw ArgumentError(std::string("option '") + key + "' must be an integer");
    return static_cast<int>(v);
}

IntegrationOptions integration_options(const json& j) {
    IntegrationOptions io;
    io.horizon = number(j, "horizon", io.horizon);
    io.rel_tol = number(j, "rel_tol", io.rel_tol);
    io.abs_tol = number(j, "abs_tol", io.abs_tol);
    io.eps_ball = number(j, "eps_ball", io.eps_ball);
    io.max_step = number(j, "max_step", io.max_step);
    const double steps = number(j, "max_steps", static_cast<double>(io.max_steps));
    if (steps < 1) throw ArgumentError("option 'max_steps' must be positive");
    io.max_steps = static_cast<std::size_t>(steps);
    if (!(io.horizon > 0.0)) throw ArgumentError("option 'horizon' must be positive");
    if (!(io.rel_tol > 0.0) || !(io.abs_tol > 0.0)) throw ArgumentError("tolerances must be positive");
    return io;
}

ToleranceOptions tolerance_options(const json& j) {
    ToleranceOptions to;
    to.integration = integration_options(j);
    to.eps_tol = number(j, "eps_tol", to.eps_tol);
    to.tie_tolerance = number(j, "tie_tolerance", to.tie_tolerance);
    to.linear_radius = number(j, "linear_radius", to.linear_radius);
    to.use_group_property = boolean(j, "group_property", to.use_group_property);
    return to;
}

SvgStyle style_options(const json& j) {
    SvgStyle s;
    s.width = integer(j, "width", s.width);
    s.height = integer(j, "height", s.height);
    if (s.width < 2 * s.margin + 10 || s.height < 2 * s.margin + 10) throw ArgumentError("SVG size too small");
    if (j.contains("title")) s.title = j["title"].get<std::string>();
    return s;
}

Box box_from(const json& j, const char* key, Box fallback) {
    if (!j.contains(key)) return fallback;
    const auto v = j[key].get<std::vector<double>>();
    if (v.size() != 4) throw ArgumentError(std::string("option '") + key + "' needs four numbers");
    const Box b{v[0], v[1], v[2], v[3]};
    if (!(b.xmin < b.xmax) || !(b.ymin < b.ymax)) throw ArgumentError("box bounds must be increasing");
    return b;
}

Vec2 vec(const double* p) {
    if (p == nullptr) throw ArgumentError("null point");
    return {p[0], p[1]};
}

json point_json(Vec2 p) { return json::array({p.x, p.y}); }

char* duplicate(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out == nullptr) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void put(char** out, const std::string& s) {
    if (out != nullptr) *out = duplicate(s);
}

template <class F>
tk_status guard(F&& body) {
    last_error.clear();
    try {
        body();
        return TK_OK;
    } catch (const PreconditionError& e) {
        last_error = e.what();
        return TK_ERR_PRECONDITION;
    } catch (const DomainError& e) {
        last_error = e.what();
        return TK_ERR_DOMAIN;
    } catch (const DefinitionError& e) {
        last_error = e.what();
        return TK_ERR_PARSE;
    } catch (const ParseError& e) {
        last_error = e.what();
        return TK_ERR_PARSE;
    } catch (const IoError& e) {
        last_error = e.what();
        return TK_ERR_IO;
    } catch (const json::exception& e) {
        last_error = std::string("bad option value: ") + e.what();
        return TK_ERR_ARGUMENT;
    } catch (const std::invalid_argument& e) {
        last_error = e.what();
        return TK_ERR_ARGUMENT;
    } catch (const std::out_of_range& e) {
        last_error = e.what();
        return TK_ERR_ARGUMENT;
    } catch (const std::runtime_error& e) {
        last_error = e.what();
        return TK_ERR_NUMERIC;
    } catch (const std::exception& e) {
        last_error = e.what();
        return TK_ERR_INTERNAL;
    } catch (...) {
        last_error = "unknown failure";
        return TK_ERR_INTERNAL;
    }
}

void need(const void* p, const char* what) {
    if (p == nullptr) throw ArgumentError(std::string(what) + " is null");
}

json fixed_point_json(const FixedPointReport& r) {
    json eig = {{"complex", r.eig.complex}, {"re", {r.eig.re1, r.eig.re2}}, {"im", r.eig.im}};
    return {{"location", point_json(r.location)},
            {"classification", to_string(r.classification)},
            {"eigenvalues", eig},
            {"satisfies_A1", r.satisfies_A1},
            {"residual", r.residual}};
}

json system_json(const PlanarSystem& sys) {
    json j;
    j["name"] = sys.name();
    j["kind"] = sys.kind() == PlanarSystem::Kind::linear ? "linear" : "expression";
    j["builtin"] = sys.is_builtin();
    j["f"] = sys.f().to_string();
    j["g"] = sys.g().to_string();
    j["jacobian"] = {{"f_x", sys.f_x().to_string()},
                     {"f_y", sys.f_y().to_string()},
                     {"g_x", sys.g_x().to_string()},
                     {"g_y", sys.g_y().to_string()}};
    if (sys.kind() == PlanarSystem::Kind::linear) {
        const Mat2& a = sys.matrix();
        j["matrix"] = {a.a, a.b, a.c, a.d};
    }
    j["node"] = point_json(sys.node());
    return j;
}

// Bounding box of the reference orbit and the origin, padded by 10%.
Box default_box(const Trajectory& tr) {
    Box b{0.0, 0.0, 0.0, 0.0};
    for (std::size_t k = 0; k < tr.size(); ++k) {
        const Vec2 p = tr.point(k);
        b.xmax = std::max(b.xmax, p.x);
        b.ymax = std::max(b.ymax, p.y);
        b.xmin = std::min(b.xmin, p.x);
        b.ymin = std::min(b.ymin, p.y);
    }
    const double px = 0.1 * std::max(b.xmax - b.xmin, 1e-3);
    const double py = 0.1 * std::max(b.ymax - b.ymin, 1e-3);
    return {b.xmin - (b.xmin < 0.0 ? px : 0.0), b.xmax + px, b.ymin - (b.ymin < 0.0 ? py : 0.0), b.ymax + py};
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

}  // namespace

extern "C" {

const char* tk_version(void) { return kVersion; }

const char* tk_status_name(tk_status status) {
    switch (status) {
        case TK_OK:
            return "ok";
        case TK_ERR_ARGUMENT:
            return "invalid-argument";
        case TK_ERR_PARSE:
            return "parse-error";
        case TK_ERR_PRECONDITION:
            return "precondition";
        case TK_ERR_DOMAIN:
            return "domain-error";
        case TK_ERR_NUMERIC:
            return "numeric-failure";
        case TK_ERR_IO:
            return "io-error";
        case TK_ERR_INTERNAL:
            return "internal-error";
    }
    return "unknown";
}

const char* tk_last_error(void) { return last_error.c_str(); }

void tk_string_free(char* s) { std::free(s); }

tk_status tk_system_builtin(const char* name, tk_system** out) {
    return guard([&] {
        need(name, "name");
        need(out, "out");
        *out = new tk_system{builtin(name)};
    });
}

tk_status tk_system_parse(const char* definition, tk_system** out) {
    return guard([&] {
        need(definition, "definition");
        need(out, "out");
        *out = new tk_system{parse_system_definition(definition)};
    });
}

tk_status tk_system_load(const char* path, tk_system** out) {
    return guard([&] {
        need(path, "path");
        need(out, "out");
        if (!std::ifstream(path)) throw IoError(std::string("cannot open system file '") + path + "'");
        *out = new tk_system{load_system_file(path)};
    });
}

tk_status tk_system_linear(const char* name, const double a[4], tk_system** out) {
    return guard([&] {
        need(a, "matrix");
        need(out, "out");
        for (int k = 0; k < 4; ++k) {
            if (!std::isfinite(a[k])) throw ArgumentError("matrix entries must be finite");
        }
        *out = new tk_system{PlanarSystem::from_matrix(name != nullptr ? name : "linear", {a[0], a[1], a[2], a[3]})};
    });
}

void tk_system_free(tk_system* sys) { delete sys; }

tk_status tk_system_field(const tk_system* sys, double x, double y, double out[2]) {
    return guard([&] {
        need(sys, "system");
        need(out, "out");
        const FieldValue v = sys->sys.field({x, y});
        if (!v.ok) throw DomainError(v.error);
        out[0] = v.value.x;
        out[1] = v.value.y;
    });
}

tk_status tk_builtin_names(char** out) {
    return guard([&] {
        need(out, "out");
        std::string s;
        for (const auto& n : builtin_names()) s += (s.empty() ? "" : ",") + n;
        put(out, s);
    });
}

tk_status tk_check(const tk_system* sys, const char* options_json, char** out_json) {
    return guard([&] {
        need(sys, "system");
        const json o = parse_options(options_json, {"box", "grid"});
        FixedPointSearch search;
        search.box = box_from(o, "box", Box{0.0, 5.0, 0.0, 5.0});
        search.grid = integer(o, "grid", 16);
        if (search.grid < 1) throw ArgumentError("option 'grid' must be positive");
        json j;
        j["system"] = system_json(sys->sys);
        j["node_report"] = fixed_point_json(node_report(sys->sys));
        json fps = json::array();
        for (const auto& r : find_fixed_points(sys->sys, search)) fps.push_back(fixed_point_json(r));
        j["fixed_points"] = fps;
        j["search"] = {{"box", {search.box.xmin, search.box.xmax, search.box.ymin, search.box.ymax}},
                       {"grid", search.grid}};
        put(out_json, j.dump(2));
    });
}

tk_status tk_simulate(const tk_system* sys, const double p0[2], const char* options_json, char** out_json,
                      char** out_csv) {
    return guard([&] {
        need(sys, "system");
        const json o = parse_options(options_json, keys({kIntegrationKeys}, {"backward", "to_axis"}));
        const Vec2 p = vec(p0);
        const bool to_axis = boolean(o, "to_axis", false);
        Trajectory tr;
        if (to_axis) {
            tr = integrate_backward_to_axis(sys->sys, p, number(o, "horizon", 50.0));
        } else {
            IntegrationOptions io = integration_options(o);
            if (boolean(o, "backward", false)) {
                io.direction = Direction::backward;
                io.stop_at_ball = false;
            }
            tr = integrate(sys->sys, p, io);
        }
        json j;
        j["initial"] = point_json(tr.initial());
        j["final"] = point_json(tr.final_point());
        j["t_begin"] = tr.t_begin();
        j["t_end"] = tr.t_end();
        j["direction"] = tr.direction() == Direction::forward ? "forward" : "backward";
        j["termination"] = to_string(tr.termination());
        if (!tr.message().empty()) j["message"] = tr.message();
        j["samples"] = tr.size();
        j["quadrant_violation"] = tr.quadrant_violation();
        j["events"] = json::parse(tr.events_json());
        if (to_axis) {
            if (tr.termination() == Termination::axis_crossing) {
                j["landmark"] = point_json(tr.final_point());
            } else {
                j["landmark"] = nullptr;
            }
        }
        put(out_json, j.dump(2));
        put(out_csv, tr.to_csv());
    });
}

tk_status tk_verdict(const tk_system* sys, const double r0[2], const double p0[2], const char* options_json,
                     tk_outcome* outcome, char** out_json) {
    return guard([&] {
        need(sys, "system");
        const json o = parse_options(
            options_json, keys({kIntegrationKeys, kToleranceKeys},
                               {"group_property", "robustness_samples", "robustness_radius", "seed"}));
        const ToleranceOptions to = tolerance_options(o);
        const Vec2 r = vec(r0);
        const Vec2 p = vec(p0);
        const ToleranceVerdict v = detect_tolerance(sys->sys, r, p, to);
        json j = json::parse(v.to_json());
        const int samples = integer(o, "robustness_samples", 0);
        if (samples < 0) throw ArgumentError("option 'robustness_samples' must be nonnegative");
        if (samples > 0 && v.outcome == Outcome::tolerance) {
            const double seed = number(o, "seed", 1.0);
            if (seed < 0) throw ArgumentError("option 'seed' must be nonnegative");
            const RobustnessReport rb =
                robustness_balls(sys->sys, r, p, v, static_cast<std::size_t>(samples),
                                 number(o, "robustness_radius", 1e-3), static_cast<std::uint64_t>(seed), to);
            j["robustness"] = {{"requested_radius", rb.requested_radius}, {"radius", rb.radius},
                               {"halvings", rb.halvings},                 {"samples_ref", rb.samples_ref},
                               {"samples_pert", rb.samples_pert},         {"rejected", rb.rejected},
                               {"fraction_ref", rb.fraction_ref},         {"fraction_pert", rb.fraction_pert},
                               {"fraction", rb.fraction},                 {"seed", rb.seed}};
        }
        if (outcome != nullptr) {
            *outcome = v.outcome == Outcome::tolerance      ? TK_TOLERANCE
                       : v.outcome == Outcome::no_tolerance ? TK_NO_TOLERANCE
                                                            : TK_INCONCLUSIVE;
        }
        put(out_json, j.dump(2));
    });
}

tk_status tk_regions(const tk_system* sys, const double r0[2], const double* p0, const char* options_json,
                     char** out_json) {
    return guard([&] {
        need(sys, "system");
        const json o = parse_options(options_json, kIntegrationKeys);
        GeometryOptions geo;
        geo.integration = integration_options(o);
        const CandidateClassifier cls(sys->sys, vec(r0), geo);
        json j;
        j["excitability"] = json::parse(cls.report().to_json());
        j["T"] = cls.loop() ? json::parse(cls.loop()->to_json()) : json(nullptr);
        j["T_hat"] = cls.strip() ? json::parse(cls.strip()->to_json()) : json(nullptr);
        if (p0 != nullptr) {
            j["candidate"] = point_json(vec(p0));
            j["prediction"] = json::parse(cls.classify(vec(p0)).to_json());
        }
        put(out_json, j.dump(2));
    });
}

tk_status tk_linear(const double a[4], const double r0[2], const double* p0, char** out_json) {
    return guard([&] {
        need(a, "matrix");
        const LinearAnalysis an = analyze({a[0], a[1], a[2], a[3]});
        const Vec2 r = vec(r0);
        json j;
        j["analysis"] = json::parse(to_json(an));
        j["region"] = json::parse(to_json(tolerance_region(an, r)));
        if (p0 != nullptr) j["verdict"] = json::parse(to_json(verdict_linear(an, r, vec(p0))));
        put(out_json, j.dump(2));
    });
}

tk_status tk_estimate(const tk_system* sys, const double r0[2], const double p0[2], const char* options_json,
                      char** out_json) {
    return guard([&] {
        need(sys, "system");
        const json o = parse_options(options_json, keys({kIntegrationKeys}, {"x_f"}));
        EstimateOptions eo;
        eo.integration = integration_options(o);
        if (o.contains("x_f")) eo.x_f = number(o, "x_f", 0.0);
        put(out_json, estimate(sys->sys, vec(r0), vec(p0), eo).to_json());
    });
}

tk_status tk_scan(const tk_system* sys, const double r0[2], const double box[4], int nx, int ny,
                  const char* options_json, tk_map** out) {
    return guard([&] {
        need(sys, "system");
        need(box, "box");
        need(out, "out");
        const json o =
            parse_options(options_json, keys({kIntegrationKeys, kToleranceKeys}, {"predict", "threads"}));
        ScanOptions so;
        so.tolerance = tolerance_options(o);
        so.geometry.integration = so.tolerance.integration;
        so.predict = boolean(o, "predict", true);
        const int threads = integer(o, "threads", 0);
        if (threads < 0) throw ArgumentError("option 'threads' must be nonnegative");
        so.threads = static_cast<unsigned>(threads);
        const GridSpec grid{box[0], box[1], box[2], box[3], nx, ny};
        *out = new tk_map{scan_grid(sys->sys, vec(r0), grid, so)};
    });
}

void tk_map_free(tk_map* map) { delete map; }

tk_status tk_map_json(const tk_map* map, char** out) {
    return guard([&] {
        need(map, "map");
        put(out, map->map.to_json());
    });
}

tk_status tk_map_csv(const tk_map* map, char** out) {
    return guard([&] {
        need(map, "map");
        put(out, map->map.to_csv());
    });
}

tk_status tk_map_svg(const tk_map* map, const char* style_json, char** out) {
    return guard([&] {
        need(map, "map");
        const json o = parse_options(style_json, kStyleKeys);
        put(out, render_map_svg(map->map, style_options(o)));
    });
}

tk_status tk_map_violations(const tk_map* map, size_t* count) {
    return guard([&] {
        need(map, "map");
        need(count, "count");
        *count = map->map.summary.violations.size();
    });
}

tk_status tk_basin(const tk_system* sys, const double fp[2], const double box[4], int nx, int ny,
                   const char* options_json, char** out_json, char** out_svg) {
    return guard([&] {
        need(sys, "system");
        need(box, "box");
        const json o = parse_options(options_json, keys({kIntegrationKeys, kStyleKeys}, {"threads"}));
        if (nx < 1 || ny < 1) throw ArgumentError("basin raster needs positive dimensions");
        const int threads = integer(o, "threads", 0);
        if (threads < 0) throw ArgumentError("option 'threads' must be nonnegative");
        const BasinRaster r = estimate_basin(sys->sys, vec(fp), {box[0], box[1], box[2], box[3]}, nx, ny,
                                             integration_options(o), static_cast<unsigned>(threads));
        put(out_json, r.to_json());
        put(out_svg, render_basin_svg(r, style_options(o)));
    });
}

tk_status tk_preconditioning(const tk_system* sys, const double rho0[2], const double offset[2], const double* s,
                             size_t n, const double* r0, const char* options_json, double* out_xy) {
    return guard([&] {
        need(sys, "system");
        need(out_xy, "out");
        if (n > 0) need(s, "s");
        const json o = parse_options(options_json, kIntegrationKeys);
        const std::vector<double> sv(s, s + n);
        std::optional<Vec2> ref;
        if (r0 != nullptr) ref = vec(r0);
        const std::vector<Vec2> pts =
            preconditioning_curve(sys->sys, vec(rho0), vec(offset), sv, ref, integration_options(o));
        for (std::size_t k = 0; k < pts.size(); ++k) {
            out_xy[2 * k] = pts[k].x;
            out_xy[2 * k + 1] = pts[k].y;
        }
    });
}

tk_status tk_render_portrait(const tk_system* sys, const char* spec_json, char** out_svg) {
    return guard([&] {
        need(sys, "system");
        const json o = parse_options(spec_json, keys({kIntegrationKeys, kStyleKeys},
                                                     {"box", "isoclines", "nullclines", "inhibition", "grid",
                                                      "trajectories", "t_max", "t_clip", "markers"}));
        IntegrationOptions io = integration_options(o);
        PortraitSpec spec;
        spec.isoclines = o.value("isoclines", std::vector<double>{});
        spec.nullclines = boolean(o, "nullclines", true);
        spec.inhibition_boundary = boolean(o, "inhibition", false);
        spec.grid = integer(o, "grid", spec.grid);
        if (spec.grid < 2) throw ArgumentError("option 'grid' must be at least 2");
        const double t_max = number(o, "t_max", 50.0);
        const double t_clip = number(o, "t_clip", t_max);
        if (!(t_max > 0.0) || t_clip < 0.0) throw ArgumentError("t_max must be positive and t_clip nonnegative");
        io.horizon = t_max;
        std::vector<Trajectory> orbits;
        const auto starts = o.value("trajectories", std::vector<std::vector<double>>{});
        for (std::size_t k = 0; k < starts.size(); ++k) {
            if (starts[k].size() != 2) throw ArgumentError("each trajectory start needs two numbers");
            orbits.push_back(integrate(sys->sys, {starts[k][0], starts[k][1]}, io));
            Polyline pl;
            pl.label = "orbit from (" + json(starts[k][0]).dump() + ", " + json(starts[k][1]).dump() + ")";
            pl.color = kPalette[k % std::size(kPalette)];
            pl.points = trajectory_polyline(orbits.back(), t_clip);
            spec.curves.push_back(std::move(pl));
        }
        if (o.contains("markers")) {
            std::size_t k = 0;
            for (const auto& m : o["markers"]) {
                Marker mk;
                mk.label = m.value("label", std::string{});
                mk.p = {m.at("x").get<double>(), m.at("y").get<double>()};
                mk.color = kPalette[k++ % std::size(kPalette)];
                spec.markers.push_back(std::move(mk));
            }
        }
        Box fallback{0.0, 1.0, 0.0, 1.0};
        if (!orbits.empty()) {
            fallback = default_box(orbits.front());
            for (const auto& tr : orbits) {
                const Box b = default_box(tr);
                fallback = {std::min(fallback.xmin, b.xmin), std::max(fallback.xmax, b.xmax),
                            std::min(fallback.ymin, b.ymin), std::max(fallback.ymax, b.ymax)};
            }
        }
        spec.box = box_from(o, "box", fallback);
        put(out_svg, render_portrait_svg(sys->sys, spec, style_options(o)));
    });
}

tk_status tk_render_regions(const tk_system* sys, const double r0[2], const char* options_json, char** out_svg) {
    return guard([&] {
        need(sys, "system");
        const json o = parse_options(options_json, keys({kIntegrationKeys, kStyleKeys}, {"box"}));
        GeometryOptions geo;
        geo.integration = integration_options(o);
        const CandidateClassifier cls(sys->sys, vec(r0), geo);
        const Box box = box_from(o, "box", default_box(cls.report().trajectory));
        put(out_svg, render_regions_svg(cls, box, style_options(o)));
    });
}

}  // extern "C"
