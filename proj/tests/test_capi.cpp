#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include <cmath>
#include <string>
#include <thread>

#include "tolkit/tolkit.h"

using json = nlohmann::json;

namespace {

struct Owned {
    char* p = nullptr;
    ~Owned() { tk_string_free(p); }
    json parse() const { return json::parse(p); }
};

}  // namespace

TEST_CASE("builtin system lifecycle", "[capi]") {
    tk_system* sys = nullptr;
    REQUIRE(tk_system_builtin("ex2", &sys) == TK_OK);
    double v[2];
    REQUIRE(tk_system_field(sys, 4.0, 0.0, v) == TK_OK);
    CHECK(v[0] == 12.0);
    CHECK(v[1] == 16.0);
    CHECK(tk_system_field(sys, 1.0, -1.0, v) == TK_ERR_DOMAIN);
    tk_system_free(sys);
    tk_system_free(nullptr);

    CHECK(tk_system_builtin("nope", &sys) == TK_ERR_ARGUMENT);
    CHECK(std::string(tk_last_error()).find("nope") != std::string::npos);
    CHECK(tk_system_builtin(nullptr, &sys) == TK_ERR_ARGUMENT);

    Owned names;
    REQUIRE(tk_builtin_names(&names.p) == TK_OK);
    CHECK(std::string(names.p).find("ex3") != std::string::npos);
}

TEST_CASE("definition parsing and loading", "[capi]") {
    tk_system* sys = nullptr;
    REQUIRE(tk_system_parse("name=t\nf=-x\ng=x-y\n", &sys) == TK_OK);
    tk_system_free(sys);
    CHECK(tk_system_parse("name=t\nf=x+\ng=y\n", &sys) == TK_ERR_PARSE);
    CHECK(std::string(tk_last_error()).find("line 2") != std::string::npos);
    CHECK(tk_system_load("/nonexistent/system.txt", &sys) == TK_ERR_IO);
    const double bad[4] = {1.0, NAN, 0.0, 1.0};
    CHECK(tk_system_linear("m", bad, &sys) == TK_ERR_ARGUMENT);
}

TEST_CASE("verdicts and options", "[capi]") {
    tk_system* sys = nullptr;
    REQUIRE(tk_system_builtin("ex2", &sys) == TK_OK);
    const double r0[2] = {4.0, 0.0};
    const double yes[2] = {4.5, 5.0};
    const double no[2] = {7.0, 1.0};
    const double left[2] = {3.0, 0.0};

    tk_outcome o = TK_INCONCLUSIVE;
    Owned out;
    REQUIRE(tk_verdict(sys, r0, yes, nullptr, &o, &out.p) == TK_OK);
    CHECK(o == TK_TOLERANCE);
    CHECK(out.parse()["outcome"] == "tolerance");
    CHECK(tk_verdict(sys, r0, no, "{}", &o, nullptr) == TK_OK);
    CHECK(o == TK_NO_TOLERANCE);
    CHECK(tk_verdict(sys, r0, left, nullptr, &o, nullptr) == TK_ERR_PRECONDITION);
    CHECK(std::string(tk_last_error()).rfind("A3", 0) == 0);

    CHECK(tk_verdict(sys, r0, yes, "{\"horizn\": 5}", &o, nullptr) == TK_ERR_ARGUMENT);
    CHECK(std::string(tk_last_error()).find("horizn") != std::string::npos);
    CHECK(tk_verdict(sys, r0, yes, "[1]", &o, nullptr) == TK_ERR_ARGUMENT);
    CHECK(tk_verdict(sys, r0, yes, "{\"horizon\": \"x\"}", &o, nullptr) == TK_ERR_ARGUMENT);
    CHECK(tk_verdict(sys, r0, yes, "{not json", &o, nullptr) == TK_ERR_ARGUMENT);

    Owned robust;
    REQUIRE(tk_verdict(sys, r0, yes, "{\"robustness_samples\": 8, \"seed\": 3}", &o, &robust.p) == TK_OK);
    CHECK(robust.parse()["robustness"]["seed"] == 3);
    tk_system_free(sys);
}

TEST_CASE("last error is per thread", "[capi]") {
    tk_system* sys = nullptr;
    CHECK(tk_system_builtin("nope", &sys) == TK_ERR_ARGUMENT);
    std::string other;
    std::thread t([&] { other = tk_last_error(); });
    t.join();
    CHECK(other.empty());
    CHECK_FALSE(std::string(tk_last_error()).empty());
}

TEST_CASE("linear analysis through the C API", "[capi]") {
    const double a[4] = {-2.0, 1.0, 0.0, -1.0};
    const double r0[2] = {1.0, 1.0};
    const double p0[2] = {2.0, 0.5};
    Owned out;
    REQUIRE(tk_linear(a, r0, p0, &out.p) == TK_OK);
    const json j = out.parse();
    CHECK(j["verdict"]["outcome"] == "yes-after");
    CHECK(j["verdict"]["T"].get<double>() == Catch::Approx(std::log(3.0)).epsilon(1e-12));
    const double saddle[4] = {1.0, 0.0, 0.0, -1.0};
    CHECK(tk_linear(saddle, r0, nullptr, nullptr) == TK_ERR_PRECONDITION);
}

TEST_CASE("scan handle exports", "[capi]") {
    tk_system* sys = nullptr;
    REQUIRE(tk_system_builtin("ex2", &sys) == TK_OK);
    const double r0[2] = {4.0, 0.0};
    const double box[4] = {4.0, 8.0, 0.0, 25.0};
    tk_map* map = nullptr;
    REQUIRE(tk_scan(sys, r0, box, 4, 3, "{\"threads\": 2}", &map) == TK_OK);
    Owned js, csv, svg;
    REQUIRE(tk_map_json(map, &js.p) == TK_OK);
    REQUIRE(tk_map_csv(map, &csv.p) == TK_OK);
    REQUIRE(tk_map_svg(map, "{\"title\": \"ex2\"}", &svg.p) == TK_OK);
    CHECK(js.parse()["grid"]["nx"] == 4);
    CHECK(std::string(csv.p).rfind("x,y,i,j,status,prediction,rule,outcome,onset,margin", 0) == 0);
    CHECK(std::string(svg.p).find("ex2") != std::string::npos);
    std::size_t violations = 99;
    REQUIRE(tk_map_violations(map, &violations) == TK_OK);
    CHECK(violations == 0);
    tk_map_free(map);

    CHECK(tk_scan(sys, r0, box, 1, 3, nullptr, &map) == TK_ERR_ARGUMENT);
    CHECK(tk_map_json(nullptr, &js.p) == TK_ERR_ARGUMENT);
    tk_system_free(sys);
}

TEST_CASE("regions, estimate, check and simulate", "[capi]") {
    tk_system* sys = nullptr;
    REQUIRE(tk_system_builtin("ex2", &sys) == TK_OK);
    const double r0[2] = {4.0, 0.0};
    const double p0[2] = {4.5, 20.0};

    Owned regions;
    REQUIRE(tk_regions(sys, r0, p0, nullptr, &regions.p) == TK_OK);
    const json rj = regions.parse();
    CHECK(rj["excitability"]["n"] == 1);
    CHECK(rj["excitability"]["M"].get<double>() > 4.5);
    CHECK(rj["excitability"]["M"].get<double>() < 5.0);
    CHECK(rj["prediction"]["prediction"] == "guaranteed");

    Owned est;
    REQUIRE(tk_estimate(sys, r0, p0, "{\"x_f\": 2.5}", &est.p) == TK_OK);
    CHECK(est.parse()["x_f"] == 2.5);

    Owned chk;
    REQUIRE(tk_check(sys, "{\"box\": [0, 2, 0, 2]}", &chk.p) == TK_OK);
    CHECK(chk.parse()["node_report"]["satisfies_A1"] == true);

    const double from[2] = {4.0, 3.0};
    Owned sim, csv;
    REQUIRE(tk_simulate(sys, from, "{\"to_axis\": true}", &sim.p, &csv.p) == TK_OK);
    CHECK(sim.parse()["landmark"][0].get<double>() == Catch::Approx(3.4).margin(0.1));
    CHECK(std::string(csv.p).find('\n') != std::string::npos);

    Owned portrait;
    REQUIRE(tk_render_portrait(sys, "{\"box\": [0, 8, 0, 25], \"isoclines\": [-4, 0, 10], \"trajectories\": [[4, 0]]}",
                               &portrait.p) == TK_OK);
    CHECK(std::string(portrait.p).find("class=\"trajectory\"") != std::string::npos);
    CHECK(tk_render_portrait(sys, "{\"trajectories\": [[4]]}", &portrait.p) == TK_ERR_ARGUMENT);
    tk_system_free(sys);
}
