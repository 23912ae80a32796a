#include "tolkit/scan.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace tolkit {

namespace {

// Cells are claimed through an atomic counter; each writes only its own slot.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
    const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    std::atomic<std::size_t> next{0};
    auto run = [&] {
        for (std::size_t k = next.fetch_add(1); k < n; k = next.fetch_add(1)) fn(k);
    };
    if (workers == 1) {
        run();
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(run);
    run();
    for (std::thread& t : pool) t.join();
}

std::size_t kind_index(PredictionKind k) { return static_cast<std::size_t>(k); }
std::size_t outcome_index(Outcome o) { return static_cast<std::size_t>(o); }

void require_grid(const GridSpec& g) {
    if (g.nx < 2 || g.ny < 2) throw std::invalid_argument("grid resolution must be at least 2x2");
    if (!(g.x_max > g.x_min) || !(g.y_max > g.y_min)) throw std::invalid_argument("grid ranges must be nonempty");
}

void require_stable(const PlanarSystem& sys, Vec2 fp, bool node_only) {
    const JacobianValue jv = sys.jacobian(fp);
    if (!jv.ok) throw DomainError("jacobian at the fixed point: " + jv.error);
    const FixedPointReport rep = classify_point(fp, jv.value);
    const bool ok = rep.classification == FixedPointClass::stable_node ||
                    (!node_only && rep.classification == FixedPointClass::stable_spiral);
    if (!ok) {
        throw PreconditionError("A1", std::string("fixed point is ") + to_string(rep.classification));
    }
}

void evaluate_cell(const PlanarSystem& sys, Vec2 r0, const CandidateClassifier* cls, const ScanOptions& opts,
                   ScanCell& cell) {
    if (cell.p.x < r0.x) {
        cell.status = CellStatus::skipped_a3;
        return;
    }
    const BasinResult basin = in_basin(sys, cell.p, sys.node(), opts.tolerance.integration);
    if (!basin.inside && basin.conclusive) {
        cell.status = CellStatus::outside_basin;
        return;
    }
    try {
        if (cls != nullptr) {
            const Prediction pr = cls->classify(cell.p);
            cell.prediction = pr.kind;
            cell.rule = pr.rule;
        }
        const ToleranceVerdict v = detect_tolerance(sys, r0, cell.p, opts.tolerance);
        cell.outcome = v.outcome;
        cell.onset = v.outcome == Outcome::tolerance ? v.t1 : -1.0;
        cell.margin = v.margin;
    } catch (const PreconditionError& e) {
        if (e.assumption() == "A2") {
            cell.status = CellStatus::outside_basin;
        } else {
            cell.status = CellStatus::error;
        }
        cell.error = e.what();
        cell.prediction.reset();
        cell.rule.clear();
    } catch (const std::exception& e) {
        cell.status = CellStatus::error;
        cell.error = e.what();
        cell.prediction.reset();
        cell.rule.clear();
    }
}

ScanSummary summarize(const std::vector<ScanCell>& cells) {
    ScanSummary s;
    for (std::size_t k = 0; k < cells.size(); ++k) {
        const ScanCell& c = cells[k];
        switch (c.status) {
            case CellStatus::skipped_a3:
                ++s.skipped_a3;
                continue;
            case CellStatus::outside_basin:
                ++s.outside_basin;
                continue;
            case CellStatus::error:
                ++s.errors;
                continue;
            case CellStatus::evaluated:
                break;
        }
        ++s.evaluated;
        if (c.outcome == Outcome::tolerance) ++s.tolerance;
        if (c.outcome == Outcome::no_tolerance) ++s.no_tolerance;
        if (c.outcome == Outcome::inconclusive) ++s.inconclusive;
        if (!c.prediction) continue;
        ++s.confusion[kind_index(*c.prediction)][outcome_index(c.outcome)];
        if ((*c.prediction == PredictionKind::guaranteed && c.outcome == Outcome::no_tolerance) ||
            (*c.prediction == PredictionKind::impossible && c.outcome == Outcome::tolerance)) {
            s.violations.push_back(k);
        }
    }
    return s;
}

}  // namespace

Vec2 GridSpec::center(int i, int j) const {
    return {x_min + (x_max - x_min) * (i + 0.5) / nx, y_min + (y_max - y_min) * (j + 0.5) / ny};
}

std::array<int, 2> GridSpec::cell_of(Vec2 p) const {
    if (p.x < x_min || p.x > x_max || p.y < y_min || p.y > y_max) return {-1, -1};
    const int i = std::min(nx - 1, static_cast<int>((p.x - x_min) / (x_max - x_min) * nx));
    const int j = std::min(ny - 1, static_cast<int>((p.y - y_min) / (y_max - y_min) * ny));
    return {i, j};
}

const char* to_string(CellStatus s) {
    switch (s) {
        case CellStatus::evaluated:
            return "evaluated";
        case CellStatus::skipped_a3:
            return "skipped-A3";
        case CellStatus::outside_basin:
            return "outside-basin";
        case CellStatus::error:
            return "error";
    }
    return "error";
}

unsigned default_thread_count() {
    if (const char* env = std::getenv("TOLKIT_THREADS")) {
        const long n = std::strtol(env, nullptr, 10);
        if (n > 0) return static_cast<unsigned>(n);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

const ScanCell* ToleranceMap::cell_containing(Vec2 p) const {
    const auto [i, j] = grid.cell_of(p);
    if (i < 0) return nullptr;
    return &at(i, j);
}

std::string ToleranceMap::to_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "x,y,i,j,status,prediction,rule,outcome,onset,margin\n";
    for (const ScanCell& c : cells) {
        out << c.p.x << ',' << c.p.y << ',' << c.i << ',' << c.j << ',' << to_string(c.status) << ','
            << (c.prediction ? to_string(*c.prediction) : "") << ',' << c.rule << ',';
        if (c.status == CellStatus::evaluated) {
            out << to_string(c.outcome) << ',' << c.onset << ',' << c.margin;
        } else {
            out << ",,";
        }
        out << '\n';
    }
    return out.str();
}

std::string ToleranceMap::to_json() const {
    nlohmann::json j;
    j["system"] = system;
    j["r0"] = {r0.x, r0.y};
    j["grid"] = {{"x", {grid.x_min, grid.x_max}}, {"y", {grid.y_min, grid.y_max}}, {"nx", grid.nx}, {"ny", grid.ny}};
    const ScanSummary& s = summary;
    j["summary"] = {{"evaluated", s.evaluated},       {"skipped_a3", s.skipped_a3},
                    {"outside_basin", s.outside_basin}, {"errors", s.errors},
                    {"tolerance", s.tolerance},       {"no_tolerance", s.no_tolerance},
                    {"inconclusive", s.inconclusive}};
    nlohmann::json conf;
    for (PredictionKind k : {PredictionKind::guaranteed, PredictionKind::impossible, PredictionKind::possible}) {
        nlohmann::json row;
        for (Outcome o : {Outcome::tolerance, Outcome::no_tolerance, Outcome::inconclusive}) {
            row[to_string(o)] = s.confusion[kind_index(k)][outcome_index(o)];
        }
        conf[to_string(k)] = row;
    }
    j["confusion"] = conf;
    nlohmann::json viol = nlohmann::json::array();
    for (std::size_t k : s.violations) {
        const ScanCell& c = cells[k];
        viol.push_back({{"p", {c.p.x, c.p.y}},
                        {"prediction", to_string(*c.prediction)},
                        {"rule", c.rule},
                        {"outcome", to_string(c.outcome)}});
    }
    j["violations"] = viol;
    j["sound"] = sound();
    if (!prediction_error.empty()) j["prediction_error"] = prediction_error;
    return j.dump(2);
}

ToleranceMap scan_grid(const PlanarSystem& sys, Vec2 r0, const GridSpec& grid, const ScanOptions& opts) {
    require_grid(grid);
    require_stable(sys, sys.node(), true);
    ToleranceMap map;
    map.grid = grid;
    map.r0 = r0;
    map.system = sys.name();

    std::optional<CandidateClassifier> cls;
    if (opts.predict) {
        try {
            cls.emplace(sys, r0, opts.geometry);
        } catch (const std::exception& e) {
            map.prediction_error = e.what();
        }
    }

    map.cells.resize(static_cast<std::size_t>(grid.nx) * static_cast<std::size_t>(grid.ny));
    for (int j = 0; j < grid.ny; ++j) {
        for (int i = 0; i < grid.nx; ++i) {
            ScanCell& c = map.cells[static_cast<std::size_t>(j * grid.nx + i)];
            c.i = i;
            c.j = j;
            c.p = grid.center(i, j);
        }
    }
    const CandidateClassifier* cp = cls ? &*cls : nullptr;
    const unsigned threads = opts.threads > 0 ? opts.threads : default_thread_count();
    parallel_for(map.cells.size(), threads, [&](std::size_t k) { evaluate_cell(sys, r0, cp, opts, map.cells[k]); });
    map.summary = summarize(map.cells);
    return map;
}

std::vector<Vec2> preconditioning_curve(const PlanarSystem& sys, Vec2 rho0, Vec2 offset,
                                        const std::vector<double>& s_values, std::optional<Vec2> r0,
                                        const IntegrationOptions& opts) {
    if (offset.x < 0.0 || offset.y < 0.0) throw std::invalid_argument("offset must be nonnegative");
    if (r0 && !(rho0.x > 0.0 && rho0.x <= r0->x && rho0.y >= 0.0 && rho0.y <= r0->y)) {
        throw std::invalid_argument("rho0 must satisfy 0 < x_rho <= x_r and 0 <= y_rho <= y_r");
    }
    double s_max = 0.0;
    for (double s : s_values) {
        if (!(s >= 0.0)) throw std::invalid_argument("s must be nonnegative");
        s_max = std::max(s_max, s);
    }
    std::vector<Vec2> out;
    out.reserve(s_values.size());
    if (s_max == 0.0) {
        for (std::size_t k = 0; k < s_values.size(); ++k) out.push_back(rho0 + offset);
        return out;
    }
    IntegrationOptions io = opts;
    io.direction = Direction::forward;
    io.stop_at_ball = false;
    io.events.clear();
    io.horizon = s_max;
    const Trajectory rho = integrate(sys, rho0, io);
    if (rho.t_end() < s_max) {
        std::ostringstream msg;
        msg << "the flow from rho0 stopped at s = " << rho.t_end() << " (" << to_string(rho.termination())
            << ") before s = " << s_max;
        throw std::runtime_error(msg.str());
    }
    for (double s : s_values) out.push_back((s == 0.0 ? rho0 : rho.eval(s)) + offset);
    return out;
}

Vec2 BasinRaster::center(int i, int j) const {
    return {box.xmin + (box.xmax - box.xmin) * (i + 0.5) / nx, box.ymin + (box.ymax - box.ymin) * (j + 0.5) / ny};
}

std::string BasinRaster::to_json() const {
    nlohmann::json j;
    j["box"] = {{"x", {box.xmin, box.xmax}}, {"y", {box.ymin, box.ymax}}};
    j["nx"] = nx;
    j["ny"] = ny;
    j["fixed_point"] = {fixed_point.x, fixed_point.y};
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < ny; ++r) {
        std::string line;
        for (int i = 0; i < nx; ++i) {
            const std::size_t k = static_cast<std::size_t>(r * nx + i);
            line += inside[k] ? '1' : (conclusive[k] ? '0' : '?');
        }
        rows.push_back(line);
    }
    j["rows"] = rows;
    return j.dump(2);
}

BasinRaster estimate_basin(const PlanarSystem& sys, Vec2 fp, const Box& box, int nx, int ny,
                           const IntegrationOptions& opts, unsigned threads) {
    if (nx < 1 || ny < 1) throw std::invalid_argument("raster resolution must be positive");
    require_stable(sys, fp, false);
    BasinRaster r;
    r.box = box;
    r.nx = nx;
    r.ny = ny;
    r.fixed_point = fp;
    const std::size_t n = static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny);
    r.inside.assign(n, 0);
    r.conclusive.assign(n, 1);
    parallel_for(n, threads > 0 ? threads : default_thread_count(), [&](std::size_t k) {
        const int i = static_cast<int>(k % static_cast<std::size_t>(nx));
        const int j = static_cast<int>(k / static_cast<std::size_t>(nx));
        const BasinResult b = in_basin(sys, r.center(i, j), fp, opts);
        r.inside[k] = b.inside ? 1 : 0;
        r.conclusive[k] = b.conclusive ? 1 : 0;
    });
    return r;
}

}  // namespace tolkit
