#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tolkit/geometry.hpp"
#include "tolkit/system.hpp"
#include "tolkit/tolerance.hpp"

namespace tolkit {

// Uniform grid; cells are evaluated at their centers.
struct GridSpec {
    double x_min = 0.0;
    double x_max = 1.0;
    double y_min = 0.0;
    double y_max = 1.0;
    int nx = 2;
    int ny = 2;

    [[nodiscard]] Vec2 center(int i, int j) const;
    // Cell containing p, or {-1, -1} outside the grid.
    [[nodiscard]] std::array<int, 2> cell_of(Vec2 p) const;
};

enum class CellStatus { evaluated, skipped_a3, outside_basin, error };

[[nodiscard]] const char* to_string(CellStatus s);

struct ScanCell {
    int i = 0;
    int j = 0;
    Vec2 p;
    CellStatus status = CellStatus::evaluated;
    std::optional<PredictionKind> prediction;
    std::string rule;
    Outcome outcome = Outcome::inconclusive;
    double onset = -1.0;  // t1, or -1 without tolerance
    double margin = 0.0;
    std::string error;
};

struct ScanSummary {
    std::size_t evaluated = 0;
    std::size_t skipped_a3 = 0;
    std::size_t outside_basin = 0;
    std::size_t errors = 0;
    std::size_t tolerance = 0;
    std::size_t no_tolerance = 0;
    std::size_t inconclusive = 0;
    // confusion[prediction][outcome], indexed by the enum values.
    std::array<std::array<std::size_t, 3>, 3> confusion{};
    // Guaranteed cells without tolerance and Impossible cells with it (conclusive outcomes only).
    std::vector<std::size_t> violations;
};

struct ToleranceMap {
    GridSpec grid;
    Vec2 r0;
    std::string system;
    std::vector<ScanCell> cells;  // row-major in j, then i
    ScanSummary summary;
    std::string prediction_error;  // set when no classifier could be built for r0

    [[nodiscard]] const ScanCell& at(int i, int j) const { return cells[static_cast<std::size_t>(j * grid.nx + i)]; }
    [[nodiscard]] const ScanCell* cell_containing(Vec2 p) const;
    [[nodiscard]] bool sound() const { return summary.violations.empty(); }
    [[nodiscard]] std::string to_csv() const;
    [[nodiscard]] std::string to_json() const;
};

struct ScanOptions {
    ToleranceOptions tolerance;
    GeometryOptions geometry;
    bool predict = true;
    unsigned threads = 0;  // 0: TOLKIT_THREADS, else hardware concurrency
};

// Worker count from TOLKIT_THREADS or the hardware.
[[nodiscard]] unsigned default_thread_count();

// Throws std::invalid_argument for a grid below 2x2 and PreconditionError when the node is not stable.
[[nodiscard]] ToleranceMap scan_grid(const PlanarSystem& sys, Vec2 r0, const GridSpec& grid,
                                     const ScanOptions& opts = {});

// rho(s) + offset for rho the flow from rho0. Throws std::invalid_argument for negative
// offsets or s, and std::runtime_error when the flow stops before s.
[[nodiscard]] std::vector<Vec2> preconditioning_curve(const PlanarSystem& sys, Vec2 rho0, Vec2 offset,
                                                      const std::vector<double>& s_values,
                                                      std::optional<Vec2> r0 = std::nullopt,
                                                      const IntegrationOptions& opts = {});

struct BasinRaster {
    Box box;
    int nx = 0;
    int ny = 0;
    Vec2 fixed_point;
    std::vector<std::uint8_t> inside;  // row-major in j, then i
    std::vector<std::uint8_t> conclusive;

    [[nodiscard]] bool at(int i, int j) const { return inside[static_cast<std::size_t>(j * nx + i)] != 0; }
    [[nodiscard]] Vec2 center(int i, int j) const;
    [[nodiscard]] std::string to_json() const;
};

// Throws PreconditionError when fp is not a stable fixed point.
[[nodiscard]] BasinRaster estimate_basin(const PlanarSystem& sys, Vec2 fp, const Box& box, int nx, int ny,
                                         const IntegrationOptions& opts = {}, unsigned threads = 0);

}  // namespace tolkit
