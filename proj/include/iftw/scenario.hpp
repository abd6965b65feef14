#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "iftw/engine.hpp"
#include "iftw/geometry.hpp"

namespace iftw {

struct ParseError : std::runtime_error {
    int line;
    ParseError(int line_, const std::string& what)
        : std::runtime_error("line " + std::to_string(line_) + ": " + what),
          line(line_) {}
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Row-major obstacle grid: x outer, then y, then radius.
struct SweepGrid {
    double x_min = 0, x_max = 0, x_step = 1;
    double y_min = 0, y_max = 0, y_step = 1;
    std::vector<double> radii;
    std::optional<std::int64_t> appear_tick;
};

struct RandomSpec {
    int count = 0;
    std::uint64_t seed = 0;
    std::vector<double> radii;
    std::optional<std::int64_t> appear_tick;
};

struct OutputSpec {
    std::string report_path;
    std::string trace_dir;
};

struct ScenarioFile {
    TopologyConfig config;
    std::vector<Obstacle> obstacles;        // [obstacle] sections
    std::optional<SweepGrid> sweep;         // [sweep]
    std::optional<RandomSpec> random;       // [random]
    OutputSpec output;
    std::vector<std::string> warnings;      // non-strict validation notes
};

/// Flat key-value format with [sections]; '#' starts a comment. Unknown keys
/// are rejected. With `strict_interference`, a violated interference-free
/// condition is an error instead of a warning.
ScenarioFile parse_scenario(const std::string& text,
                            bool strict_interference = false);

std::string emit_scenario(const ScenarioFile& sc);

std::int64_t default_appear_tick(const TopologyConfig& cfg);

/// Obstacles of the scenario in deterministic order (the sweep contract:
/// identical regardless of worker count).
std::vector<Obstacle> enumerate_cells(const ScenarioFile& sc);

struct CellResult {
    Obstacle obstacle;
    ScenarioResult result;
};

struct SweepReport {
    std::vector<CellResult> cells;

    int blockage_cells = 0;
    int agreeing_cells = 0;
    // Cells bucketed by detected verdict: I, II, III, IV, combo, none.
    std::vector<std::pair<std::string, int>> histogram;
    double agreement_rate = 0.0;   // over blockage-producing cells
    double mean_detection_latency = 0.0;
    double mean_recovery_latency = 0.0;

    void finalize();
    std::string table_tsv() const;
    std::string summary() const;
};

/// Runs one simulation per cell. workers <= 1 uses the serial reference
/// path; larger counts fan out with OpenMP. Both produce identical reports.
SweepReport run_sweep(const ScenarioFile& sc, int workers = 1);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace iftw
