#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "resetfree/config.hpp"
#include "resetfree/harness.hpp"
#include "resetfree/oracle.hpp"

namespace resetfree {

// Executes a run configuration over its (episodes, seed) grid, writes one CSV
// and one summary JSON per cell plus a grid summary, and aggregates the
// verification outcomes.  Cells run in a worker pool of config.threads; the
// environment and its oracle are built once and shared read-only.

struct CellResult {
    std::string name; // "<env>_K<episodes>_seed<seed>"
    int episodes = 0;
    std::uint64_t seed = 0;
    GameMetrics metrics;
    ReductionReport reduction;
    DualBoundReport dual_bound;
    bool verified_ok = true; // true when verification was disabled or passed
};

struct Aggregate {
    int episodes = 0;
    int num_seeds = 0;
    double regret_mean = 0.0;
    double regret_stderr = 0.0;
    double resets_mean = 0.0; // expected resets (analytic)
    double resets_stderr = 0.0;
};

struct ExperimentResult {
    std::string env_name;
    double dual_radius = 0.0;
    std::vector<CellResult> cells;      // ordered by (episodes, seed)
    std::vector<Aggregate> aggregates;  // ordered by episodes
    bool all_verified = true;
    std::optional<SaddleCertification> saddle_cert;
    std::optional<EquivalenceCertification> equivalence_cert;
};

// output_dir_override, when non-empty, wins over config.output_dir.  Pass
// write_files = false to skip all file output (used by tests).
ExperimentResult run_experiment(const RunConfig& config, const std::string& output_dir_override = "",
                                bool write_files = true);

// Scaling fits: least squares of log(mean cumulative metric) on log K.

struct ScalingPoint {
    int episodes = 0;
    int num_seeds = 0;
    double regret_mean = 0.0;
    double resets_mean = 0.0;
};

struct ScalingFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

struct ScalingReport {
    bool inconclusive = true;
    std::string reason; // why, when inconclusive
    std::vector<ScalingPoint> points;
    ScalingFit regret_fit;
    ScalingFit resets_fit;
    // (regret_mean / K at the largest K) / (regret_mean / K at the smallest K)
    double avg_regret_ratio = 0.0;
    std::string to_json() const;
};

// min_points distinct K values with min_seeds seeds each are required; any
// non-positive mean also marks the report inconclusive (log undefined).
ScalingReport fit_scaling(std::vector<ScalingPoint> points, int min_points = 4, int min_seeds = 10);

// Scans a directory tree for per-cell summary JSON files (episodes, seed,
// metrics.regret, metrics.resets_expected), groups them by K and fits.
ScalingReport scaling_report_from_dir(const std::string& summary_dir, int min_points = 4,
                                      int min_seeds = 10);

} // namespace resetfree
