#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "spillover/local_poly.hpp"
#include "spillover/pipeline.hpp"
#include "spillover/simulation.hpp"

namespace spillover {

enum class TargetKind { MCSE, MCDE, Rho };

struct Target {
    TargetKind kind = TargetKind::MCSE;
    int d = 1;
    int unit = 0;
    EvalPoint point;

    std::string label() const;
};

double evaluate_target(const ParametricFit& fit, const Target& target);

struct Interval {
    double level = 0.95;
    double lower = 0.0;
    double upper = 0.0;

    bool covers(double value) const { return lower <= value && value <= upper; }
};

struct TargetResult {
    Target target;
    double estimate = 0.0;
    std::vector<double> replicates;
    std::vector<Interval> intervals;

    const Interval& interval(double level) const;
};

struct BootstrapResult {
    std::vector<TargetResult> targets;
    int B = 0;
    int failures = 0;
    bool flagged = false;
    std::string first_failure;
};

/// Sample quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7). `sorted` must be ascending and nonempty.
double quantile_type7(const std::vector<double>& sorted, double q);

/// Group bootstrap: resample G groups with replacement, rerun all three stages,
/// percentile intervals. Replicate b draws from its own stream, so results do
/// not depend on the thread count.
BootstrapResult bootstrap(const Dataset& data, const ParametricConfig& config, const std::vector<Target>& targets, int B,
                          const std::vector<double>& levels, std::uint64_t seed, Exec exec = Exec::Parallel);

/// Five evaluation points x {MCDE, MCSE} x d in {1, 0}, then rho.
std::vector<Target> table1_targets(int unit = 0);
const std::vector<Point2>& table1_points();

double true_target_value(const DgpConfig& config, const Target& target);

struct CoverageCell {
    Target target;
    int covered = 0;
    int total = 0;

    double rate() const { return total > 0 ? static_cast<double>(covered) / total : 0.0; }
    double se() const;
};

struct CoverageTable {
    std::vector<CoverageCell> cells;
    int R = 0;
    std::size_t G = 0;
    int B = 0;
    int failed_replications = 0;
    int flagged_bootstraps = 0;

    const CoverageCell& cell(TargetKind kind, int d, std::size_t point_index) const;
    const CoverageCell& rho_cell() const;
};

struct CoverageOptions {
    int R = 500;
    int B = 200;
    double level = 0.95;
};

/// Outer replications are parallel; each replication's bootstrap then runs serially.
CoverageTable coverage_experiment(const DgpConfig& base, const CoverageOptions& opts, std::uint64_t seed,
                                  const ParametricConfig& config = {}, Exec exec = Exec::Parallel);

/// CSV laid out like the coverage table: one row per (effect, d), one column per
/// evaluation point, rho repeated on every row; binomial SEs in trailing columns.
void write_coverage_csv(std::ostream& os, const CoverageTable& table);

}  // namespace spillover
