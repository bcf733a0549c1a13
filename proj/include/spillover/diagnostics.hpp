#pragma once

#include <limits>
#include <string>
#include <vector>

#include "spillover/core_model.hpp"
#include "spillover/local_poly.hpp"
#include "spillover/parallel.hpp"

namespace spillover {

/// Closed outcome interval [lo, hi]; lo > hi is the empty set.
struct OutcomeSet {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();

    bool contains(double y) const { return y >= lo && y <= hi; }
    static OutcomeSet empty() { return {1.0, 0.0}; }
};

/// A1 applies to member `unit`'s outcome and A2 to the peer's.
struct OutcomeSets {
    OutcomeSet a1;
    OutcomeSet a2;
};

/// Interquartile intervals of each member's observed outcome.
OutcomeSets default_outcome_sets(const Dataset& data, int unit = 0);

struct DiagnosticEntry {
    std::string label;  // arm, e.g. "11"
    Point2 point{};     // grid point or cell centre
    double statistic = 0.0;
    double se = 0.0;
    bool violation = false;
    bool ok = false;
    std::string error;
};

struct DiagnosticReport {
    std::string check;
    std::vector<DiagnosticEntry> entries;
    std::size_t evaluated = 0;
    std::size_t violations = 0;
    double violation_fraction = 0.0;
    double worst_magnitude = 0.0;
};

struct NestingOptions {
    double h = 0.25;
    int unit = 0;
    KernelType kernel = KernelType::Epanechnikov;
    double response_sign = 1.0;  // -1 negates every indicator response
    double tau_multiplier = 2.0;
};

/// Signed cross-partials of E[1{Y_i in A1, Y_-i in A2} 1{arm} | P] on the
/// grid: + for arms (d, d), - for (d, 1-d). Flags values below -tau, with
/// tau = tau_multiplier times the plug-in standard error.
DiagnosticReport nesting_inequality_report(const Dataset& data, const std::vector<PropensityPair>& props,
                                           const OutcomeSets& sets, const std::vector<Point2>& grid,
                                           const NestingOptions& opts = {}, Exec exec = Exec::Parallel);

struct IndexSufficiencyOptions {
    double cell_width = 0.1;
    int split_column = 0;  // column of the group input (w0, w1) used for the median split
    int unit = 0;
    std::size_t min_per_side = 20;
    double threshold = 2.0;
};

/// Within each propensity cell, compares the arm-specific outcome moments of
/// groups below and above the cell median of one instrument.
DiagnosticReport index_sufficiency_report(const Dataset& data, const std::vector<PropensityPair>& props,
                                          const OutcomeSets& sets, const IndexSufficiencyOptions& opts = {});

}  // namespace spillover
