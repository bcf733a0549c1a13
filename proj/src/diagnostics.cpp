#include "spillover/diagnostics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include "spillover/errors.hpp"
#include "spillover/semiparametric.hpp"

namespace spillover {

namespace {

double quantile_of(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double h = q * (static_cast<double>(v.size()) - 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= v.size()) return v.back();
    return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

std::string arm_label(int d, int dp) { return std::to_string(d) + std::to_string(dp); }

void summarize(DiagnosticReport& r) {
    r.evaluated = 0;
    r.violations = 0;
    r.worst_magnitude = 0.0;
    for (const auto& e : r.entries) {
        if (!e.ok) continue;
        ++r.evaluated;
        if (e.violation) {
            ++r.violations;
            r.worst_magnitude = std::max(r.worst_magnitude, std::fabs(e.statistic));
        }
    }
    r.violation_fraction = r.evaluated ? static_cast<double>(r.violations) / static_cast<double>(r.evaluated) : 0.0;
}

double indicator_response(const GroupRecord& g, const OutcomeSets& sets, int unit, int d, int dp) {
    const int peer = peer_of(unit);
    if (g.d[unit] != d || g.d[peer] != dp) return 0.0;
    return sets.a1.contains(g.y[unit]) && sets.a2.contains(g.y[peer]) ? 1.0 : 0.0;
}

}  // namespace

OutcomeSets default_outcome_sets(const Dataset& data, int unit) {
    check_unit(unit);
    if (data.size() == 0) throw DataError("empty dataset");
    std::vector<double> own(data.size()), peer(data.size());
    for (std::size_t g = 0; g < data.size(); ++g) {
        own[g] = data.groups[g].y[unit];
        peer[g] = data.groups[g].y[peer_of(unit)];
    }
    return {{quantile_of(own, 0.25), quantile_of(own, 0.75)}, {quantile_of(peer, 0.25), quantile_of(peer, 0.75)}};
}

DiagnosticReport nesting_inequality_report(const Dataset& data, const std::vector<PropensityPair>& props,
                                           const OutcomeSets& sets, const std::vector<Point2>& grid,
                                           const NestingOptions& opts, Exec exec) {
    if (props.size() != data.size()) throw DataError("propensities and dataset differ in length");
    const auto pts = oriented_points(props, opts.unit);
    std::array<std::vector<double>, 4> resp;
    for (int a = 0; a < 4; ++a) {
        auto& r = resp[static_cast<std::size_t>(a)];
        r.resize(data.size());
        for (std::size_t g = 0; g < data.size(); ++g) {
            r[g] = opts.response_sign * indicator_response(data.groups[g], sets, opts.unit, a / 2, a % 2);
        }
    }
    DiagnosticReport rep;
    rep.check = "nesting";
    rep.entries.resize(grid.size() * 4);
    for_each_index(grid.size() * 4, exec, [&](std::size_t job) {
        const std::size_t k = job / 4;
        const int a = static_cast<int>(job % 4);
        const int d = a / 2, dp = a % 2;
        auto& e = rep.entries[job];
        e.label = arm_label(d, dp);
        e.point = grid[k];
        try {
            const LocalFit fit = local_cubic_fit(pts, resp[static_cast<std::size_t>(a)], grid[k], opts.h, opts.kernel);
            e.statistic = sign_factor(d, dp) * fit.cross_partial();
            const double f = kernel_density_2d(pts, grid[k], opts.h, opts.kernel);
            e.se = std::sqrt(cross_derivative_variance(opts.kernel, opts.h, data.size(), fit.residual_variance, f));
            e.violation = e.statistic < -opts.tau_multiplier * e.se;
            e.ok = true;
        } catch (const Error& err) {
            e.error = err.what();
        }
    });
    summarize(rep);
    return rep;
}

DiagnosticReport index_sufficiency_report(const Dataset& data, const std::vector<PropensityPair>& props,
                                          const OutcomeSets& sets, const IndexSufficiencyOptions& opts) {
    check_unit(opts.unit);
    if (props.size() != data.size()) throw DataError("propensities and dataset differ in length");
    if (!(opts.cell_width > 0.0 && opts.cell_width <= 1.0)) throw ConfigError("cell width must lie in (0, 1]");
    if (data.size() == 0) throw DataError("empty dataset");
    const std::size_t L = data.groups[0].w[0].size() * 2;
    if (opts.split_column < 0 || static_cast<std::size_t>(opts.split_column) >= L) {
        throw ConfigError("split column out of range");
    }
    const int cells = static_cast<int>(std::ceil(1.0 / opts.cell_width - 1e-12));
    auto cell_of = [&](double p) { return std::min(cells - 1, static_cast<int>(std::floor(p / opts.cell_width))); };

    std::map<std::pair<int, int>, std::vector<std::size_t>> members;
    for (std::size_t g = 0; g < data.size(); ++g) {
        members[{cell_of(own_p(props[g], opts.unit)), cell_of(peer_p(props[g], opts.unit))}].push_back(g);
    }

    DiagnosticReport rep;
    rep.check = "index-sufficiency";
    bool any_populated = false;
    for (const auto& [cell, idx] : members) {
        std::vector<double> z(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) z[k] = group_input(data.groups[idx[k]])[static_cast<std::size_t>(opts.split_column)];
        const double med = quantile_of(z, 0.5);
        std::vector<std::size_t> lo, hi;
        for (std::size_t k = 0; k < idx.size(); ++k) (z[k] <= med ? lo : hi).push_back(idx[k]);
        if (lo.size() < opts.min_per_side || hi.size() < opts.min_per_side) continue;
        any_populated = true;
        const Point2 centre{(cell.first + 0.5) * opts.cell_width, (cell.second + 0.5) * opts.cell_width};
        for (int a = 0; a < 4; ++a) {
            auto moments = [&](const std::vector<std::size_t>& side) {
                double s = 0.0, s2 = 0.0;
                for (std::size_t g : side) {
                    const double r = indicator_response(data.groups[g], sets, opts.unit, a / 2, a % 2);
                    s += r;
                    s2 += r * r;
                }
                const double n = static_cast<double>(side.size());
                const double mean = s / n;
                const double var = n > 1 ? std::max(0.0, (s2 - n * mean * mean) / (n - 1.0)) : 0.0;
                return std::pair{mean, var / n};
            };
            const auto [m_lo, v_lo] = moments(lo);
            const auto [m_hi, v_hi] = moments(hi);
            DiagnosticEntry e;
            e.label = arm_label(a / 2, a % 2);
            e.point = centre;
            e.se = std::sqrt(v_lo + v_hi);
            const double diff = m_hi - m_lo;
            e.statistic = e.se > 0.0 ? diff / e.se : (diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff));
            e.violation = std::fabs(e.statistic) > opts.threshold;
            e.ok = true;
            rep.entries.push_back(e);
        }
    }
    if (!any_populated) {
        throw DataError("insufficient overlap: no propensity cell has " + std::to_string(opts.min_per_side) +
                        " groups on both sides of the instrument median");
    }
    summarize(rep);
    return rep;
}

}  // namespace spillover
