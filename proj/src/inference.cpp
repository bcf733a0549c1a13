#include "spillover/inference.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include "spillover/errors.hpp"
#include "spillover/rng.hpp"

namespace spillover {

std::string Target::label() const {
    if (kind == TargetKind::Rho) return "rho";
    std::ostringstream os;
    os << (kind == TargetKind::MCSE ? "MCSE" : "MCDE") << "(d=" << d << ",unit=" << unit << ")@(" << point.p0 << ","
       << point.p1 << ")";
    return os.str();
}

double evaluate_target(const ParametricFit& fit, const Target& t) {
    switch (t.kind) {
        case TargetKind::Rho: return fit.copula.rho;
        case TargetKind::MCSE: return mcse_parametric(fit.mtr, t.unit, t.d, t.point);
        case TargetKind::MCDE: return mcde_parametric(fit.mtr, t.unit, t.d, t.point);
    }
    return 0.0;
}

const Interval& TargetResult::interval(double level) const {
    for (const auto& iv : intervals) {
        if (std::fabs(iv.level - level) < 1e-12) return iv;
    }
    throw ConfigError("no interval at the requested level");
}

double quantile_type7(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw NumericalError("quantile of an empty sample");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

namespace {

Dataset resample(const Dataset& data, std::uint64_t key) {
    CounterRng rng(key);
    std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
    Dataset out;
    out.layout = data.layout;
    out.groups.resize(data.size());
    for (std::size_t g = 0; g < data.size(); ++g) out.groups[g] = data.groups[pick(rng)];
    return out;
}

struct Replicate {
    bool ok = false;
    std::vector<double> values;
    std::string error;
};

Replicate run_replicate(const Dataset& sample, const ParametricConfig& config, const std::vector<Target>& targets) {
    Replicate rep;
    try {
        const ParametricFit fit = fit_parametric(sample, config, Exec::Serial);
        if (fit.copula.boundary_warning) {
            rep.error = "rho at the boundary of [-eps, eps]";
            return rep;
        }
        rep.values.reserve(targets.size());
        for (const auto& t : targets) rep.values.push_back(evaluate_target(fit, t));
        rep.ok = true;
    } catch (const Error& e) {
        rep.error = e.what();
    }
    return rep;
}

}  // namespace

BootstrapResult bootstrap(const Dataset& data, const ParametricConfig& config, const std::vector<Target>& targets, int B,
                          const std::vector<double>& levels, std::uint64_t seed, Exec exec) {
    if (B < 50) throw ConfigError("bootstrap requires B >= 50");
    if (data.size() == 0) throw DataError("bootstrap needs a nonempty dataset");
    for (double lv : levels) {
        if (!(lv > 0.0 && lv < 1.0)) throw ConfigError("confidence levels must lie in (0,1)");
    }
    const ParametricFit full = fit_parametric(data, config, exec);
    BootstrapResult result;
    result.B = B;
    result.targets.resize(targets.size());
    for (std::size_t k = 0; k < targets.size(); ++k) {
        result.targets[k].target = targets[k];
        result.targets[k].estimate = evaluate_target(full, targets[k]);
    }
    const std::uint64_t base = derive_key(seed, stream::kBootstrap);
    std::vector<Replicate> reps(static_cast<std::size_t>(B));
    for_each_index(reps.size(), exec, [&](std::size_t b) {
        reps[b] = run_replicate(resample(data, derive_key(base, b)), config, targets);
    });
    for (const auto& rep : reps) {
        if (!rep.ok) {
            if (result.failures == 0) result.first_failure = rep.error;
            ++result.failures;
            continue;
        }
        for (std::size_t k = 0; k < targets.size(); ++k) result.targets[k].replicates.push_back(rep.values[k]);
    }
    result.flagged = result.failures > 0.02 * B;
    for (auto& tr : result.targets) {
        std::vector<double> sorted = tr.replicates;
        std::sort(sorted.begin(), sorted.end());
        for (double lv : levels) {
            Interval iv{lv, 0.0, 0.0};
            if (!sorted.empty()) {
                iv.lower = quantile_type7(sorted, 0.5 * (1.0 - lv));
                iv.upper = quantile_type7(sorted, 0.5 * (1.0 + lv));
            } else {
                iv.lower = iv.upper = std::numeric_limits<double>::quiet_NaN();
            }
            tr.intervals.push_back(iv);
        }
    }
    return result;
}

const std::vector<Point2>& table1_points() {
    static const std::vector<Point2> pts{{0.3, 0.7}, {0.4, 0.6}, {0.5, 0.5}, {0.6, 0.4}, {0.7, 0.3}};
    return pts;
}

std::vector<Target> table1_targets(int unit) {
    std::vector<Target> out;
    for (TargetKind kind : {TargetKind::MCDE, TargetKind::MCSE}) {
        for (int d : {1, 0}) {
            for (const auto& p : table1_points()) out.push_back({kind, d, unit, EvalPoint{p[0], p[1], {}}});
        }
    }
    out.push_back({TargetKind::Rho, 0, unit, {}});
    return out;
}

double true_target_value(const DgpConfig& config, const Target& t) {
    switch (t.kind) {
        case TargetKind::Rho: return config.rho();
        case TargetKind::MCSE: return true_mcse(config, t.d, t.point.p0, t.point.p1);
        case TargetKind::MCDE: return true_mcde(config, t.d, t.point.p0, t.point.p1);
    }
    return 0.0;
}

double CoverageCell::se() const {
    if (total == 0) return 0.0;
    const double p = rate();
    return std::sqrt(p * (1.0 - p) / total);
}

const CoverageCell& CoverageTable::cell(TargetKind kind, int d, std::size_t point_index) const {
    const auto& pts = table1_points();
    for (const auto& c : cells) {
        if (c.target.kind == kind && c.target.d == d && c.target.point.p0 == pts.at(point_index)[0] &&
            c.target.point.p1 == pts.at(point_index)[1]) {
            return c;
        }
    }
    throw ConfigError("coverage cell not found");
}

const CoverageCell& CoverageTable::rho_cell() const {
    for (const auto& c : cells) {
        if (c.target.kind == TargetKind::Rho) return c;
    }
    throw ConfigError("rho cell not found");
}

CoverageTable coverage_experiment(const DgpConfig& base, const CoverageOptions& opts, std::uint64_t seed,
                                  const ParametricConfig& config, Exec exec) {
    if (opts.R < 50) throw ConfigError("coverage experiment requires R >= 50");
    const std::vector<Target> targets = table1_targets(0);
    struct Outcome {
        bool ok = false;
        bool flagged = false;
        std::vector<int> covered;
    };
    std::vector<Outcome> outcomes(static_cast<std::size_t>(opts.R));
    const std::uint64_t data_base = derive_key(seed, stream::kReplication);
    const std::uint64_t boot_base = derive_key(seed, stream::kBootstrap);
    for_each_index(outcomes.size(), exec, [&](std::size_t r) {
        DgpConfig cfg = base;
        cfg.seed = derive_key(data_base, r);
        Outcome& out = outcomes[r];
        try {
            const Dataset data = simulate_dataset(cfg, Exec::Serial);
            const BootstrapResult br =
                bootstrap(data, config, targets, opts.B, {opts.level}, derive_key(boot_base, r), Exec::Serial);
            out.flagged = br.flagged;
            out.covered.resize(targets.size());
            for (std::size_t k = 0; k < targets.size(); ++k) {
                out.covered[k] = br.targets[k].interval(opts.level).covers(true_target_value(base, targets[k])) ? 1 : 0;
            }
            out.ok = true;
        } catch (const Error&) {
            out.ok = false;
        }
    });
    CoverageTable table;
    table.R = opts.R;
    table.G = base.G;
    table.B = opts.B;
    table.cells.resize(targets.size());
    for (std::size_t k = 0; k < targets.size(); ++k) table.cells[k].target = targets[k];
    for (const auto& out : outcomes) {
        if (!out.ok) {
            ++table.failed_replications;
            continue;
        }
        if (out.flagged) ++table.flagged_bootstraps;
        for (std::size_t k = 0; k < targets.size(); ++k) {
            table.cells[k].covered += out.covered[k];
            table.cells[k].total += 1;
        }
    }
    if (opts.R >= 400) {
        for (const auto& c : table.cells) {
            if (!(c.se() < 0.025)) throw NumericalError("coverage standard error not below 0.025 for " + c.target.label());
        }
    }
    return table;
}

void write_coverage_csv(std::ostream& os, const CoverageTable& table) {
    const auto& pts = table1_points();
    os << "panel,effect,G,d";
    for (const auto& p : pts) os << ",\"(" << p[0] << "," << p[1] << ")\"";
    os << ",rho";
    for (const auto& p : pts) os << ",\"se(" << p[0] << "," << p[1] << ")\"";
    os << ",se_rho\n";
    const CoverageCell& rho = table.rho_cell();
    os << std::setprecision(6);
    int panel = 1;
    for (TargetKind kind : {TargetKind::MCDE, TargetKind::MCSE}) {
        for (int d : {1, 0}) {
            os << panel << ',' << (kind == TargetKind::MCDE ? "MCDE" : "MCSE") << ',' << table.G << ',' << d;
            for (std::size_t k = 0; k < pts.size(); ++k) os << ',' << table.cell(kind, d, k).rate();
            os << ',' << rho.rate();
            for (std::size_t k = 0; k < pts.size(); ++k) os << ',' << table.cell(kind, d, k).se();
            os << ',' << rho.se() << '\n';
        }
        ++panel;
    }
}

}  // namespace spillover
