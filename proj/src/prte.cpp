#include "spillover/prte.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spillover/errors.hpp"
#include "spillover/normal.hpp"
#include "spillover/quadrature.hpp"

namespace spillover {

namespace {

constexpr double kNoMovers = 1e-10;

double score_of(double p) {
    if (p <= 0.0) return -std::numeric_limits<double>::infinity();
    if (p >= 1.0) return std::numeric_limits<double>::infinity();
    return std_normal_quantile(p);
}

void check_pair(const PropensityPair& p, const char* what) {
    if (!(p.p0 >= 0.0 && p.p0 <= 1.0 && p.p1 >= 0.0 && p.p1 <= 1.0)) {
        throw ConfigError(std::string("infeasible policy: ") + what + " propensity outside [0,1]");
    }
}

// Surface order in coefficient arrays.
enum { kMcde0 = 0, kMcse0 = 1, kMcde1 = 2, kMcse1 = 3 };

}  // namespace

double counterfactual_propensity(const ProbitModel& model, const std::vector<double>& w, int j, double eps) {
    if (j < 0 || static_cast<std::size_t>(j) >= w.size()) {
        throw ConfigError("instrument column " + std::to_string(j) + " out of range");
    }
    std::vector<double> shifted = w;
    shifted[static_cast<std::size_t>(j)] += eps;
    return predict_propensity(model, shifted);
}

std::vector<PropensityPair> apply_policy(const PolicySpec& policy, const std::vector<PropensityPair>& sample,
                                         const Dataset* data, const ProbitModel* m0, const ProbitModel* m1) {
    std::vector<PropensityPair> out(sample.size());
    switch (policy.kind) {
        case PolicyKind::AbsoluteShift:
            for (std::size_t g = 0; g < sample.size(); ++g) {
                out[g] = {sample[g].p0 + policy.eps, sample[g].p1 + policy.eps};
                check_pair(sample[g], "pre-policy");
                check_pair(out[g], "post-policy");
            }
            break;
        case PolicyKind::ProportionalShift:
            if (!(policy.eps > 0.0 && policy.eps < 1.0)) {
                throw ConfigError("infeasible policy: proportional shift needs 0 < eps < 1");
            }
            for (std::size_t g = 0; g < sample.size(); ++g) {
                check_pair(sample[g], "pre-policy");
                out[g] = {sample[g].p0 + policy.eps * (1.0 - sample[g].p0),
                          sample[g].p1 + policy.eps * (1.0 - sample[g].p1)};
            }
            break;
        case PolicyKind::InstrumentShift: {
            if (!data || !m0 || !m1) throw ConfigError("instrument shift needs the dataset and both probit models");
            if (data->size() != sample.size()) throw DataError("propensity sample and dataset differ in length");
            const std::size_t block = data->layout.z_dim + data->layout.x_dim;
            if (policy.column < 0 || static_cast<std::size_t>(policy.column) >= 2 * block ||
                static_cast<std::size_t>(policy.column) % block >= data->layout.z_dim) {
                throw ConfigError("instrument column " + std::to_string(policy.column) + " out of range");
            }
            for (std::size_t g = 0; g < sample.size(); ++g) {
                const auto w = group_input(data->groups[g]);
                out[g] = {counterfactual_propensity(*m0, w, policy.column, policy.eps),
                          counterfactual_propensity(*m1, w, policy.column, policy.eps)};
            }
            break;
        }
    }
    return out;
}

Path member_path(double v, double before, double after) {
    const bool was = v <= before, now = v <= after;
    if (was && now) return Path::Stay1;
    if (!was && !now) return Path::Stay0;
    return now ? Path::Up : Path::Down;
}

int transition_region(Path own, Path peer) {
    const bool om = own == Path::Up || own == Path::Down;
    const bool pm = peer == Path::Up || peer == Path::Down;
    if (om && pm) return 4;
    if (om) return peer == Path::Stay0 ? 0 : 2;
    if (pm) return own == Path::Stay0 ? 1 : 3;
    return -1;
}

std::array<double, 4> transition_coefficients(Path own, Path peer) {
    std::array<double, 4> c{};
    const double so = own == Path::Up ? 1.0 : -1.0;
    const double sp = peer == Path::Up ? 1.0 : -1.0;
    switch (transition_region(own, peer)) {
        case 0: c[kMcde0] = so; break;
        case 1: c[kMcse0] = sp; break;
        case 2: c[kMcde1] = so; break;
        case 3: c[kMcse1] = sp; break;
        case 4:
            if (so == sp) {
                c[kMcde1] = so;
                c[kMcse0] = so;
            } else {
                c[kMcde0] = so;
                c[kMcse0] = sp;
            }
            break;
        default: break;
    }
    return c;
}

ScoreGrid prte_score_grid(int order) {
    if (order < 8 || order % 8 != 0) throw ConfigError("PRTE quadrature order must be a positive multiple of 8");
    const auto& gl = cached_gauss_legendre(8);
    const int panels = order / 8;
    const double width = 2.0 * kTailClip / panels;
    ScoreGrid g;
    for (int p = 0; p < panels; ++p) {
        const double c = -kTailClip + (p + 0.5) * width;
        for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
            g.t.push_back(c + 0.5 * width * gl.nodes[i]);
            g.w.push_back(0.5 * width * gl.weights[i]);
        }
    }
    return g;
}

namespace {

// Sums surfaces against per-node coefficient fields and the copula density.
PrteResult integrate_fields(const EffectSurfaces& s, const CopulaSpec& copula, const ScoreGrid& grid,
                            const std::vector<std::array<double, 5>>& field, std::size_t G, Exec exec) {
    const std::size_t K = grid.t.size();
    std::vector<double> v(K);
    for (std::size_t k = 0; k < K; ++k) v[k] = std::clamp(std_normal_cdf(grid.t[k]), 1e-300, std::nextafter(1.0, 0.0));
    std::vector<double> ey_row(K, 0.0), dp_row(K, 0.0);
    for_each_index(K, exec, [&](std::size_t a) {
        double ey = 0.0, dp = 0.0;
        for (std::size_t b = 0; b < K; ++b) {
            const auto& f = field[a * K + b];
            const double wt = grid.w[a] * grid.w[b] * bvn_pdf(grid.t[a], grid.t[b], copula.rho);
            if (f[4] == 0.0) continue;
            double val = 0.0;
            if (f[kMcde0] != 0.0) val += f[kMcde0] * s.mcde[0](v[a], v[b]);
            if (f[kMcse0] != 0.0) val += f[kMcse0] * s.mcse[0](v[a], v[b]);
            if (f[kMcde1] != 0.0) val += f[kMcde1] * s.mcde[1](v[a], v[b]);
            if (f[kMcse1] != 0.0) val += f[kMcse1] * s.mcse[1](v[a], v[b]);
            ey += wt * val;
            dp += wt * f[4];
        }
        ey_row[a] = ey;
        dp_row[a] = dp;
    });
    PrteResult r;
    for (std::size_t a = 0; a < K; ++a) {
        r.delta_ey += ey_row[a];
        r.delta_p += dp_row[a];
    }
    r.delta_ey /= static_cast<double>(G);
    r.delta_p /= static_cast<double>(G);
    return r;
}

std::array<double, 4> strata_of(const std::vector<PropensityPair>& before, const std::vector<PropensityPair>& after,
                                int unit) {
    std::array<double, 4> s{};
    for (std::size_t g = 0; g < before.size(); ++g) {
        const bool ou = own_p(after[g], unit) >= own_p(before[g], unit);
        const bool pu = peer_p(after[g], unit) >= peer_p(before[g], unit);
        s[(ou ? 0 : 2) + (pu ? 0 : 1)] += 1.0;
    }
    for (auto& x : s) x /= static_cast<double>(before.size());
    return s;
}

void check_inputs(const std::vector<PropensityPair>& before, const std::vector<PropensityPair>& after, int unit) {
    check_unit(unit);
    if (before.empty()) throw DataError("empty propensity sample");
    if (before.size() != after.size()) throw DataError("pre- and post-policy samples differ in length");
}

PrteResult finish(PrteResult r, const std::vector<PropensityPair>& before, const std::vector<PropensityPair>& after,
                  int unit) {
    r.strata = strata_of(before, after, unit);
    if (!(r.delta_p > kNoMovers)) throw NumericalError("no movers: the policy changes nobody's treatment");
    r.prte = r.delta_ey / r.delta_p;
    return r;
}

}  // namespace

PrteResult prte_from_pairs(const EffectSurfaces& surfaces, const CopulaSpec& copula,
                           const std::vector<PropensityPair>& before, const std::vector<PropensityPair>& after,
                           int unit, int order, Exec exec) {
    check_inputs(before, after, unit);
    const ScoreGrid grid = prte_score_grid(order);
    const std::size_t K = grid.t.size();

    // Per group, each member's path is piecewise constant in its node index:
    // Stay1 on [0, lo), moving on [lo, hi), Stay0 on [hi, K). Every (own, peer)
    // block with a mover is a rectangle added to a difference array.
    std::vector<std::array<double, 5>> diff((K + 1) * (K + 1), std::array<double, 5>{});
    auto add_block = [&](std::size_t a0, std::size_t a1, std::size_t b0, std::size_t b1, const std::array<double, 5>& c) {
        if (a0 >= a1 || b0 >= b1) return;
        for (int q = 0; q < 5; ++q) {
            diff[a0 * (K + 1) + b0][q] += c[q];
            diff[a0 * (K + 1) + b1][q] -= c[q];
            diff[a1 * (K + 1) + b0][q] -= c[q];
            diff[a1 * (K + 1) + b1][q] += c[q];
        }
    };
    auto count_le = [&](double s) {
        return static_cast<std::size_t>(std::upper_bound(grid.t.begin(), grid.t.end(), s) - grid.t.begin());
    };
    for (std::size_t g = 0; g < before.size(); ++g) {
        const double ob = score_of(own_p(before[g], unit)), oa = score_of(own_p(after[g], unit));
        const double pb = score_of(peer_p(before[g], unit)), pa = score_of(peer_p(after[g], unit));
        const std::size_t olo = count_le(std::min(ob, oa)), ohi = ob == oa ? olo : count_le(std::max(ob, oa));
        const std::size_t plo = count_le(std::min(pb, pa)), phi = pb == pa ? plo : count_le(std::max(pb, pa));
        const Path omove = oa > ob ? Path::Up : Path::Down;
        const Path pmove = pa > pb ? Path::Up : Path::Down;
        const std::array<std::pair<std::size_t, std::size_t>, 3> orng{{{0, olo}, {olo, ohi}, {ohi, K}}};
        const std::array<std::pair<std::size_t, std::size_t>, 3> prng{{{0, plo}, {plo, phi}, {phi, K}}};
        const std::array<Path, 3> opath{Path::Stay1, omove, Path::Stay0};
        const std::array<Path, 3> ppath{Path::Stay1, pmove, Path::Stay0};
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                if (i != 1 && j != 1) continue;
                const auto c4 = transition_coefficients(opath[i], ppath[j]);
                add_block(orng[i].first, orng[i].second, prng[j].first, prng[j].second,
                          {c4[0], c4[1], c4[2], c4[3], 1.0});
            }
        }
    }
    std::vector<std::array<double, 5>> field(K * K);
    std::vector<std::array<double, 5>> run(K + 1, std::array<double, 5>{});
    for (std::size_t a = 0; a < K; ++a) {
        std::array<double, 5> row{};
        for (std::size_t b = 0; b < K; ++b) {
            for (int q = 0; q < 5; ++q) {
                row[q] += diff[a * (K + 1) + b][q];
                run[b][q] += row[q];
                field[a * K + b][q] = run[b][q];
            }
        }
    }
    // Prefix sums of integers stored in doubles are exact, so zero fields test cleanly.
    return finish(integrate_fields(surfaces, copula, grid, field, before.size(), exec), before, after, unit);
}

PrteResult prte_reference(const EffectSurfaces& surfaces, const CopulaSpec& copula,
                          const std::vector<PropensityPair>& before, const std::vector<PropensityPair>& after,
                          int unit, int order) {
    check_inputs(before, after, unit);
    const ScoreGrid grid = prte_score_grid(order);
    const std::size_t K = grid.t.size();
    std::vector<std::array<double, 5>> field(K * K, std::array<double, 5>{});
    for (std::size_t a = 0; a < K; ++a) {
        for (std::size_t b = 0; b < K; ++b) {
            auto& f = field[a * K + b];
            for (std::size_t g = 0; g < before.size(); ++g) {
                const Path own = member_path(grid.t[a], score_of(own_p(before[g], unit)), score_of(own_p(after[g], unit)));
                const Path peer =
                    member_path(grid.t[b], score_of(peer_p(before[g], unit)), score_of(peer_p(after[g], unit)));
                if (transition_region(own, peer) < 0) continue;
                const auto c = transition_coefficients(own, peer);
                for (int q = 0; q < 4; ++q) f[q] += c[q];
                f[4] += 1.0;
            }
        }
    }
    return finish(integrate_fields(surfaces, copula, grid, field, before.size(), Exec::Serial), before, after, unit);
}

PrteResult prte(const PolicySpec& policy, const EffectSurfaces& surfaces, const CopulaSpec& copula,
                const std::vector<PropensityPair>& sample, const Dataset* data, const ProbitModel* m0,
                const ProbitModel* m1, int unit, int order, Exec exec) {
    const auto after = apply_policy(policy, sample, data, m0, m1);
    return prte_from_pairs(surfaces, copula, sample, after, unit, order, exec);
}

}  // namespace spillover
