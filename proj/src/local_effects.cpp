#include "spillover/local_effects.hpp"

#include <algorithm>
#include <cmath>

#include "spillover/errors.hpp"
#include "spillover/normal.hpp"
#include "spillover/quadrature.hpp"

namespace spillover {

namespace {

constexpr double kSameTol = 1e-12;

bool same(double a, double b) { return std::fabs(a - b) <= kSameTol; }

double guarded_ratio(double num, double den) {
    if (!(std::fabs(den) >= kRatioGuard)) {
        throw NumericalError("zero denominator: no subpopulation mass shifted (|den| = " + std::to_string(std::fabs(den)) +
                             ")");
    }
    return num / den;
}

// Score -> uniform, kept strictly inside (0,1) so quantile-based surfaces stay finite.
double to_unit(double t) {
    static const double top = std::nextafter(1.0, 0.0);
    return std::clamp(std_normal_cdf(t), 1e-300, top);
}

struct Rect {
    double p0lo, p0hi, p1lo, p1hi;
    const MomentPoint *ll, *lh, *hl, *hh;  // (p0, p1) corners: lo/hi
};

Rect rectangle_of(const MomentQuad& q) {
    if (q.points.size() != 4) throw ConfigError("non-rectangular vertex set: need exactly four propensity pairs");
    std::vector<double> xs, ys;
    for (const auto& p : q.points) {
        if (std::none_of(xs.begin(), xs.end(), [&](double v) { return same(v, p.p0); })) xs.push_back(p.p0);
        if (std::none_of(ys.begin(), ys.end(), [&](double v) { return same(v, p.p1); })) ys.push_back(p.p1);
    }
    if (xs.size() != 2 || ys.size() != 2) {
        throw ConfigError("non-rectangular vertex set: need two distinct own and two distinct peer propensities");
    }
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    Rect r{xs[0], xs[1], ys[0], ys[1], nullptr, nullptr, nullptr, nullptr};
    r.ll = &q.at(xs[0], ys[0]);
    r.lh = &q.at(xs[0], ys[1]);
    r.hl = &q.at(xs[1], ys[0]);
    r.hh = &q.at(xs[1], ys[1]);
    return r;
}

double rect_denominator(const Rect& r) { return (r.hh->C - r.hl->C) - (r.lh->C - r.ll->C); }

}  // namespace

const MomentPoint& MomentQuad::at(double p0, double p1) const {
    const MomentPoint* found = nullptr;
    for (const auto& p : points) {
        if (same(p.p0, p0) && same(p.p1, p1)) {
            if (found) throw ConfigError("non-rectangular vertex set: duplicate propensity pair");
            found = &p;
        }
    }
    if (!found) throw ConfigError("non-rectangular vertex set: missing vertex");
    return *found;
}

double lacse_fixed_own(int d, const MomentPoint& base, const MomentPoint& shifted) {
    check_binary(d, "d");
    if (!same(base.p0, shifted.p0)) throw ConfigError("own propensity must be the same at both pairs");
    if (!(shifted.p1 > base.p1)) throw ConfigError("no variation: the peer propensity must increase");
    const double dC = shifted.C - base.C;
    const double den = d == 1 ? dC : (shifted.p1 - base.p1) - dC;
    return guarded_ratio(shifted.mu_own[d] - base.mu_own[d], den);
}

double lacde_fixed_peer(int d, const MomentPoint& base, const MomentPoint& shifted) {
    check_binary(d, "d");
    if (!same(base.p1, shifted.p1)) throw ConfigError("peer propensity must be the same at both pairs");
    if (!(shifted.p0 > base.p0)) throw ConfigError("no variation: the own propensity must increase");
    const double dC = shifted.C - base.C;
    const double den = d == 1 ? dC : (shifted.p0 - base.p0) - dC;
    return guarded_ratio(shifted.mu_peer[d] - base.mu_peer[d], den);
}

double lacse_rectangle(int d, const MomentQuad& q) {
    check_binary(d, "d");
    const Rect r = rectangle_of(q);
    const double num = (r.hh->mu_own[d] - r.hl->mu_own[d]) - (r.lh->mu_own[d] - r.ll->mu_own[d]);
    return (d == 1 ? 1.0 : -1.0) * guarded_ratio(num, rect_denominator(r));
}

double lacde_rectangle(int d, const MomentQuad& q) {
    check_binary(d, "d");
    const Rect r = rectangle_of(q);
    const double num = (r.hh->mu_peer[d] - r.hl->mu_peer[d]) - (r.lh->mu_peer[d] - r.ll->mu_peer[d]);
    return (d == 1 ? 1.0 : -1.0) * guarded_ratio(num, rect_denominator(r));
}

MomentPoint model_implied_moments(const CopulaSpec& copula, const MtrFunction& mtr, double p0, double p1, int order) {
    if (!(p0 > 0.0 && p0 < 1.0 && p1 > 0.0 && p1 < 1.0)) throw ConfigError("propensities must lie in (0,1)");
    const double rho = copula.rho;
    const double sigma = std::sqrt(1.0 - rho * rho);
    const double a = std_normal_quantile(p0), b = std_normal_quantile(p1);
    const auto& gl = cached_gauss_legendre(order);

    // Integral over {t0 in own range} x {t1 in peer range} of m * phi_rho, with the
    // inner integral in the standardized conditional score z = (t1 - rho t0)/sigma.
    auto quadrant = [&](int d, int dp) {
        const double lo0 = d == 1 ? -kTailClip : std::max(a, -kTailClip);
        const double hi0 = d == 1 ? std::min(a, kTailClip) : kTailClip;
        if (!(hi0 > lo0)) return 0.0;
        const double mid0 = 0.5 * (lo0 + hi0);
        double total = 0.0;
        for (auto [plo, phi] : {std::pair{lo0, mid0}, std::pair{mid0, hi0}}) {
            const double c0 = 0.5 * (plo + phi), h0 = 0.5 * (phi - plo);
            for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
                const double t0 = c0 + h0 * gl.nodes[i];
                const double zb = (b - rho * t0) / sigma;
                const double zlo = dp == 1 ? -kTailClip : std::max(zb, -kTailClip);
                const double zhi = dp == 1 ? std::min(zb, kTailClip) : kTailClip;
                if (!(zhi > zlo)) continue;
                const double c1 = 0.5 * (zlo + zhi), h1 = 0.5 * (zhi - zlo);
                const double v0 = to_unit(t0);
                double inner = 0.0;
                for (std::size_t j = 0; j < gl.nodes.size(); ++j) {
                    const double z = c1 + h1 * gl.nodes[j];
                    inner += gl.weights[j] * std_normal_pdf(z) * mtr(d, dp, v0, to_unit(rho * t0 + sigma * z));
                }
                total += h0 * gl.weights[i] * std_normal_pdf(t0) * h1 * inner;
            }
        }
        return total;
    };

    std::array<std::array<double, 2>, 2> I{};
    for (int d = 0; d < 2; ++d)
        for (int dp = 0; dp < 2; ++dp) I[d][dp] = quadrant(d, dp);
    MomentPoint m;
    m.p0 = p0;
    m.p1 = p1;
    for (int d = 0; d < 2; ++d) {
        m.mu_own[d] = I[d][0] + I[d][1];
        m.mu_peer[d] = I[0][d] + I[1][d];
    }
    m.C = copula.cdf(p0, p1);
    return m;
}

MomentPoint kernel_moments(const Dataset& data, const std::vector<PropensityPair>& props, int unit, double p0,
                           double p1, double h, KernelType kernel) {
    check_unit(unit);
    if (props.size() != data.size()) throw DataError("propensities and dataset differ in length");
    const int peer = peer_of(unit);
    std::vector<Point2> pts(data.size());
    std::vector<std::vector<double>> resp(5, std::vector<double>(data.size()));
    for (std::size_t g = 0; g < data.size(); ++g) {
        const auto& gr = data.groups[g];
        pts[g] = {own_p(props[g], unit), peer_p(props[g], unit)};
        const double y = gr.y[unit];
        resp[0][g] = y * (gr.d[unit] == 0);
        resp[1][g] = y * (gr.d[unit] == 1);
        resp[2][g] = y * (gr.d[peer] == 0);
        resp[3][g] = y * (gr.d[peer] == 1);
        resp[4][g] = gr.d[unit] * gr.d[peer];
    }
    auto mean_at = [&](int k) { return local_cubic_fit(pts, resp[k], {p0, p1}, h, kernel).mean(); };
    MomentPoint m;
    m.p0 = p0;
    m.p1 = p1;
    m.mu_own = {mean_at(0), mean_at(1)};
    m.mu_peer = {mean_at(2), mean_at(3)};
    m.C = mean_at(4);
    return m;
}

double acse_acde(const EffectSurface& surface, const CopulaSpec& copula, int order) {
    const auto& gh = cached_gauss_hermite(order);
    const double rho = copula.rho, sigma = std::sqrt(1.0 - rho * rho);
    const double pi = std::acos(-1.0);
    double total = 0.0;
    for (std::size_t i = 0; i < gh.nodes.size(); ++i) {
        const double t0 = std::sqrt(2.0) * gh.nodes[i];
        const double v0 = to_unit(t0);
        double inner = 0.0;
        for (std::size_t j = 0; j < gh.nodes.size(); ++j) {
            const double t1 = rho * t0 + sigma * std::sqrt(2.0) * gh.nodes[j];
            inner += gh.weights[j] * surface(v0, to_unit(t1));
        }
        total += gh.weights[i] * inner;
    }
    return total / pi;
}

double acse_acde(const EffectSurface& surface, const std::function<double(double, double)>& density, int order) {
    constexpr double lo = 1e-4, hi = 1.0 - 1e-4;
    const auto& gl = cached_gauss_legendre(order);
    const double c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
    // The clipped border holds a little density mass; dividing by the mass
    // actually integrated keeps constant surfaces exact.
    double num = 0.0, mass = 0.0;
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
        const double v0 = c + h * gl.nodes[i];
        for (std::size_t j = 0; j < gl.nodes.size(); ++j) {
            const double v1 = c + h * gl.nodes[j];
            const double w = gl.weights[i] * gl.weights[j] * density(v0, v1);
            num += w * surface(v0, v1);
            mass += w;
        }
    }
    if (!(mass > 0.0)) throw NumericalError("density has no mass on the clipped unit square");
    return num / mass;
}

ComplierEffects complier_effects(const EffectSurface& mcse0, const EffectSurface& mcde0, const CopulaSpec& copula,
                                 double bound_own, double bound_peer, int order) {
    if (!(bound_own > 0.0 && bound_own < 1.0 && bound_peer > 0.0 && bound_peer < 1.0)) {
        throw ConfigError("complier bounds must lie in (0,1)");
    }
    const auto& gl = cached_gauss_legendre(order);
    const auto& gh = cached_gauss_hermite(order);
    const double rho = copula.rho, sigma = std::sqrt(1.0 - rho * rho);
    const double sqrt_pi = std::sqrt(std::acos(-1.0));

    // Strip {outer score <= Phi^-1(bound)}; the other score is integrated from
    // its conditional normal. `own_outer` says which coordinate is bounded.
    auto strip = [&](const EffectSurface& s, double bound, bool own_outer, double& mass) {
        const double hi = std::min(std_normal_quantile(bound), kTailClip);
        const double lo = -kTailClip;
        const double mid = 0.5 * (lo + hi);
        double num = 0.0;
        mass = 0.0;
        for (auto [plo, phi] : {std::pair{lo, mid}, std::pair{mid, hi}}) {
            const double c = 0.5 * (plo + phi), h = 0.5 * (phi - plo);
            for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
                const double t = c + h * gl.nodes[i];
                const double w = h * gl.weights[i] * std_normal_pdf(t);
                const double vt = to_unit(t);
                double inner = 0.0;
                for (std::size_t j = 0; j < gh.nodes.size(); ++j) {
                    const double u = to_unit(rho * t + sigma * std::sqrt(2.0) * gh.nodes[j]);
                    inner += gh.weights[j] * (own_outer ? s(vt, u) : s(u, vt));
                }
                num += w * inner / sqrt_pi;
                mass += w;
            }
        }
        if (!(mass > kRatioGuard)) throw NumericalError("zero strip mass");
        return num / mass;
    };

    ComplierEffects out;
    out.spillover = strip(mcse0, bound_peer, false, out.shares[0]);
    out.direct = strip(mcde0, bound_own, true, out.shares[1]);
    return out;
}

}  // namespace spillover
