// Acceptance checks, one PASS/FAIL line per criterion.
//
//   acceptance --criterion N     run one criterion (1..9)
//   acceptance                   run all of them
//   acceptance --full            criterion 1 at R=500, B=200 and the +-0.03 band
//
// Oracles are written out here from the design constants rather than taken
// from the library's closed-form helpers.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "spillover/gaussian_copula.hpp"
#include "spillover/inference.hpp"
#include "spillover/local_effects.hpp"
#include "spillover/local_poly.hpp"
#include "spillover/mtr_parametric.hpp"
#include "spillover/normal.hpp"
#include "spillover/parallel.hpp"
#include "spillover/pipeline.hpp"
#include "spillover/probit.hpp"
#include "spillover/prte.hpp"
#include "spillover/quadrature.hpp"
#include "spillover/semiparametric.hpp"
#include "spillover/simulation.hpp"

using namespace spillover;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;
    std::string failed;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            failed += (failed.empty() ? "" : "; ") + what;
        }
    }

    std::string text() const { return failed.empty() ? detail.str() : detail.str() + "  [failed: " + failed + "]"; }
};

// Design constants of the default DGP, member 0, in normal scores:
// m(d, d') = c[a] + 0.25 + 2 t_own + peer[a] t_peer - t_own t_peer.
constexpr std::array<double, 4> kIntercept{2.0, 3.0, 3.0, 1.0};
constexpr std::array<double, 4> kPeer{0.0, 0.0, 1.0, 1.0};

double design_outcome(int d, int dp, double t0, double t1, double u) {
    const auto a = static_cast<std::size_t>(2 * d + dp);
    return kIntercept[a] + 0.5 * u + 2.0 * t0 + kPeer[a] * t1 - t0 * t1;
}

// MCSE(1) = -2, MCSE(0) = 1, MCDE(1) = -2 + t_peer, MCDE(0) = 1 + t_peer.
double oracle_mcse(int d) { return d == 1 ? -2.0 : 1.0; }
double oracle_mcde(int d, double p_peer) { return (d == 1 ? -2.0 : 1.0) + oracle::Phi_inv(p_peer); }

std::vector<PropensityPair> true_props(const DgpConfig& cfg, const Dataset& data) {
    std::vector<PropensityPair> p(data.size());
    for (std::size_t g = 0; g < data.size(); ++g) {
        const std::array<double, 2> z{data.groups[g].w[0][0], data.groups[g].w[1][0]};
        p[g] = {true_propensity(cfg, 0, z), true_propensity(cfg, 1, z)};
    }
    return p;
}

std::vector<Point2> interior_grid() {
    std::vector<Point2> grid;
    for (double a : {0.3, 0.5, 0.7}) {
        for (double b : {0.3, 0.5, 0.7}) grid.push_back({a, b});
    }
    return grid;
}

double gaussian_copula_density(double u, double v, double rho) {
    const double a = oracle::Phi_inv(u), b = oracle::Phi_inv(v), s = 1.0 - rho * rho;
    return std::exp(-(rho * rho * (a * a + b * b) - 2.0 * rho * a * b) / (2.0 * s)) / std::sqrt(s);
}

MtrSet design_set() {
    const DgpConfig cfg;
    MtrSet set;
    for (int a = 0; a < 4; ++a) {
        MtrCoefficients c;
        c.d = a / 2;
        c.dprime = a % 2;
        c.alpha = true_alpha(cfg, a / 2, a % 2);
        set.put(c);
    }
    return set;
}

// ---------------------------------------------------------------------------

struct Panel {
    TargetKind kind;
    int d;
    std::array<double, 5> rates;
};

// Published coverage at G = 1000, points (0.3,0.7) ... (0.7,0.3).
const std::array<Panel, 4> kPanelA{{
    {TargetKind::MCDE, 1, {0.95, 0.952, 0.964, 0.972, 0.958}},
    {TargetKind::MCDE, 0, {0.96, 0.958, 0.962, 0.96, 0.958}},
    {TargetKind::MCSE, 1, {0.958, 0.962, 0.972, 0.966, 0.96}},
    {TargetKind::MCSE, 0, {0.964, 0.968, 0.956, 0.954, 0.942}},
}};
constexpr double kPanelARho = 0.948;

void criterion1(Outcome& out, bool full) {
    DgpConfig cfg;
    cfg.G = 1000;
    CoverageOptions opts;
    opts.R = full ? 500 : 100;
    opts.B = full ? 200 : 100;
    const double tol = full ? 0.03 : 0.07;
    const CoverageTable table = coverage_experiment(cfg, opts, 20240101);
    double worst = 0.0;
    for (const Panel& p : kPanelA) {
        for (std::size_t k = 0; k < 5; ++k) {
            const CoverageCell& c = table.cell(p.kind, p.d, k);
            const double gap = std::fabs(c.rate() - p.rates[k]);
            worst = std::max(worst, gap);
            out.require(gap <= tol, c.target.label() + " rate " + std::to_string(c.rate()));
        }
    }
    const double rho_gap = std::fabs(table.rho_cell().rate() - kPanelARho);
    worst = std::max(worst, rho_gap);
    out.require(rho_gap <= tol, "rho rate " + std::to_string(table.rho_cell().rate()));
    out.detail << "R=" << opts.R << " B=" << opts.B << " max |coverage - published| " << worst << " <= " << tol
               << "; failed replications " << table.failed_replications;
}

double rho_hat(std::size_t G, std::uint64_t seed) {
    DgpConfig cfg;
    cfg.G = G;
    cfg.seed = seed;
    const Dataset data = simulate_dataset(cfg);
    const ProbitModel m0 = fit_probit(data, 0, 1), m1 = fit_probit(data, 1, 1);
    return fit_rho(treatment_pairs(data), predict_pairs(m0, m1, data)).rho;
}

void criterion2(Outcome& out) {
    constexpr int draws = 100;
    std::array<double, 3> rmse{};
    const std::array<std::size_t, 3> sizes{1000, 5000, 10000};
    int within = 0;
    for (std::size_t s = 0; s < sizes.size(); ++s) {
        double ss = 0.0;
        for (int r = 0; r < draws; ++r) {
            const double err = rho_hat(sizes[s], 5000 + static_cast<std::uint64_t>(r)) - 0.2;
            ss += err * err;
            if (sizes[s] == 5000) within += std::fabs(err) <= 0.05;
        }
        rmse[s] = std::sqrt(ss / draws);
    }
    out.require(within >= 95, "draws within 0.05 at G=5000");
    out.require(rmse[0] > rmse[1] && rmse[1] > rmse[2], "RMSE not decreasing in G");
    out.detail << within << "/100 within 0.05 at G=5000 (need 95); RMSE by G 1000/5000/10000: " << rmse[0] << " / "
               << rmse[1] << " / " << rmse[2];
}

void criterion3(Outcome& out) {
    DgpConfig cfg;
    cfg.G = 10000;
    cfg.seed = 303;
    const ParametricFit fit = fit_parametric(simulate_dataset(cfg), ParametricConfig{});
    double worst_se = 0.0, worst_de = 0.0;
    for (const Point2& p : table1_points()) {
        const EvalPoint pt{p[0], p[1], {}};
        for (int d = 0; d < 2; ++d) {
            const double se_gap = std::fabs(mcse_parametric(fit.mtr, 0, d, pt) - oracle_mcse(d));
            const double de_gap = std::fabs(mcde_parametric(fit.mtr, 0, d, pt) - oracle_mcde(d, p[1]));
            worst_se = std::max(worst_se, se_gap);
            worst_de = std::max(worst_de, de_gap);
            out.require(se_gap <= 0.15, "MCSE d=" + std::to_string(d));
            out.require(de_gap <= 0.2, "MCDE d=" + std::to_string(d));
        }
    }
    out.detail << "max |MCSE - truth| " << worst_se << " <= 0.15; max |MCDE - truth| " << worst_de << " <= 0.2";
}

void criterion4(Outcome& out) {
    std::mt19937_64 gen(404);
    std::uniform_real_distribution<double> up(0.05, 0.95), ur(-0.8, 0.8);
    std::uniform_int_distribution<int> bit(0, 1), moment(0, 3);
    constexpr std::size_t N = 10000000;
    double worst_z = 0.0;
    for (int tuple = 0; tuple < 20; ++tuple) {
        const int j = moment(gen), d = bit(gen), dp = bit(gen);
        const double p0 = up(gen), p1 = up(gen), rho = ur(gen);
        const double a = oracle::Phi_inv(p0), b = oracle::Phi_inv(p1);
        oracle::BvnSampler draw(1000 + static_cast<std::uint64_t>(tuple), rho);
        double s = 0.0, s2 = 0.0;
        for (std::size_t k = 0; k < N; ++k) {
            const auto t = draw();
            const bool in = ((t[0] <= a) == (d == 1)) && ((t[1] <= b) == (dp == 1));
            if (!in) continue;
            const double g = j == 0 ? 1.0 : j == 1 ? t[0] : j == 2 ? t[1] : t[0] * t[1];
            s += g;
            s2 += g * g;
        }
        const double n = static_cast<double>(N), mean = s / n;
        const double se = std::sqrt((s2 / n - mean * mean) / n);
        const double z = std::fabs(truncated_moment(j, d, dp, p0, p1, rho) - mean) / se;
        worst_z = std::max(worst_z, z);
        out.require(z <= 3.0, "tuple " + std::to_string(tuple));
    }

    // Quadrants tile the plane: moments of (1, t0, t1, t0 t1) sum to (1, 0, 0, rho).
    double worst_add = 0.0;
    for (double rho : {-0.9, -0.5, 0.0, 0.2, 0.5, 0.9}) {
        for (double p0 : {0.01, 0.2, 0.5, 0.77, 0.99}) {
            for (double p1 : {0.03, 0.35, 0.5, 0.8, 0.97}) {
                std::array<double, 4> sum{};
                for (int d = 0; d < 2; ++d) {
                    for (int dp = 0; dp < 2; ++dp) {
                        const auto m = truncated_moments(d, dp, p0, p1, rho);
                        for (int j = 0; j < 4; ++j) sum[static_cast<std::size_t>(j)] += m[static_cast<std::size_t>(j)];
                    }
                }
                const std::array<double, 4> whole{1.0, 0.0, 0.0, rho};
                for (std::size_t j = 0; j < 4; ++j) worst_add = std::max(worst_add, std::fabs(sum[j] - whole[j]));
            }
        }
    }
    out.require(worst_add <= 2e-6, "quadrant additivity");
    out.detail << "max |quadrature - MC| / SE " << worst_z << " <= 3 over 20 tuples; additivity error " << worst_add
               << " <= 2e-6";
}

void criterion5(Outcome& out) {
    std::mt19937_64 gen(505);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Point2> pts(500);
    for (auto& p : pts) p = {u(gen), u(gen)};
    double worst_exact = 0.0;
    struct Cubic {
        std::function<double(double, double)> f;
        std::function<double(double, double)> cross;
    };
    const std::vector<Cubic> cubics{
        {[](double x, double y) { return x * y; }, [](double, double) { return 1.0; }},
        {[](double x, double y) { return 2.0 - x * x * x + 0.5 * y * y; }, [](double, double) { return 0.0; }},
        {[](double x, double y) { return 3.0 * x * x * y - x * y * y + 0.25 * x * y; },
         [](double x, double y) { return 6.0 * x - 2.0 * y + 0.25; }},
    };
    for (const Cubic& c : cubics) {
        std::vector<double> y;
        for (const auto& p : pts) y.push_back(c.f(p[0], p[1]));
        for (const Point2 t : {Point2{0.5, 0.5}, Point2{0.3, 0.7}, Point2{0.65, 0.35}}) {
            const double err = std::fabs(local_cubic_fit(pts, y, t, 0.35).cross_partial() - c.cross(t[0], t[1]));
            worst_exact = std::max(worst_exact, err);
        }
    }
    out.require(worst_exact <= 1e-8, "cubic exactness");

    DgpConfig cfg;
    cfg.G = 10000;
    cfg.seed = 506;
    const Dataset data = simulate_dataset(cfg);
    double worst_density = 0.0;
    for (const auto& e : estimate_copula_density_semiparam(data, true_props(cfg, data), interior_grid(), 0.5)) {
        const double gap = e.ok ? std::fabs(e.value - gaussian_copula_density(e.point[0], e.point[1], 0.2)) : 1e9;
        worst_density = std::max(worst_density, gap);
    }
    out.require(worst_density <= 0.15, "copula density grid");
    out.detail << "cubic cross-partial error " << worst_exact << " <= 1e-8; max |density - copula| " << worst_density
               << " <= 0.15 (h=0.5)";
}

MomentQuad quad_of(const std::function<MomentPoint(double, double)>& f, double p0, double p0b, double p1,
                   double p1b) {
    MomentQuad q;
    q.points = {f(p0, p1), f(p0, p1b), f(p0b, p1), f(p0b, p1b)};
    return q;
}

void criterion6(Outcome& out) {
    const double c = -1.3;
    // Flat surfaces whose direct and spillover contrasts all equal c.
    const MtrFunction flat = [c](int d, int dp, double, double) { return 0.8 + c * (d + dp); };
    double worst = 0.0;
    for (double rho : {-0.5, 0.0, 0.2, 0.6}) {
        const CopulaSpec cop{rho};
        auto f = [&](double p0, double p1) { return model_implied_moments(cop, flat, p0, p1); };
        for (const auto& v : std::vector<std::array<double, 4>>{{0.3, 0.6, 0.4, 0.7}, {0.15, 0.8, 0.25, 0.9}}) {
            const MomentQuad q = quad_of(f, v[0], v[1], v[2], v[3]);
            for (int d = 0; d < 2; ++d) {
                for (double r : {lacse_rectangle(d, q), lacde_rectangle(d, q),
                                 lacse_fixed_own(d, f(v[0], v[2]), f(v[0], v[3])),
                                 lacde_fixed_peer(d, f(v[0], v[2]), f(v[1], v[2]))}) {
                    worst = std::max(worst, std::fabs(r - c));
                }
            }
        }
    }
    out.require(worst <= 1e-6, "constant MTR ratios");

    // Brute-force moments: 10^6 structural draws shared across the four vertices.
    constexpr std::size_t N = 1000000;
    oracle::BvnSampler draw(606, 0.2);
    std::mt19937_64 gen(607);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<std::array<double, 3>> t(N);
    for (auto& x : t) {
        const auto v = draw();
        x = {v[0], v[1], unif(gen)};
    }
    auto sim = [&](double p0, double p1) {
        const double a = oracle::Phi_inv(p0), b = oracle::Phi_inv(p1);
        MomentPoint m;
        m.p0 = p0;
        m.p1 = p1;
        for (const auto& x : t) {
            const int d0 = x[0] <= a, d1 = x[1] <= b;
            const double y = design_outcome(d0, d1, x[0], x[1], x[2]);
            m.mu_own[static_cast<std::size_t>(d0)] += y;
            m.mu_peer[static_cast<std::size_t>(d1)] += y;
            m.C += d0 * d1;
        }
        for (auto* v : {&m.mu_own[0], &m.mu_own[1], &m.mu_peer[0], &m.mu_peer[1], &m.C}) *v /= static_cast<double>(N);
        return m;
    };
    const double rect = lacse_rectangle(1, quad_of(sim, 0.3, 0.6, 0.4, 0.7));
    out.require(std::fabs(rect + 2.0) <= 0.05, "brute-force rectangle LACSE(1)");
    out.detail << "constant-MTR ratio error " << worst << " <= 1e-6; brute-force LACSE(1) " << rect
               << " vs -2 +- 0.05";
}

void criterion7(Outcome& out) {
    DgpConfig cfg;
    cfg.G = 1000000;
    cfg.seed = 707;
    std::vector<Latents> lat;
    const Dataset data = simulate_dataset(cfg, Exec::Parallel, &lat);
    const double eps = 0.1, rho = cfg.rho();

    // Groups with room for the shift in both members.
    std::vector<PropensityPair> pairs;
    std::vector<std::size_t> idx;
    for (std::size_t g = 0; g < data.size(); ++g) {
        const std::array<double, 2> z{lat[g].z[0], lat[g].z[1]};
        const PropensityPair p{oracle::Phi(z[0] + 0.5 * z[1]), oracle::Phi(z[1] - 0.5 * z[0])};
        if (p.p0 + eps < 0.999 && p.p1 + eps < 0.999) {
            pairs.push_back(p);
            idx.push_back(g);
        }
    }

    const MtrSet set = design_set();
    EffectSurfaces surfaces;
    for (int d = 0; d < 2; ++d) {
        surfaces.mcse[static_cast<std::size_t>(d)] = mcse_surface(set, 0, d);
        surfaces.mcde[static_cast<std::size_t>(d)] = mcde_surface(set, 0, d);
    }
    const PrteResult r = prte(PolicySpec::absolute(eps), surfaces, CopulaSpec{rho}, pairs);

    // Same latent draws, thresholds moved to Phi^-1(p + eps).
    double s = 0.0, s2 = 0.0, m = 0.0, sdm = 0.0;
    std::vector<std::array<double, 2>> per(idx.size());
    int mismatched = 0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        const Latents& L = lat[idx[k]];
        const PropensityPair& p = pairs[k];
        const int d0 = L.v[0] <= oracle::Phi_inv(p.p0), d1 = L.v[1] <= oracle::Phi_inv(p.p1);
        mismatched += d0 != data.groups[idx[k]].d[0] || d1 != data.groups[idx[k]].d[1];
        const int e0 = L.v[0] <= oracle::Phi_inv(p.p0 + eps), e1 = L.v[1] <= oracle::Phi_inv(p.p1 + eps);
        const double diff = design_outcome(e0, e1, L.v[0], L.v[1], L.u) - design_outcome(d0, d1, L.v[0], L.v[1], L.u);
        const double moved = (d0 != e0 || d1 != e1) ? 1.0 : 0.0;
        per[k] = {diff, moved};
        s += diff;
        s2 += diff * diff;
        m += moved;
    }
    const double n = static_cast<double>(idx.size());
    const double mean = s / n, share = m / n;
    const double se_dy = std::sqrt((s2 / n - mean * mean) / n);
    const double prte_sim = mean / share;
    for (const auto& x : per) {
        const double psi = (x[0] - prte_sim * x[1]) / share;
        sdm += psi * psi;
    }
    const double se_prte = std::sqrt(sdm / n / n);
    out.require(mismatched == 0, "observed treatments disagree with the latent thresholds");
    out.require(std::fabs(r.delta_ey - mean) <= 2.0 * se_dy, "delta E[Y]");
    out.require(std::fabs(r.prte - prte_sim) <= 2.0 * se_prte, "PRTE");

    // Instrument shift on fitted probits: the four strata exhaust the sample.
    DgpConfig small;
    small.G = 5000;
    small.seed = 708;
    const Dataset sd = simulate_dataset(small);
    const ProbitModel m0 = fit_probit(sd, 0, 1), m1 = fit_probit(sd, 1, 1);
    const PrteResult c3 = prte(PolicySpec::instrument(0, 0.3), surfaces, CopulaSpec{rho}, predict_pairs(m0, m1, sd),
                               &sd, &m0, &m1);
    const double strata = c3.strata[0] + c3.strata[1] + c3.strata[2] + c3.strata[3];
    out.require(std::fabs(strata - 1.0) <= 1e-12, "instrument-shift strata");
    out.detail << "n=" << idx.size() << " delta E[Y] " << r.delta_ey << " vs " << mean << " (SE " << se_dy
               << "); PRTE " << r.prte << " vs " << prte_sim << " (SE " << se_prte << "); strata sum " << strata;
}

void criterion8(Outcome& out) {
    DgpConfig sutva = DgpConfig::sutva();
    sutva.G = 10000;
    sutva.seed = 808;
    const Dataset sd = simulate_dataset(sutva);
    const ParametricFit sf = fit_parametric(sd, ParametricConfig{});
    out.require(std::fabs(sf.copula.rho) <= 0.05, "SUTVA rho");
    double worst_mcse = 0.0;
    for (const Point2& p : interior_grid()) {
        for (int d = 0; d < 2; ++d) {
            worst_mcse = std::max(worst_mcse, std::fabs(mcse_parametric(sf.mtr, 0, d, {p[0], p[1], {}})));
        }
    }
    out.require(worst_mcse <= 0.2, "SUTVA MCSE surfaces");
    // Under the SUTVA variant m(1) - m(0) is the intercept gap 3 - 2.
    const NaiveMteModel sn = fit_naive_mte(sd, 0, 0.3);
    double worst_naive = 0.0;
    for (double p0 : {0.3, 0.4, 0.5, 0.6, 0.7}) worst_naive = std::max(worst_naive, std::fabs(evaluate_naive_mte(sn, p0) - 1.0));
    out.require(worst_naive <= 0.3, "SUTVA naive MTE");

    DgpConfig cfg;
    cfg.G = 10000;
    cfg.seed = 809;
    const Dataset data = simulate_dataset(cfg);
    const ParametricFit fit = fit_parametric(data, ParametricConfig{});
    std::vector<double> peers;
    for (const auto& p : fit.props) peers.push_back(p.p1);
    std::nth_element(peers.begin(), peers.begin() + static_cast<std::ptrdiff_t>(peers.size() / 2), peers.end());
    const double p1_med = peers[peers.size() / 2];

    const std::vector<double> grid{0.3, 0.4, 0.5, 0.6, 0.7};
    const NaiveMteModel full = fit_naive_mte(data, 0, 0.3);
    constexpr int B = 100;
    std::vector<std::vector<double>> reps(grid.size(), std::vector<double>(B));
    for_each_index(B, Exec::Parallel, [&](std::size_t b) {
        std::mt19937_64 gen(810 + b);
        std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
        Dataset boot;
        boot.layout = data.layout;
        boot.groups.resize(data.size());
        for (auto& g : boot.groups) g = data.groups[pick(gen)];
        const NaiveMteModel nm = fit_naive_mte(boot, 0, 0.3);
        for (std::size_t k = 0; k < grid.size(); ++k) reps[k][b] = evaluate_naive_mte(nm, grid[k]);
    });
    double best_ratio = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        double mean = 0.0, ss = 0.0;
        for (double r : reps[k]) mean += r;
        mean /= B;
        for (double r : reps[k]) ss += (r - mean) * (r - mean);
        const double se = std::sqrt(ss / (B - 1));
        const double gap = std::fabs(evaluate_naive_mte(full, grid[k]) - oracle_mcde(1, p1_med));
        best_ratio = std::max(best_ratio, gap / se);
    }
    out.require(best_ratio > 5.0, "spillover naive bias");
    out.detail << "SUTVA |rho| " << std::fabs(sf.copula.rho) << " <= 0.05, max |MCSE| " << worst_mcse
               << " <= 0.2, max |naive - MTE| " << worst_naive << " <= 0.3; spillover max gap/SE " << best_ratio
               << " > 5";
}

void criterion9(Outcome& out) {
    // Probit gradient against central differences.
    std::mt19937_64 gen(909);
    std::normal_distribution<double> n01(0.0, 1.0);
    Eigen::MatrixXd X(300, 4);
    Eigen::VectorXi d(300);
    for (int i = 0; i < 300; ++i) {
        X(i, 0) = 1.0;
        for (int j = 1; j < 4; ++j) X(i, j) = n01(gen);
        d(i) = n01(gen) + X(i, 1) - 0.5 * X(i, 2) > 0.0;
    }
    const Eigen::Vector4d theta(0.1, 0.7, -0.4, 0.2);
    const ProbitObjective obj = probit_objective(theta, X, d);
    Eigen::VectorXd fd(4);
    for (int j = 0; j < 4; ++j) {
        const double h = 1e-5;
        Eigen::VectorXd up = theta, dn = theta;
        up(j) += h;
        dn(j) -= h;
        fd(j) = (probit_objective(up, X, d).loglik - probit_objective(dn, X, d).loglik) / (2.0 * h);
    }
    const double grad_rel = (obj.gradient - fd).norm() / obj.gradient.norm();
    out.require(grad_rel <= 1e-6, "probit gradient");

    // Frechet bounds, 2-increasingness, quadrant sums.
    double frechet = 0.0, increasing = 0.0, quad = 0.0;
    for (double rho : {-0.9, -0.4, 0.0, 0.4, 0.9}) {
        for (int i = 1; i <= 20; ++i) {
            for (int j = 1; j <= 20; ++j) {
                const double u = i / 21.0, v = j / 21.0, c = copula(u, v, rho);
                frechet = std::max({frechet, std::max(u + v - 1.0, 0.0) - c, c - std::min(u, v)});
                if (i > 1 && j > 1) {
                    const double u0 = (i - 1) / 21.0, v0 = (j - 1) / 21.0;
                    const double mass = c - copula(u0, v, rho) - copula(u, v0, rho) + copula(u0, v0, rho);
                    increasing = std::max(increasing, -mass);
                }
                double total = 0.0;
                for (int a = 0; a < 2; ++a) {
                    for (int b = 0; b < 2; ++b) total += quadrant_probability(a, b, u, v, rho);
                }
                quad = std::max(quad, std::fabs(total - 1.0));
            }
        }
    }
    out.require(frechet <= 1e-12, "Frechet bounds");
    out.require(increasing <= 1e-12, "2-increasing");
    out.require(quad <= 1e-12, "quadrant sum");

    std::uniform_real_distribution<double> wide(-3.0, 4.0);
    bool trimmed_inside = true;
    for (int k = 0; k < 10000; ++k) {
        const double p = trim_propensity(wide(gen), 1e-3);
        trimmed_inside = trimmed_inside && p > 0.0 && p < 1.0;
    }
    for (double edge : {0.0, 1.0, -1e-300, 1.0 + 1e-16}) {
        const double p = trim_propensity(edge, 1e-3);
        trimmed_inside = trimmed_inside && p > 0.0 && p < 1.0;
    }
    out.require(trimmed_inside, "trimming");

    // Reruns under 1 and 4 threads and the serial reference.
    const int saved = current_threads();
    DgpConfig cfg;
    cfg.G = 3000;
    cfg.seed = 910;
    std::vector<Target> targets = table1_targets();
    targets.resize(3);
    auto run = [&](int threads, Exec exec) {
        set_threads(threads);
        const Dataset data = simulate_dataset(cfg, exec);
        const ParametricFit fit = fit_parametric(data, ParametricConfig{}, exec);
        const BootstrapResult boot = bootstrap(data, ParametricConfig{}, targets, 50, {0.95}, 911, exec);
        std::vector<double> v{fit.copula.rho};
        for (const auto& c : fit.mtr.all()) v.insert(v.end(), c.alpha.begin(), c.alpha.end());
        for (const auto& t : boot.targets) v.insert(v.end(), t.replicates.begin(), t.replicates.end());
        for (const auto& g : data.groups) v.insert(v.end(), g.y.begin(), g.y.end());
        return v;
    };
    const auto a = run(1, Exec::Parallel), b = run(4, Exec::Parallel), c = run(4, Exec::Serial);
    set_threads(saved);
    out.require(a == b && a == c, "thread bit-identity");
    out.detail << "gradient rel err " << grad_rel << "; Frechet " << frechet << ", 2-increasing " << increasing
               << ", quadrant sum " << quad << " (<= 1e-12); trims inside (0,1): " << (trimmed_inside ? "yes" : "no")
               << "; bit-identical across threads: " << (a == b && a == c ? "yes" : "no");
}

bool run_criterion(int n, bool full) {
    Outcome out;
    try {
        switch (n) {
            case 1: criterion1(out, full); break;
            case 2: criterion2(out); break;
            case 3: criterion3(out); break;
            case 4: criterion4(out); break;
            case 5: criterion5(out); break;
            case 6: criterion6(out); break;
            case 7: criterion7(out); break;
            case 8: criterion8(out); break;
            case 9: criterion9(out); break;
            default: out.require(false, "no such criterion");
        }
    } catch (const std::exception& e) {
        out.require(false, std::string("exception: ") + e.what());
    }
    std::printf("criterion %d: %s  %s\n", n, out.pass ? "PASS" : "FAIL", out.text().c_str());
    std::fflush(stdout);
    return out.pass;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance checks"};
    int criterion = 0;
    bool full = false;
    app.add_option("--criterion", criterion, "criterion number, 0 for all")->check(CLI::Range(0, 9));
    app.add_flag("--full", full, "full-scale coverage run");
    CLI11_PARSE(app, argc, argv);

    bool ok = true;
    if (criterion == 0) {
        for (int n = 1; n <= 9; ++n) ok = run_criterion(n, full) && ok;
    } else {
        ok = run_criterion(criterion, full);
    }
    return ok ? 0 : 1;
}
