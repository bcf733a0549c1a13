#include <doctest.h>

#include "oracles.hpp"
#include "spillover/errors.hpp"
#include "spillover/local_effects.hpp"
#include "spillover/mtr_parametric.hpp"
#include "spillover/simulation.hpp"

using namespace spillover;

namespace {

// Simulation-design MTRs for member 0 written out independently of the library:
// m(d, d') = c[a] + 2 t_own + peer[a] t_peer - t_own t_peer, a = 2d + d'.
constexpr std::array<double, 4> kIntercept{2.0, 3.0, 3.0, 1.0};
constexpr std::array<double, 4> kPeer{0.0, 0.0, 1.0, 1.0};

double design_mtr_scores(int d, int dp, double t0, double t1) {
    const auto a = static_cast<std::size_t>(2 * d + dp);
    return kIntercept[a] + 2.0 * t0 + kPeer[a] * t1 - t0 * t1;
}

MtrFunction design_mtr() {
    return [](int d, int dp, double v0, double v1) {
        return design_mtr_scores(d, dp, oracle::Phi_inv(v0), oracle::Phi_inv(v1));
    };
}

// Moments at a propensity pair from a fixed set of latent draws. Reusing the
// draws across pairs (common random numbers) keeps differences precise.
struct Draws {
    std::vector<std::array<double, 3>> t;  // (t_own, t_peer, u)
    Draws(std::size_t n, std::uint64_t seed, double rho) {
        oracle::BvnSampler s(seed, rho);
        std::mt19937_64 gen(seed + 1);
        std::normal_distribution<double> n01(0.0, 1.0);
        t.reserve(n);
        for (std::size_t k = 0; k < n; ++k) {
            const auto v = s();
            t.push_back({v[0], v[1], n01(gen)});
        }
    }
    MomentPoint at(double p0, double p1) const {
        const double a = oracle::Phi_inv(p0), b = oracle::Phi_inv(p1);
        MomentPoint m;
        m.p0 = p0;
        m.p1 = p1;
        for (const auto& x : t) {
            const int d0 = x[0] <= a, d1 = x[1] <= b;
            const double y = design_mtr_scores(d0, d1, x[0], x[1]) + 0.5 * x[2];
            m.mu_own[static_cast<std::size_t>(d0)] += y;
            m.mu_peer[static_cast<std::size_t>(d1)] += y;
            m.C += d0 * d1;
        }
        const double n = static_cast<double>(t.size());
        for (auto* v : {&m.mu_own[0], &m.mu_own[1], &m.mu_peer[0], &m.mu_peer[1], &m.C}) *v /= n;
        return m;
    }
};

MomentQuad quad_of(const std::function<MomentPoint(double, double)>& f, double p0, double p0b, double p1,
                   double p1b) {
    MomentQuad q;
    q.points = {f(p0, p1), f(p0, p1b), f(p0b, p1), f(p0b, p1b)};
    return q;
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

EffectSurface constant_surface(double c) {
    return {EffectKind::MCSE, 1, -1, 0, [c](const EvalPoint&) { return c; }};
}

}  // namespace

TEST_CASE("constant MTRs give the constant through every ratio") {
    // Flat in the latents, with every direct and spillover contrast equal to 2.75.
    const MtrFunction flat = [](int d, int dp, double, double) { return 0.4 + 2.75 * (d + dp); };
    for (double rho : {-0.4, 0.0, 0.2, 0.7}) {
        const CopulaSpec cop{rho};
        auto f = [&](double p0, double p1) { return model_implied_moments(cop, flat, p0, p1); };
        for (const auto& v : std::vector<std::array<double, 4>>{{0.3, 0.6, 0.4, 0.7}, {0.1, 0.85, 0.2, 0.25}}) {
            const MomentQuad q = quad_of(f, v[0], v[1], v[2], v[3]);
            for (int d = 0; d < 2; ++d) {
                CHECK(std::fabs(lacse_rectangle(d, q) - 2.75) <= 1e-6);
                CHECK(std::fabs(lacde_rectangle(d, q) - 2.75) <= 1e-6);
                CHECK(std::fabs(lacse_fixed_own(d, f(v[0], v[2]), f(v[0], v[3])) - 2.75) <= 1e-6);
                CHECK(std::fabs(lacde_fixed_peer(d, f(v[0], v[2]), f(v[1], v[2])) - 2.75) <= 1e-6);
            }
        }
    }
}

TEST_CASE("rectangle denominator is the copula mass of the rectangle") {
    const CopulaSpec cop{0.35};
    const MtrFunction zero = [](int, int, double, double) { return 0.0; };
    MomentQuad q = quad_of([&](double a, double b) { return model_implied_moments(cop, zero, a, b); }, 0.2, 0.55, 0.3,
                           0.8);
    for (auto& p : q.points) {
        if (p.p0 == 0.55 && p.p1 == 0.8) p.mu_own[1] = 1.0;
    }
    const double mass = oracle::bvn(oracle::Phi_inv(0.55), oracle::Phi_inv(0.8), 0.35) -
                        oracle::bvn(oracle::Phi_inv(0.55), oracle::Phi_inv(0.3), 0.35) -
                        oracle::bvn(oracle::Phi_inv(0.2), oracle::Phi_inv(0.8), 0.35) +
                        oracle::bvn(oracle::Phi_inv(0.2), oracle::Phi_inv(0.3), 0.35);
    CHECK(std::fabs(1.0 / lacse_rectangle(1, q) - mass) <= 1e-6);
}

TEST_CASE("sign factor of the rectangle ratio") {
    const CopulaSpec cop{0.2};
    MomentQuad q = quad_of([&](double a, double b) { return model_implied_moments(cop, design_mtr(), a, b); }, 0.3,
                           0.6, 0.4, 0.7);
    for (auto& p : q.points) p.mu_own[0] = -p.mu_own[1];
    CHECK(lacse_rectangle(0, q) == doctest::Approx(lacse_rectangle(1, q)).epsilon(1e-14));
}

TEST_CASE("ratio error and degenerate cases") {
    MomentPoint a, b;
    a.p0 = b.p0 = 0.4;
    a.p1 = 0.3;
    b.p1 = 0.6;
    a.C = 0.1;
    b.C = 0.2;
    a.mu_own = b.mu_own = {1.5, -0.5};
    CHECK(lacse_fixed_own(1, a, b) == 0.0);
    b.C = a.C + 1e-12;
    CHECK_THROWS_WITH_AS(lacse_fixed_own(1, a, b), doctest::Contains("zero denominator"), NumericalError);
    CHECK_THROWS_AS(lacse_fixed_own(1, b, a), ConfigError);

    MomentPoint c = a, e = a;
    e.p0 = 0.7;
    e.C = 0.25;
    CHECK(lacde_fixed_peer(1, c, e) == 0.0);
    CHECK_THROWS_AS(lacde_fixed_peer(1, c, c), ConfigError);

    const CopulaSpec cop{0.2};
    auto f = [&](double p0, double p1) { return model_implied_moments(cop, design_mtr(), p0, p1); };
    MomentQuad degenerate;
    degenerate.points = {f(0.3, 0.4), f(0.3, 0.7), f(0.3, 0.4), f(0.3, 0.7)};
    CHECK_THROWS_WITH_AS(lacse_rectangle(1, degenerate), doctest::Contains("non-rectangular"), ConfigError);
    MomentQuad three;
    three.points = {f(0.3, 0.4), f(0.3, 0.7), f(0.6, 0.4)};
    CHECK_THROWS_AS(lacde_rectangle(1, three), ConfigError);
}

TEST_CASE("brute-force moments on the simulation design") {
    const Draws draws(1000000, 71, 0.2);
    auto sim = [&](double p0, double p1) { return draws.at(p0, p1); };

    CHECK(std::fabs(lacse_fixed_own(1, sim(0.5, 0.4), sim(0.5, 0.7)) + 2.0) <= 0.05);
    CHECK(std::fabs(lacse_rectangle(1, quad_of(sim, 0.3, 0.6, 0.4, 0.7)) + 2.0) <= 0.05);

    // Direct oracle for LACDE(1) on (0.3, 0.5) -> (0.6, 0.5): the average of
    // MCDE(1) = -2 + t_peer over {t_own in (a, a'), t_peer <= b} under the
    // bivariate normal, by a midpoint rule in scores.
    const double a = oracle::Phi_inv(0.3), a2 = oracle::Phi_inv(0.6), b = oracle::Phi_inv(0.5), rho = 0.2;
    const double step = 0.002, pi = std::acos(-1.0);
    double num = 0.0, mass = 0.0;
    for (double t0 = a + step / 2; t0 < a2; t0 += step) {
        for (double t1 = -8.0 + step / 2; t1 < b; t1 += step) {
            const double dens = std::exp(-(t0 * t0 - 2 * rho * t0 * t1 + t1 * t1) / (2 * (1 - rho * rho))) /
                                (2 * pi * std::sqrt(1 - rho * rho));
            num += (-2.0 + t1) * dens;
            mass += dens;
        }
    }
    const double direct = num / mass;
    CHECK(std::fabs(lacde_fixed_peer(1, sim(0.3, 0.5), sim(0.6, 0.5)) - direct) <= 0.05);

    const CopulaSpec cop{rho};
    auto model = [&](double p0, double p1) { return model_implied_moments(cop, design_mtr(), p0, p1); };
    CHECK(std::fabs(lacde_fixed_peer(1, model(0.3, 0.5), model(0.6, 0.5)) - direct) <= 1e-4);
    CHECK(std::fabs(lacse_rectangle(1, quad_of(model, 0.3, 0.6, 0.4, 0.7)) + 2.0) <= 1e-6);
    CHECK(std::fabs(lacse_rectangle(0, quad_of(model, 0.3, 0.6, 0.4, 0.7)) - 1.0) <= 1e-6);
}

TEST_CASE("kernel moments are linear in the response") {
    DgpConfig cfg;
    cfg.G = 3000;
    cfg.seed = 12;
    Dataset data = simulate_dataset(cfg);
    for (auto& g : data.groups) g.y = {1.0, 1.0};
    std::vector<PropensityPair> props(data.size());
    for (std::size_t g = 0; g < data.size(); ++g) {
        const std::array<double, 2> z{data.groups[g].w[0][0], data.groups[g].w[1][0]};
        props[g] = {true_propensity(cfg, 0, z), true_propensity(cfg, 1, z)};
    }
    const MomentPoint m = kernel_moments(data, props, 0, 0.45, 0.55, 0.3);
    CHECK(std::fabs(m.mu_own[0] + m.mu_own[1] - 1.0) <= 1e-10);
    CHECK(std::fabs(m.mu_peer[0] + m.mu_peer[1] - 1.0) <= 1e-10);
    CHECK(std::fabs(m.C - copula(0.45, 0.55, 0.2)) <= 0.1);
}

TEST_CASE("ACSE and ACDE") {
    const CopulaSpec cop{0.2};
    const std::function<double(double, double)> dens = [](double v0, double v1) {
        return copula_density(v0, v1, 0.2);
    };
    CHECK(std::fabs(acse_acde(constant_surface(3.3), cop) - 3.3) <= 1e-3);
    CHECK(std::fabs(acse_acde(constant_surface(3.3), dens) - 3.3) <= 1e-3);

    const MtrSet set = design_set();
    CHECK(std::fabs(acse_acde(mcse_surface(set, 0, 1), cop) + 2.0) <= 1e-3);
    CHECK(std::fabs(acse_acde(mcse_surface(set, 0, 0), cop) - 1.0) <= 1e-3);
    CHECK(std::fabs(acse_acde(mcde_surface(set, 0, 1), cop) + 2.0) <= 1e-3);

    const EffectSurface s1 = mcde_surface(set, 0, 1), s2 = mcde_surface(set, 0, 0);
    const EffectSurface combo{EffectKind::MCDE, 1, -1, 0,
                              [&](const EvalPoint& e) { return 1.7 * s1(e) - 0.4 * s2(e); }};
    CHECK(std::fabs(acse_acde(combo, cop) - (1.7 * acse_acde(s1, cop) - 0.4 * acse_acde(s2, cop))) <= 1e-8);
    CHECK(std::fabs(acse_acde(combo, dens) - (1.7 * acse_acde(s1, dens) - 0.4 * acse_acde(s2, dens))) <= 1e-8);
}

TEST_CASE("complier effects") {
    const MtrSet set = design_set();
    const CopulaSpec indep{0.0};
    const ComplierEffects one = complier_effects(constant_surface(1.0), constant_surface(5.0), indep, 0.7, 0.4);
    CHECK(std::fabs(one.spillover - 1.0) <= 1e-9);
    CHECK(std::fabs(one.direct - 5.0) <= 1e-9);
    CHECK(std::fabs(one.shares[0] - 0.4) <= 1e-4);
    CHECK(std::fabs(one.shares[1] - 0.7) <= 1e-4);

    const ComplierEffects ce =
        complier_effects(mcse_surface(set, 0, 0), mcde_surface(set, 0, 0), CopulaSpec{0.2}, 0.5, 0.5);
    // Monte Carlo over {t_own <= 0}: MCDE(0) = 1 + t_peer.
    oracle::BvnSampler s(91, 0.2);
    double sum = 0.0;
    std::size_t hits = 0;
    for (int k = 0; k < 1000000; ++k) {
        const auto t = s();
        if (t[0] <= 0.0) {
            sum += 1.0 + t[1];
            ++hits;
        }
    }
    CHECK(std::fabs(ce.direct - sum / static_cast<double>(hits)) <= 0.02);
    CHECK(ce.direct == doctest::Approx(1.0 - 0.2 * oracle::phi(0.0) / 0.5).epsilon(1e-6));
    CHECK(std::fabs(ce.spillover - 1.0) <= 1e-6);

    CHECK_THROWS_AS(complier_effects(constant_surface(1.0), constant_surface(1.0), indep, 0.0, 0.5), ConfigError);
}
