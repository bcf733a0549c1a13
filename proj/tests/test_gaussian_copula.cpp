#include <doctest.h>

#include "oracles.hpp"
#include "spillover/errors.hpp"
#include "spillover/gaussian_copula.hpp"
#include "spillover/normal.hpp"
#include "spillover/pipeline.hpp"
#include "spillover/simulation.hpp"

using namespace spillover;

TEST_CASE("standard normal cdf and quantile against erfc and Boost") {
    CHECK(std_normal_cdf(0.0) == 0.5);
    CHECK(std_normal_quantile(0.5) == 0.0);
    CHECK(std_normal_cdf(1.959964) == doctest::Approx(0.975).epsilon(1e-7));
    for (double x = -12.0; x <= 8.0; x += 0.137) {
        CHECK(std::fabs(std_normal_cdf(x) - oracle::Phi(x)) <= 1e-12);
    }
    for (double u : {1e-12, 1e-8, 1e-4, 0.01, 0.2, 0.5, 0.73, 0.99, 1 - 1e-6, 1 - 1e-10}) {
        CHECK(std::fabs(std_normal_quantile(u) - oracle::Phi_inv(u)) <= 1e-10 * std::max(1.0, std::fabs(oracle::Phi_inv(u))));
    }
    CHECK_THROWS_AS(std_normal_quantile(0.0), ConfigError);
    CHECK_THROWS_AS(std_normal_quantile(1.0), ConfigError);
}

TEST_CASE("bivariate normal cdf against Owen's T") {
    CHECK(bvn_cdf(0, 0, 0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(std::fabs(bvn_cdf(0, 0, 0.2) - 0.2820471) < 1e-7);
    CHECK(std::fabs(bvn_cdf(8, 8, 0.5) - 1.0) < 1e-7);
    CHECK_THROWS_AS(bvn_cdf(0, 0, 1.0), ConfigError);
    double worst = 0.0;
    for (double rho : {-0.95, -0.6, -0.2, 0.0, 0.3, 0.7, 0.95}) {
        for (double a = -4.0; a <= 4.0; a += 0.7) {
            for (double b = -4.0; b <= 4.0; b += 0.9) {
                worst = std::max(worst, std::fabs(bvn_cdf(a, b, rho) - oracle::bvn(a, b, rho)));
            }
        }
    }
    CHECK(worst <= 1e-7);
}

TEST_CASE("BvnBatch agrees with the adaptive routine") {
    for (double rho : {-0.9, -0.3, 0.2, 0.85, 0.97}) {
        const BvnBatch batch(rho);
        for (double a = -3.0; a <= 3.0; a += 0.5) {
            for (double b = -3.0; b <= 3.0; b += 0.75) CHECK(std::fabs(batch(a, b) - bvn_cdf(a, b, rho)) <= 1e-10);
        }
    }
}

TEST_CASE("copula examples") {
    for (double v : {0.1, 0.4, 0.77}) CHECK(std::fabs(copula(v, 0.999999, 0.0) - v) < 1e-5);
    CHECK(std::fabs(copula(0.5, 0.5, 0.2) - 0.2820471) < 1e-7);
    for (double v0 : {0.05, 0.3, 0.9}) {
        for (double v1 : {0.2, 0.5, 0.99}) CHECK(copula_density(v0, v1, 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK_THROWS_AS(copula(0.0, 0.5, 0.2), ConfigError);
    CHECK_THROWS_AS(copula_density(0.5, 1.0, 0.2), ConfigError);
    for (double v0 : {0.1, 0.6}) {
        for (double v1 : {0.3, 0.85}) {
            const double t0 = oracle::Phi_inv(v0), t1 = oracle::Phi_inv(v1), r = 0.4;
            const double expected = std::exp(-(r * r * (t0 * t0 + t1 * t1) - 2 * r * t0 * t1) / (2 * (1 - r * r))) /
                                    std::sqrt(1 - r * r);
            CHECK(copula_density(v0, v1, r) == doctest::Approx(expected).epsilon(1e-10));
        }
    }
}

TEST_CASE("quadrant probabilities") {
    CHECK(std::fabs(quadrant_probability(1, 1, 0.5, 0.5, 0.2) - 0.2820471) < 1e-7);
    CHECK(std::fabs(quadrant_probability(1, 0, 0.5, 0.5, 0.2) - 0.2179529) < 1e-7);
    for (double rho : {-0.8, 0.0, 0.2, 0.6}) {
        for (double p0 : {0.05, 0.3, 0.5, 0.92}) {
            for (double p1 : {0.1, 0.45, 0.88}) {
                double s = 0.0;
                for (int d = 0; d < 2; ++d) {
                    for (int dp = 0; dp < 2; ++dp) {
                        const double q = quadrant_probability(d, dp, p0, p1, rho);
                        CHECK(q >= 0.0);
                        s += q;
                    }
                }
                CHECK(std::fabs(s - 1.0) <= 1e-12);
                // (1,0) means member 0 treated and member 1 not.
                CHECK(quadrant_probability(1, 0, p0, p1, rho) == doctest::Approx(p0 - copula(p0, p1, rho)));
            }
        }
    }
}

TEST_CASE("copula Frechet bounds and 2-increasingness on a 20x20 grid") {
    std::vector<double> v(20);
    for (int k = 0; k < 20; ++k) v[static_cast<std::size_t>(k)] = (k + 0.5) / 20.0;
    for (double rho : {-0.9, -0.4, 0.0, 0.2, 0.9}) {
        for (std::size_t i = 0; i < 20; ++i) {
            for (std::size_t j = 0; j < 20; ++j) {
                const double c = copula(v[i], v[j], rho);
                CHECK(c >= std::max(v[i] + v[j] - 1.0, 0.0) - 1e-12);
                CHECK(c <= std::min(v[i], v[j]) + 1e-12);
                if (i + 1 < 20 && j + 1 < 20) {
                    const double mass = copula(v[i + 1], v[j + 1], rho) - copula(v[i + 1], v[j], rho) -
                                        copula(v[i], v[j + 1], rho) + c;
                    CHECK(mass >= -1e-12);
                    CHECK(copula(v[i + 1], v[j], rho) >= c - 1e-12);
                }
            }
        }
    }
}

TEST_CASE("copula density integrates to one") {
    // Trapezoid in normal scores: c(Phi(a), Phi(b)) phi(a) phi(b) is the bivariate normal density.
    for (double rho : {-0.5, 0.2, 0.8}) {
        const double h = 0.02;
        double total = 0.0;
        for (double a = -8.0; a <= 8.0 + 1e-12; a += h) {
            for (double b = -8.0; b <= 8.0 + 1e-12; b += h) {
                total += copula_density_scores(a, b, rho) * oracle::phi(a) * oracle::phi(b);
            }
        }
        CHECK(std::fabs(total * h * h - 1.0) <= 1e-4);
    }
}

TEST_CASE("fit_rho examples") {
    std::vector<TreatmentPair> d;
    std::vector<PropensityPair> p;
    for (int k = 0; k < 400; ++k) {
        d.push_back({k % 2, (k / 2) % 2});
        p.push_back({0.5, 0.5});
    }
    const CopulaSpec indep = fit_rho(d, p);
    CHECK(std::fabs(indep.rho) <= 1e-4);
    CHECK_FALSE(indep.boundary_warning);

    std::vector<TreatmentPair> all11(300, TreatmentPair{1, 1});
    std::vector<PropensityPair> half(300, PropensityPair{0.5, 0.5});
    const CopulaSpec edge = fit_rho(all11, half, 0.9);
    CHECK(edge.rho == doctest::Approx(0.9).epsilon(1e-6));
    CHECK(edge.boundary_warning);
}

TEST_CASE("fit_rho on the simulation design") {
    DgpConfig cfg;
    cfg.G = 5000;
    cfg.seed = 99;
    const Dataset data = simulate_dataset(cfg);
    ParametricConfig pc;
    const ParametricFit fit = fit_parametric(data, pc);
    CHECK(fit.copula.rho >= 0.15);
    CHECK(fit.copula.rho <= 0.25);
    const auto pairs = treatment_pairs(data);
    for (int k = 0; k <= 20; ++k) {
        const double r = -pc.eps_bound + 2.0 * pc.eps_bound * k / 20.0;
        CHECK(fit.copula.loglik >= rho_loglik_reference(r, pairs, fit.props) - 1e-9);
    }
    CHECK(rho_loglik_kernel(0.2, pairs, fit.props, Exec::Serial) ==
          doctest::Approx(rho_loglik_reference(0.2, pairs, fit.props)).epsilon(1e-12));
    CHECK(rho_loglik_kernel(0.3, pairs, fit.props, Exec::Serial) ==
          rho_loglik_kernel(0.3, pairs, fit.props, Exec::Parallel));
}
