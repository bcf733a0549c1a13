#include "spillover/quadrature.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <mutex>

#include "spillover/errors.hpp"
#include "spillover/normal.hpp"

namespace spillover {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

QuadratureRule gauss_hermite_rule(int n) {
    if (n < 1 || n > 256) throw ConfigError("gauss_hermite_rule requires 1 <= n <= 256");
    // Golub-Welsch: eigen-decomposition of the symmetric Jacobi matrix.
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        const double off = std::sqrt(0.5 * k);
        jac(k - 1, k) = off;
        jac(k, k - 1) = off;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
    QuadratureRule rule;
    rule.order = n;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const double mu0 = std::sqrt(kPi);
    for (int k = 0; k < n; ++k) {
        rule.nodes[k] = es.eigenvalues()(k);
        const double v = es.eigenvectors()(0, k);
        rule.weights[k] = mu0 * v * v;
    }
    // Refine each node by Newton on the normalised Hermite recurrence, then
    // recompute weights from it; this recovers full precision for large n.
    for (int k = 0; k < n; ++k) {
        double x = rule.nodes[k];
        double dp = 1.0;
        for (int it = 0; it < 6; ++it) {
            double p0 = std::pow(kPi, -0.25), p1 = 0.0;
            for (int j = 1; j <= n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = x * std::sqrt(2.0 / j) * p1 - std::sqrt(double(j - 1) / j) * p2;
            }
            dp = std::sqrt(2.0 * n) * p1;
            const double step = p0 / dp;
            x -= step;
            if (std::fabs(step) < 1e-15 * (1.0 + std::fabs(x))) break;
        }
        rule.nodes[k] = x;
        rule.weights[k] = 2.0 / (dp * dp);
    }
    for (int k = 0; k < n / 2; ++k) {
        const double x = 0.5 * (rule.nodes[n - 1 - k] - rule.nodes[k]);
        const double w = 0.5 * (rule.weights[n - 1 - k] + rule.weights[k]);
        rule.nodes[k] = -x;
        rule.nodes[n - 1 - k] = x;
        rule.weights[k] = rule.weights[n - 1 - k] = w;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
    return rule;
}

QuadratureRule gauss_legendre_rule(int n) {
    if (n < 1) throw ConfigError("gauss_legendre_rule requires n >= 1");
    QuadratureRule rule;
    rule.order = n;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double dp = 1.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 1; j <= n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p2) / j;
            }
            dp = n * (x * p0 - p1) / (x * x - 1.0);
            const double step = p0 / dp;
            x -= step;
            if (std::fabs(step) < 1e-16) break;
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = rule.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
    return rule;
}

namespace {
template <class Builder>
const QuadratureRule& cached(std::map<int, QuadratureRule>& cache, std::mutex& mu, int n, Builder build) {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, build(n)).first;
    return it->second;  // std::map never relocates its nodes
}
}  // namespace

const QuadratureRule& cached_gauss_legendre(int n) {
    static std::map<int, QuadratureRule> cache;
    static std::mutex mu;
    return cached(cache, mu, n, gauss_legendre_rule);
}

const QuadratureRule& cached_gauss_hermite(int n) {
    static std::map<int, QuadratureRule> cache;
    static std::mutex mu;
    return cached(cache, mu, n, gauss_hermite_rule);
}

double normal_expectation(const std::function<double(double)>& f, int n) {
    const QuadratureRule& gh = cached_gauss_hermite(n);
    double acc = 0.0;
    for (int k = 0; k < n; ++k) acc += gh.weights[k] * f(std::sqrt(2.0) * gh.nodes[k]);
    return acc / std::sqrt(kPi);
}

std::array<double, 4> truncated_moments_ab(int d, int dprime, double a, double b, double rho, int order) {
    if (!(std::fabs(rho) < 1.0)) throw ConfigError("truncated_moments requires |rho| < 1");
    if (order < 2) throw ConfigError("truncated_moments requires order >= 2");
    std::array<double, 4> out{0.0, 0.0, 0.0, 0.0};
    const double lo = d == 1 ? -kTailClip : std::max(a, -kTailClip);
    const double hi = d == 1 ? std::min(a, kTailClip) : kTailClip;
    if (!(lo < hi)) return out;
    const double sigma = std::sqrt(1.0 - rho * rho);
    const double bc = std::clamp(b, -kTailClip, kTailClip);

    // The conditional t1-profile steepens around t0 = b/rho; split the outer
    // interval there so each panel stays smooth.
    double split = 0.5 * (lo + hi);
    if (rho != 0.0) {
        const double kink = bc / rho;
        if (kink > lo + 1e-3 * (hi - lo) && kink < hi - 1e-3 * (hi - lo)) split = kink;
    }
    const QuadratureRule& gl = cached_gauss_legendre(order / 2);
    const double sgn = dprime == 1 ? 1.0 : -1.0;
    for (auto [plo, phi] : {std::pair{lo, split}, std::pair{split, hi}}) {
        const double half = 0.5 * (phi - plo), mid = 0.5 * (phi + plo);
        for (int k = 0; k < gl.order; ++k) {
            const double t = mid + half * gl.nodes[k];
            const double wt = gl.weights[k] * half * std_normal_pdf(t);
            const double z = (bc - rho * t) / sigma;
            const double mass = std_normal_cdf(sgn * z);
            // E[t1 1{t1 in quadrant} | t0 = t]
            const double m1 = rho * t * mass - sgn * sigma * std_normal_pdf(z);
            out[0] += wt * mass;
            out[1] += wt * t * mass;
            out[2] += wt * m1;
            out[3] += wt * t * m1;
        }
    }
    return out;
}

std::array<double, 4> truncated_moments(int d, int dprime, double p0, double p1, double rho, int order) {
    if (d != 0 && d != 1) throw ConfigError("d must be 0 or 1");
    if (dprime != 0 && dprime != 1) throw ConfigError("dprime must be 0 or 1");
    return truncated_moments_ab(d, dprime, std_normal_quantile(p0), std_normal_quantile(p1), rho, order);
}

double truncated_moment(int j, int d, int dprime, double p0, double p1, double rho, int order) {
    if (j < 0 || j > 3) throw ConfigError("moment index j must be in 0..3");
    return truncated_moments(d, dprime, p0, p1, rho, order)[j];
}

}  // namespace spillover

namespace spillover {

std::array<std::array<double, 4>, 4> quadrant_moments_all(double a, double b, double rho, int order) {
    std::array<std::array<double, 4>, 4> out{};
    const auto q11 = truncated_moments_ab(1, 1, a, b, rho, order);
    // Moments of (1, t0, t1, t0 t1) over the half planes {t0 <= a} and {t1 <= b}.
    const double ac = std::clamp(a, -kTailClip, kTailClip), bc = std::clamp(b, -kTailClip, kTailClip);
    const double Pa = std_normal_cdf(ac), fa = std_normal_pdf(ac);
    const double Pb = std_normal_cdf(bc), fb = std_normal_pdf(bc);
    const std::array<double, 4> half0{Pa, -fa, -rho * fa, rho * (Pa - ac * fa)};
    const std::array<double, 4> half1{Pb, -rho * fb, -fb, rho * (Pb - bc * fb)};
    const std::array<double, 4> full{1.0, 0.0, 0.0, rho};
    for (int j = 0; j < 4; ++j) {
        out[arm_index(1, 1)][j] = q11[j];
        out[arm_index(1, 0)][j] = half0[j] - q11[j];
        out[arm_index(0, 1)][j] = half1[j] - q11[j];
        out[arm_index(0, 0)][j] = full[j] - half0[j] - half1[j] + q11[j];
    }
    return out;
}

}  // namespace spillover
