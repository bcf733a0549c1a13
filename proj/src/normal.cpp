#include "spillover/normal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spillover/errors.hpp"
#include "spillover/quadrature.hpp"

namespace spillover {

namespace {

constexpr double kPi = 3.14159265358979323846;

double polevl(double x, const double* c, int n) {
    double r = c[n];
    for (int i = n - 1; i >= 0; --i) r = r * x + c[i];
    return r;
}

// Wichura's AS241 (PPND16), relative accuracy about 1e-16.
double as241(double p) {
    static const double a[] = {3.387132872796366608,   133.14166789178437745, 1971.5909503065514427,
                               13731.693765509461125,  45921.953931549871457, 67265.770927008700853,
                               33430.575583588128105,  2509.0809287301226727};
    static const double b[] = {1.0,                   42.313330701600911252, 687.1870074920579083,
                               5394.1960214247511077, 21213.794301586595867, 39307.89580009271061,
                               28729.085735721942674, 5226.495278852545925};
    static const double c[] = {1.42343711074968357734,   4.6303378461565452959,
                               5.7694972214606914055,    3.64784832476320460504,
                               1.27045825245236838258,   0.24178072517745061177,
                               0.0227238449892691845833, 7.7454501427834140764e-4};
    static const double dd[] = {1.0,
                                2.05319162663775882187,    1.6763848301838038494,
                                0.68976733498510000455,    0.14810397642748007459,
                                0.0151986665636164571966,  5.475938084995344946e-4,
                                1.05075007164441684324e-9};
    static const double e[] = {6.6579046435011037772,    5.4637849111641143699,
                               1.7848265399172913358,    0.29656057182850489123,
                               0.026532189526576123093,  0.0012426609473880784386,
                               2.71155556874348757815e-5, 2.01033439929228813265e-7};
    static const double f[] = {1.0,
                               0.59983220655588793769,    0.13692988092273580531,
                               0.0148753612908506148525,  7.868691311456132591e-4,
                               1.8463183175100546818e-5,  1.4215117583164458887e-7,
                               2.04426310338993978564e-15};
    const double q = p - 0.5;
    if (std::fabs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q * polevl(r, a, 7) / polevl(r, b, 7);
    }
    double r = q < 0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double x;
    if (r <= 5.0) {
        r -= 1.6;
        x = polevl(r, c, 7) / polevl(r, dd, 7);
    } else {
        r -= 5.0;
        x = polevl(r, e, 7) / polevl(r, f, 7);
    }
    return q < 0 ? -x : x;
}

inline double bvn_integrand(double s, double ab, double theta) {
    const double st = std::sin(theta);
    const double ct = std::cos(theta);
    return std::exp(-(s - 2.0 * ab * st) / (2.0 * ct * ct));
}

double gl_panel(const QuadratureRule& rule, double s, double ab, double lo, double hi) {
    const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
    double acc = 0.0;
    for (int k = 0; k < rule.order; ++k) acc += rule.weights[k] * bvn_integrand(s, ab, mid + half * rule.nodes[k]);
    return acc * half;
}

double adaptive_theta(double s, double ab, double lo, double hi, int depth) {
    static const QuadratureRule& g10 = cached_gauss_legendre(10);
    static const QuadratureRule& g20 = cached_gauss_legendre(20);
    const double coarse = gl_panel(g10, s, ab, lo, hi);
    const double fine = gl_panel(g20, s, ab, lo, hi);
    if (std::fabs(fine - coarse) <= 1e-15 || depth >= 24) return fine;
    const double mid = 0.5 * (lo + hi);
    return adaptive_theta(s, ab, lo, mid, depth + 1) + adaptive_theta(s, ab, mid, hi, depth + 1);
}

double clamp_frechet(double value, double a, double b) {
    const double pa = std_normal_cdf(a), pb = std_normal_cdf(b);
    const double lower = std::max(0.0, pa + pb - 1.0);
    const double upper = std::min(pa, pb);
    return std::clamp(value, lower, upper);
}

double bvn_limits(double a, double b, double rho, bool* handled) {
    *handled = true;
    if (std::isnan(a) || std::isnan(b)) return std::numeric_limits<double>::quiet_NaN();
    if (a == -HUGE_VAL || b == -HUGE_VAL) return 0.0;
    if (a == HUGE_VAL) return std_normal_cdf(b);
    if (b == HUGE_VAL) return std_normal_cdf(a);
    if (rho == 0.0) return std_normal_cdf(a) * std_normal_cdf(b);
    *handled = false;
    return 0.0;
}

void check_rho(double rho) {
    if (!(std::fabs(rho) < 1.0)) throw ConfigError("bvn_cdf requires |rho| < 1");
}

}  // namespace

double std_normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double std_normal_quantile(double u) {
    if (!(u > 0.0 && u < 1.0)) throw ConfigError("std_normal_quantile requires u in (0,1)");
    double x = as241(u);
    // One Halley step against erfc polishes the last few ulps.
    const double err = std_normal_cdf(x) - u;
    const double pdf = std_normal_pdf(x);
    if (pdf > 0.0) {
        const double t = err / pdf;
        x -= t / (1.0 + 0.5 * x * t);
    }
    return x;
}

double bvn_pdf(double a, double b, double rho) {
    const double om = 1.0 - rho * rho;
    return std::exp(-(a * a - 2.0 * rho * a * b + b * b) / (2.0 * om)) / (2.0 * kPi * std::sqrt(om));
}

double bvn_cdf(double a, double b, double rho) {
    check_rho(rho);
    bool handled = false;
    const double lim = bvn_limits(a, b, rho, &handled);
    if (handled) return lim;
    const double base = std_normal_cdf(a) * std_normal_cdf(b);
    const double integral = adaptive_theta(a * a + b * b, a * b, 0.0, std::asin(rho), 0);
    return clamp_frechet(base + integral / (2.0 * kPi), a, b);
}

BvnBatch::BvnBatch(double rho) : rho_(rho), adaptive_(std::fabs(rho) > 0.9) {
    check_rho(rho);
    if (adaptive_) return;
    const QuadratureRule& g20 = cached_gauss_legendre(20);
    const double hi = std::asin(rho);
    const double half = 0.5 * hi;
    for (int k = 0; k < 20; ++k) {
        const double th = half + half * g20.nodes[k];
        const double c = std::cos(th);
        sin_[k] = std::sin(th);
        half_inv_cos2_[k] = 0.5 / (c * c);
        weight_[k] = g20.weights[k] * half / (2.0 * kPi);
    }
}

double BvnBatch::operator()(double a, double b) const {
    if (adaptive_) return bvn_cdf(a, b, rho_);
    bool handled = false;
    const double lim = bvn_limits(a, b, rho_, &handled);
    if (handled) return lim;
    const double s = a * a + b * b, ab2 = 2.0 * a * b;
    double acc = 0.0;
    for (int k = 0; k < 20; ++k) acc += weight_[k] * std::exp(-(s - ab2 * sin_[k]) * half_inv_cos2_[k]);
    return clamp_frechet(std_normal_cdf(a) * std_normal_cdf(b) + acc, a, b);
}

}  // namespace spillover
