#include "spillover/gaussian_copula.hpp"

#include <algorithm>
#include <cmath>

#include "spillover/errors.hpp"
#include "spillover/normal.hpp"

namespace spillover {

namespace {

void check_interior(double v, const char* name) {
    if (!(v > 0.0 && v < 1.0)) throw ConfigError(std::string(name) + " must lie strictly inside (0,1)");
}

constexpr double kCellClip = 1e-10;

struct Scores {
    std::vector<double> a, b;
};

Scores normal_scores(const std::vector<PropensityPair>& p) {
    Scores s;
    s.a.resize(p.size());
    s.b.resize(p.size());
    for (std::size_t g = 0; g < p.size(); ++g) {
        s.a[g] = std_normal_quantile(p[g].p0);
        s.b[g] = std_normal_quantile(p[g].p1);
    }
    return s;
}

double cell_log(const TreatmentPair& d, const PropensityPair& p, double joint) {
    return std::log(std::max(kCellClip, quadrant_from_joint(d[0], d[1], p.p0, p.p1, joint)));
}

void check_aligned(const std::vector<TreatmentPair>& d, const std::vector<PropensityPair>& p) {
    if (d.size() != p.size()) throw DataError("treatment and propensity sequences differ in length");
    if (d.empty()) throw DataError("fit_rho needs at least one group");
}

}  // namespace

double copula(double v0, double v1, double rho) {
    check_interior(v0, "v0");
    check_interior(v1, "v1");
    return bvn_cdf(std_normal_quantile(v0), std_normal_quantile(v1), rho);
}

double copula_density_scores(double a, double b, double rho) {
    const double om = 1.0 - rho * rho;
    return std::exp(-(rho * rho * (a * a + b * b) - 2.0 * rho * a * b) / (2.0 * om)) / std::sqrt(om);
}

double copula_density(double v0, double v1, double rho) {
    check_interior(v0, "v0");
    check_interior(v1, "v1");
    if (!(std::fabs(rho) < 1.0)) throw ConfigError("copula_density requires |rho| < 1");
    return copula_density_scores(std_normal_quantile(v0), std_normal_quantile(v1), rho);
}

double quadrant_from_joint(int d, int dprime, double p0, double p1, double joint) {
    if (d == 1 && dprime == 1) return joint;
    if (d == 1 && dprime == 0) return p0 - joint;
    if (d == 0 && dprime == 1) return p1 - joint;
    return 1.0 - p0 - p1 + joint;
}

double quadrant_probability(int d, int dprime, double p0, double p1, double rho) {
    check_binary(d, "d");
    check_binary(dprime, "dprime");
    return quadrant_from_joint(d, dprime, p0, p1, copula(p0, p1, rho));
}

double CopulaSpec::cdf(double v0, double v1) const { return copula(v0, v1, rho); }
double CopulaSpec::density(double v0, double v1) const { return copula_density(v0, v1, rho); }
double CopulaSpec::quadrant(int d, int dprime, double p0, double p1) const {
    return quadrant_probability(d, dprime, p0, p1, rho);
}

double rho_loglik_reference(double rho, const std::vector<TreatmentPair>& d, const std::vector<PropensityPair>& p) {
    check_aligned(d, p);
    double acc = 0.0;
    for (std::size_t g = 0; g < d.size(); ++g) {
        const double joint = bvn_cdf(std_normal_quantile(p[g].p0), std_normal_quantile(p[g].p1), rho);
        acc += cell_log(d[g], p[g], joint);
    }
    return acc;
}

namespace {

double loglik_on_scores(double rho, const std::vector<TreatmentPair>& d, const std::vector<PropensityPair>& p,
                        const Scores& s, std::vector<double>& terms, Exec exec) {
    const BvnBatch bvn(rho);
    for_each_index(d.size(), exec, [&](std::size_t g) { terms[g] = cell_log(d[g], p[g], bvn(s.a[g], s.b[g])); });
    double acc = 0.0;
    for (double t : terms) acc += t;
    return acc;
}

}  // namespace

double rho_loglik_kernel(double rho, const std::vector<TreatmentPair>& d, const std::vector<PropensityPair>& p,
                         Exec exec) {
    check_aligned(d, p);
    const Scores s = normal_scores(p);
    std::vector<double> terms(d.size());
    return loglik_on_scores(rho, d, p, s, terms, exec);
}

CopulaSpec fit_rho(const std::vector<TreatmentPair>& d, const std::vector<PropensityPair>& p, double eps_bound,
                   Exec exec) {
    check_aligned(d, p);
    if (!(eps_bound > 0.0 && eps_bound < 1.0)) throw ConfigError("eps_bound must lie in (0,1)");
    for (const auto& pp : p) {
        check_interior(pp.p0, "propensity p0");
        check_interior(pp.p1, "propensity p1");
    }
    const Scores s = normal_scores(p);
    std::vector<double> terms(d.size());
    auto f = [&](double r) { return loglik_on_scores(r, d, p, s, terms, exec); };

    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = -eps_bound, hi = eps_bound;
    double x1 = hi - invphi * (hi - lo), x2 = lo + invphi * (hi - lo);
    double f1 = f(x1), f2 = f(x2);
    while (hi - lo > 1e-7) {
        if (f1 < f2) {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + invphi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - invphi * (hi - lo);
            f1 = f(x1);
        }
    }
    CopulaSpec spec;
    spec.eps_bound = eps_bound;
    spec.rho = 0.5 * (lo + hi);
    spec.loglik = f(spec.rho);
    // A monotone likelihood drives the bracket to an end point; report it exactly.
    for (double edge : {-eps_bound, eps_bound}) {
        if (std::fabs(spec.rho - edge) < 1e-4) {
            const double fe = f(edge);
            if (fe >= spec.loglik) {
                spec.rho = edge;
                spec.loglik = fe;
            }
        }
    }
    spec.boundary_warning = eps_bound - std::fabs(spec.rho) < 1e-4;
    return spec;
}

std::vector<TreatmentPair> treatment_pairs(const Dataset& data) {
    std::vector<TreatmentPair> out(data.size());
    for (std::size_t g = 0; g < data.size(); ++g) out[g] = {data.groups[g].d[0], data.groups[g].d[1]};
    return out;
}

}  // namespace spillover
